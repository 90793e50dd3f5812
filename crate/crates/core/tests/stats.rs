//! Scoring functions against brute-force and Monte-Carlo oracles.

use effiq_core::stats::{coverage, r2, rmse, wilcoxon_with, WilcoxonMethod};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Paired errors with occasional exact ties and zero differences.
fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let a: Vec<f64> = (0..n)
        .map(|_| (rng.random_range(0.0..4.0f64) * 4.0).round() / 4.0)
        .collect();
    let b: Vec<f64> = a
        .iter()
        .map(|x| x + (rng.random_range(-2.0..1.5f64) * 4.0).round() / 4.0)
        .collect();
    (a, b)
}

/// Average ranks of |d| by direct comparison counting.
fn naive_ranks(abs: &[f64]) -> Vec<f64> {
    abs.iter()
        .map(|x| {
            let below = abs.iter().filter(|y| *y < x).count() as f64;
            let equal = abs.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// `P(W- >= observed)` by walking all 2^n sign vectors.
fn brute_force_p(diffs: &[f64]) -> f64 {
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = naive_ranks(&abs);
    let observed: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d < 0.0)
        .map(|(_, r)| r)
        .sum();
    let n = diffs.len();
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| ranks[i])
            .sum();
        if w >= observed {
            hits += 1;
        }
    }
    hits as f64 / (1u64 << n) as f64
}

#[test]
fn exact_path_equals_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for n in 1..=12 {
        let mut done = 0;
        while done < 100 {
            let (a, b) = random_pair(&mut rng, n);
            let diffs: Vec<f64> = a
                .iter()
                .zip(&b)
                .map(|(x, y)| x - y)
                .filter(|d| *d != 0.0)
                .collect();
            if diffs.is_empty() {
                continue;
            }
            let r = wilcoxon_with(&a, &b, WilcoxonMethod::Exact).unwrap();
            assert_eq!(
                r.p_value.to_bits(),
                brute_force_p(&diffs).to_bits(),
                "n={n} a={a:?} b={b:?}"
            );
            done += 1;
        }
    }
}

#[test]
fn normal_path_close_to_exact_from_eight_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for n in 8..=12 {
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
            let b: Vec<f64> = a.iter().map(|x| x + rng.random_range(-1.0..1.2)).collect();
            let exact = wilcoxon_with(&a, &b, WilcoxonMethod::Exact)
                .unwrap()
                .p_value;
            let approx = wilcoxon_with(&a, &b, WilcoxonMethod::Normal)
                .unwrap()
                .p_value;
            worst = worst.max((exact - approx).abs());
        }
        assert!(worst <= 0.02, "n={n}: max |exact - normal| = {worst}");
    }
}

#[test]
fn swapping_arguments_swaps_rank_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for n in [5, 12, 30] {
        let (a, b) = random_pair(&mut rng, n);
        let (Ok(ab), Ok(ba)) = (
            wilcoxon_with(&a, &b, WilcoxonMethod::Auto),
            wilcoxon_with(&b, &a, WilcoxonMethod::Auto),
        ) else {
            continue;
        };
        assert_eq!(ab.w_minus, ba.w_plus);
        assert_eq!(ab.w_plus, ba.w_minus);
        // a one-sided test in each direction: the two tails overlap at the
        // observed value, so they sum to at least one
        assert!(ab.p_value + ba.p_value >= 1.0 - 1e-12);
    }
}

#[test]
fn coverage_of_simulated_gaussians() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let n = 100_000;
    let means: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
    let vars: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..9.0)).collect();
    let targets: Vec<f64> = means
        .iter()
        .zip(&vars)
        .map(|(m, v)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            m + v.sqrt() * z
        })
        .collect();
    let c = coverage(&means, &vars, &targets, 0.95).unwrap();
    assert!((c - 0.95).abs() <= 0.005, "coverage {c}");
}

#[test]
fn rmse_squared_is_direct_mean_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for n in [1, 7, 1000] {
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut mse = 0.0;
        for i in 0..n {
            mse += (p[i] - t[i]) * (p[i] - t[i]);
        }
        mse /= n as f64;
        let r = rmse(&p, &t).unwrap();
        assert!((r * r - mse).abs() <= 1e-12 * mse.max(1.0));
    }
}

#[test]
fn r2_mean_predictor_and_affine_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let t: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..20.0)).collect();
    let p: Vec<f64> = t.iter().map(|x| x + rng.random_range(-2.0..2.0)).collect();
    let mean = t.iter().sum::<f64>() / t.len() as f64;
    assert_eq!(r2(&vec![mean; t.len()], &t).unwrap(), Some(0.0));
    let base = r2(&p, &t).unwrap().unwrap();
    for (scale, shift) in [(2.5, -3.0), (0.01, 100.0), (-1.0, 0.0)] {
        let f = |v: &[f64]| v.iter().map(|x| scale * x + shift).collect::<Vec<_>>();
        let moved = r2(&f(&p), &f(&t)).unwrap().unwrap();
        assert!(
            (moved - base).abs() < 1e-9,
            "{scale},{shift}: {moved} vs {base}"
        );
    }
}
