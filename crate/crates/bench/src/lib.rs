//! Fixtures shared by the criterion benches.
//!
//! Inputs are built from a fixed quasi-random sequence so runs compare
//! across machines without an RNG dependency.

use effiq_core::features::OdPoint;
use effiq_core::net::GaussianPrediction;

/// Deterministic values in `[-1, 1)`.
pub fn sequence(n: usize, salt: u64) -> Vec<f64> {
    (0..n as u64)
        .map(|i| {
            let x = (i + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
                ^ salt.wrapping_mul(0xBF58_476D_1CE4_E5B9);
            (x >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        })
        .collect()
}

pub fn rows(n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let flat = sequence(n * d, 1);
    let xs: Vec<Vec<f64>> = flat.chunks(d).map(|c| c.to_vec()).collect();
    let ys = xs
        .iter()
        .map(|x| x.iter().sum::<f64>().sin() + 10.0)
        .collect();
    (xs, ys)
}

pub fn members(m: usize) -> Vec<GaussianPrediction> {
    sequence(2 * m, 2)
        .chunks(2)
        .map(|c| GaussianPrediction {
            mean: 10.0 + 3.0 * c[0],
            var: 0.5 + c[1].abs(),
        })
        .collect()
}

/// Paired absolute errors with a small shift in favor of the first.
pub fn paired_errors(n: usize) -> (Vec<f64>, Vec<f64>) {
    let a: Vec<f64> = sequence(n, 3).iter().map(|v| v.abs()).collect();
    let b = sequence(n, 4)
        .iter()
        .zip(&a)
        .map(|(v, x)| x + 0.1 + 0.5 * v)
        .collect();
    (a, b)
}

/// Origin-destination vectors spread around a few hubs near Ann Arbor.
pub fn od_points(n: usize) -> Vec<OdPoint> {
    let s = sequence(4 * n, 5);
    s.chunks(4)
        .enumerate()
        .map(|(i, c)| {
            let hub = (i % 6) as f64 * 0.02;
            [
                42.25 + hub + 0.01 * c[0],
                -83.75 + hub + 0.01 * c[1],
                42.30 - hub + 0.01 * c[2],
                -83.70 - hub + 0.01 * c[3],
            ]
        })
        .collect()
}
