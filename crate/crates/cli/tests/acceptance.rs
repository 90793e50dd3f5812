//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when a criterion outside `KNOWN_UNATTAINABLE` fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use effiq_core::baselines::{single_nn_table, LinearBaseline, DEFAULT_RIDGE};
use effiq_core::energy::{
    fcr_at_sample, label_trip, maf_from_load, FcrConstants, FcrSource, LabelFilters,
};
use effiq_core::ensemble::{aggregate, EnsembleModel, PredictionRecord, TrainConfig};
use effiq_core::features::{build_feature_tables, fit_od_clusters, Energy, TaskId};
use effiq_core::net::{GaussianPrediction, NetworkParams};
use effiq_core::stats::{coverage, rmse, wilcoxon_one_tailed, wilcoxon_with, WilcoxonMethod};
use effiq_core::synth::{generate, write_dataset, SynthConfig};
use effiq_core::ved::{assemble_trips, parse_dynamic_files, read_static_file, ColumnMap};
use effiq_core::{SamplePoint, TripKey, VehicleMeta, VehicleType};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

// tolerances
const GRAD_H: f64 = 1e-5;
const GRAD_REL: f64 = 1e-4;
const GRAD_ABS: f64 = 1e-8;
const GRAD_BUDGET: Duration = Duration::from_secs(30);
const MIXTURE_DRAWS: usize = 1_000_000;
const MIXTURE_REL: f64 = 0.01;
const MIXTURE_BUDGET: Duration = Duration::from_secs(10);
const WILCOXON_APPROX: f64 = 0.02;
const FCR_MAF_LPH: f64 = 4.832;
const FCR_MAF_DIGITS: f64 = 5e-4;
const FCR_LOAD_GPS: f64 = 49.0;
const LABEL_REL: f64 = 0.02;
const RMSE_RATIO_MAX: f64 = 1.2;
const COVERAGE_RANGE: (f64, f64) = (0.90, 0.98);
const E2E_BUDGET: Duration = Duration::from_secs(300);
const E2E_SEED: u64 = 7;
const REPEAT_SEEDS: std::ops::RangeInclusive<u64> = 1..=10;
const LR_WINS_NEEDED: usize = 9;
const LR_P_MAX: f64 = 0.05;
const NN_WINS_NEEDED: usize = 8;
const VED_TRIPS: f64 = 18963.0;
const VED_KM: f64 = 320_792.0;
const VED_REL: f64 = 0.10;
const VED_DIR_ENV: &str = "EFFIQ_VED_DIR";

/// The normal approximation cannot reach 0.02 for the smallest n: at n = 1
/// the exact p is 0.5 or 1 while the continuity-corrected normal tail is
/// far from both.
const KNOWN_UNATTAINABLE: &[&str] = &["3b"];

struct Outcome {
    id: &'static str,
    pass: Option<bool>,
    detail: String,
}

fn line(id: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        pass: Some(pass),
        detail,
    }
}

// ---------------------------------------------------------------- 1

fn param_mut(p: &mut NetworkParams, tensor: usize, idx: usize) -> &mut f64 {
    let layer = &mut p.layers[tensor / 2];
    if tensor.is_multiple_of(2) {
        &mut layer.weights[idx]
    } else {
        &mut layer.bias[idx]
    }
}

fn criterion_gradients() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut checked, mut kinks, mut worst_rel, mut failures) = (0usize, 0usize, 0.0f64, 0usize);
    for net in 0..20u64 {
        let p = NetworkParams::init(6, &[8, 8, 4, 4], 1000 + net).unwrap();
        let n = rng.random_range(3..10);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..6).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (g, _) = p.backward(&xs, &ys);
        let patterns = |q: &NetworkParams| {
            xs.iter()
                .map(|x| q.activation_pattern(x))
                .collect::<Vec<_>>()
        };
        for (t, grad) in g.tensors().enumerate() {
            for (i, &a) in grad.iter().enumerate() {
                let (mut plus, mut minus) = (p.clone(), p.clone());
                *param_mut(&mut plus, t, i) += GRAD_H;
                *param_mut(&mut minus, t, i) -= GRAD_H;
                // a ReLU switching inside the stencil means the partial is
                // not defined at this point
                if patterns(&plus) != patterns(&minus) {
                    kinks += 1;
                    continue;
                }
                let numeric = (plus.mean_nll(&xs, &ys) - minus.mean_nll(&xs, &ys)) / (2.0 * GRAD_H);
                let err = (a - numeric).abs();
                let scale = a.abs().max(numeric.abs());
                if err > GRAD_ABS {
                    worst_rel = worst_rel.max(err / scale);
                    if err > GRAD_REL * scale {
                        failures += 1;
                    }
                }
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    line(
        "1",
        failures == 0 && elapsed < GRAD_BUDGET,
        format!(
            "gradient check: {checked} partials, {failures} outside tolerance, worst rel {worst_rel:.2e}, \
             {kinks} skipped at ReLU kinks, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 2

fn criterion_mixture() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_mean, mut worst_var) = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let members: Vec<GaussianPrediction> = (0..5)
            .map(|_| GaussianPrediction {
                mean: rng.random_range(1.0..20.0),
                var: rng.random_range(0.05..6.0),
            })
            .collect();
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..MIXTURE_DRAWS {
            let m = &members[rng.random_range(0..5)];
            let z: f64 = StandardNormal.sample(&mut rng);
            let y = m.mean + m.var.sqrt() * z;
            s1 += y;
            s2 += y * y;
        }
        let mean = s1 / MIXTURE_DRAWS as f64;
        let var = s2 / MIXTURE_DRAWS as f64 - mean * mean;
        let agg = aggregate(&members);
        worst_mean = worst_mean.max((agg.mean - mean).abs() / mean.abs());
        worst_var = worst_var.max((agg.var - var).abs() / var);
    }
    let elapsed = start.elapsed();
    line(
        "2",
        worst_mean <= MIXTURE_REL && worst_var <= MIXTURE_REL && elapsed < MIXTURE_BUDGET,
        format!(
            "mixture moments vs Monte Carlo: worst rel err mean {worst_mean:.2e}, var {worst_var:.2e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 3

fn brute_force_p(diffs: &[f64]) -> f64 {
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks: Vec<f64> = abs
        .iter()
        .map(|x| {
            let below = abs.iter().filter(|y| *y < x).count() as f64;
            let tied = abs.iter().filter(|y| *y == x).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d < 0.0)
        .map(|(_, r)| r)
        .sum();
    let n = diffs.len();
    let hits = (0u64..1 << n)
        .filter(|mask| {
            (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| ranks[i])
                .sum::<f64>()
                >= observed
        })
        .count();
    hits as f64 / (1u64 << n) as f64
}

fn criterion_wilcoxon() -> Vec<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // exactness on heavily tied data, n nonzero differences
    let mut mismatches = 0;
    let mut tied_gap = 0.0f64;
    for n in 1..=12usize {
        let mut done = 0;
        while done < 100 {
            let a: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0.0..3.0f64) * 8.0).round() / 8.0)
                .collect();
            let b: Vec<f64> = a
                .iter()
                .map(|x| x + (rng.random_range(-1.0..1.2f64) * 8.0).round() / 8.0)
                .collect();
            let diffs: Vec<f64> = a
                .iter()
                .zip(&b)
                .map(|(x, y)| x - y)
                .filter(|d| *d != 0.0)
                .collect();
            if diffs.len() != n {
                continue;
            }
            let exact = wilcoxon_with(&a, &b, WilcoxonMethod::Exact)
                .unwrap()
                .p_value;
            let approx = wilcoxon_with(&a, &b, WilcoxonMethod::Normal)
                .unwrap()
                .p_value;
            if exact.to_bits() != brute_force_p(&diffs).to_bits() {
                mismatches += 1;
            }
            if n >= 8 {
                tied_gap = tied_gap.max((exact - approx).abs());
            }
            done += 1;
        }
    }
    // approximation quality on continuous data
    let mut worst_by_n = BTreeMap::new();
    for n in 1..=12usize {
        let mut worst = 0.0f64;
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
        worst_by_n.insert(n, worst);
    }
    let worst_all = worst_by_n.values().copied().fold(0.0, f64::max);
    let worst_large = worst_by_n.range(8..).map(|(_, v)| *v).fold(0.0, f64::max);
    let failing: Vec<String> = worst_by_n
        .iter()
        .filter(|(_, v)| **v > WILCOXON_APPROX)
        .map(|(n, v)| format!("n={n}:{v:.3}"))
        .collect();
    vec![
        line(
            "3a",
            mismatches == 0,
            format!("exact p vs 2^n enumeration, n=1..12 x 100 tied instances: {mismatches} bitwise mismatches"),
        ),
        line(
            "3b",
            worst_all <= WILCOXON_APPROX,
            format!("normal approximation within {WILCOXON_APPROX} of exact for every n<=12: worst {worst_all:.3} ({})", failing.join(" ")),
        ),
        line(
            "3c",
            worst_large <= WILCOXON_APPROX,
            format!(
                "normal approximation within {WILCOXON_APPROX} of exact for 8<=n<=12, tie-free data: worst {worst_large:.4} \
                 (heavily tied data: {tied_gap:.4}, not asserted)"
            ),
        ),
    ]
}

// ---------------------------------------------------------------- 4

fn criterion_fcr() -> Vec<Outcome> {
    let k = FcrConstants::default();
    let ice = |disp| VehicleMeta {
        displacement_l: disp,
        ..VehicleMeta::new("1", VehicleType::Ice)
    };
    let maf = SamplePoint {
        maf: Some(14.7),
        stft_b1: Some(0.0),
        ltft_b1: Some(0.0),
        ..Default::default()
    };
    let maf_v = fcr_at_sample(&maf, &ice(None), &k).unwrap();
    let load_gps = maf_from_load(100.0, 1.225, 2.0, 2400.0);
    let load = SamplePoint {
        abs_load: Some(100.0),
        engine_rpm: Some(2400.0),
        ..Default::default()
    };
    let load_v = fcr_at_sample(&load, &ice(Some(2.0)), &k).unwrap();
    let pass = SamplePoint {
        fuel_rate: Some(3.25),
        maf: Some(20.0),
        stft_b1: Some(10.0),
        ..Default::default()
    };
    let pass_v = fcr_at_sample(&pass, &ice(Some(2.0)), &k).unwrap();
    let worked = (maf_v.lph - FCR_MAF_LPH).abs() < FCR_MAF_DIGITS
        && maf_v.lph == 3600.0 / 745.0
        && maf_v.source == FcrSource::Maf
        && load_gps == FCR_LOAD_GPS
        && load_v.source == FcrSource::AbsLoad
        && (load_v.lph - FCR_LOAD_GPS / 14.7 * 3600.0 / 745.0).abs() < 1e-12
        && pass_v.lph == 3.25
        && pass_v.source == FcrSource::FuelRate;

    // zero-noise synthetic fleet through the file format and the labeler
    let cfg = SynthConfig {
        noise_scale: 0.0,
        total_trips: Some(300),
        days: 120,
        ..SynthConfig::default()
    };
    let data = generate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = write_dataset(dir.path(), &data, cfg.epoch).unwrap();
    let parsed = parse_dynamic_files(&files.dynamic, &ColumnMap::default()).unwrap();
    let statics = read_static_file(&files.static_table).unwrap();
    let trips = assemble_trips(parsed.groups, &statics.vehicles, cfg.epoch).trips;
    let truth: BTreeMap<&TripKey, _> = data.truth.iter().map(|t| (&t.key, t)).collect();
    let (mut labels, mut worst, mut missing) = (0usize, 0.0f64, 0usize);
    let mut branches: BTreeMap<String, usize> = BTreeMap::new();
    for trip in &trips {
        let l = label_trip(trip, &k, &LabelFilters::default());
        let t = truth[&trip.key()];
        if let Some(b) = t.fuel_branch {
            *branches.entry(format!("{b:?}")).or_default() += 1;
        }
        for (got, want) in [
            (l.energy.fuel_eff_km_per_l, t.fuel),
            (l.energy.batt_eff_km_per_kwh, t.battery),
        ] {
            match (got, want) {
                (Some(g), Some(w)) => {
                    worst = worst.max((g / w.value - 1.0).abs());
                    labels += 1;
                }
                (None, Some(_)) => missing += 1,
                _ => {}
            }
        }
    }
    let all_branches = branches.len() == 3;
    vec![
        line(
            "4a",
            worked,
            format!(
                "worked FCR examples: MAF {:.6} L/h, load air flow {load_gps} g/s, passthrough {} L/h",
                maf_v.lph, pass_v.lph
            ),
        ),
        line(
            "4b",
            worst <= LABEL_REL && missing == 0 && all_branches && parsed.skips.rows_skipped == 0,
            format!(
                "zero-noise synthetic labels vs truth: {labels} labels, worst rel err {worst:.2e}, {missing} missing, \
                 branches {branches:?}, {} rows skipped",
                parsed.skips.rows_skipped
            ),
        ),
    ]
}

// ---------------------------------------------------------------- 5-7

/// Training settings used for the synthetic experiments.
fn experiment_train(seed: u64) -> TrainConfig {
    TrainConfig {
        members: 10,
        epochs: 15,
        batch: 64,
        lr: 0.01,
        adv_eps: 0.01,
        seed,
        threads: None,
        ..TrainConfig::default()
    }
}

fn experiment_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        vehicles: vec![
            (VehicleType::Ice, 16),
            (VehicleType::Hev, 1),
            (VehicleType::Ev, 1),
        ],
        total_trips: Some(2000),
        noise_scale: 0.05,
        seed,
        ..SynthConfig::default()
    }
}

struct Experiment {
    enn: Vec<PredictionRecord>,
    nn: Vec<PredictionRecord>,
    lr: Vec<PredictionRecord>,
    /// planted noise sd per test trip
    sigma: BTreeMap<TripKey, f64>,
    month_factor: [f64; 12],
    elapsed: Duration,
}

fn run_experiment(seed: u64) -> Experiment {
    let start = Instant::now();
    let synth = experiment_synth(seed);
    let data = generate(&synth).unwrap();
    let labels: Vec<_> = data
        .trips
        .iter()
        .map(|t| label_trip(t, &FcrConstants::default(), &LabelFilters::default()))
        .collect();
    let clusters = fit_od_clusters(&data.trips, 8, seed, 100).unwrap().model;
    let build = build_feature_tables(&data.trips, &labels, &clusters);
    let task = TaskId::new(VehicleType::Ice, Energy::Fuel);
    let (train, test) = build.tables[&task].stratified_split(0.7, seed).unwrap();
    let cfg = experiment_train(seed);
    let (enn, _) = EnsembleModel::fit_table(&train, &cfg).unwrap();
    let (nn, _) = single_nn_table(&train, &cfg).unwrap();
    let lr = LinearBaseline::fit(&train, DEFAULT_RIDGE).unwrap();
    let sigma = data
        .truth
        .iter()
        .filter_map(|t| Some((t.key.clone(), t.fuel?.sigma)))
        .collect();
    Experiment {
        enn: enn.predict(&test).unwrap(),
        nn: nn.predict(&test).unwrap(),
        lr: lr.predict(&test).unwrap(),
        sigma,
        month_factor: synth.month_noise,
        elapsed: start.elapsed(),
    }
}

fn score(recs: &[PredictionRecord]) -> f64 {
    let p: Vec<f64> = recs.iter().map(|r| r.pred_mean).collect();
    let t: Vec<f64> = recs.iter().map(|r| r.target).collect();
    rmse(&p, &t).unwrap()
}

fn abs_errors(recs: &[PredictionRecord]) -> Vec<f64> {
    recs.iter()
        .map(|r| (r.pred_mean - r.target).abs())
        .collect()
}

fn criterion_end_to_end(e: &Experiment) -> Vec<Outcome> {
    let planted =
        (e.enn.iter().map(|r| e.sigma[&r.key].powi(2)).sum::<f64>() / e.enn.len() as f64).sqrt();
    let enn_rmse = score(&e.enn);
    let ratio = enn_rmse / planted;
    let means: Vec<f64> = e.enn.iter().map(|r| r.pred_mean).collect();
    let vars: Vec<f64> = e.enn.iter().map(|r| r.pred_var.unwrap()).collect();
    let targets: Vec<f64> = e.enn.iter().map(|r| r.target).collect();
    let cov = coverage(&means, &vars, &targets, 0.95).unwrap();

    // months grouped by planted noise factor, ordered by the planted sd
    let mut groups: BTreeMap<u64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in &e.enn {
        let factor = e.month_factor[r.month as usize - 1];
        let g = groups.entry(factor.to_bits()).or_default();
        g.0.push(e.sigma[&r.key].powi(2));
        g.1.push(r.pred_var.unwrap().sqrt());
    }
    let mut rows: Vec<(f64, f64, f64)> = groups
        .iter()
        .map(|(f, (s2, sd))| {
            let planted = (s2.iter().sum::<f64>() / s2.len() as f64).sqrt();
            (
                f64::from_bits(*f),
                planted,
                sd.iter().sum::<f64>() / sd.len() as f64,
            )
        })
        .collect();
    rows.sort_by(|a, b| a.1.total_cmp(&b.1));
    let ordered = rows.windows(2).all(|w| w[0].2 < w[1].2);
    let shown: Vec<String> = rows
        .iter()
        .map(|(f, p, s)| format!("factor {f}: planted {p:.3} predicted {s:.3}"))
        .collect();
    let in_time = e.elapsed < E2E_BUDGET;
    vec![
        line(
            "5a",
            ratio <= RMSE_RATIO_MAX && in_time,
            format!(
                "synthetic ICE fuel, seed {E2E_SEED}: ENN RMSE {enn_rmse:.4} / planted sd {planted:.4} = {ratio:.3} \
                 (max {RMSE_RATIO_MAX}), run {:.1}s",
                e.elapsed.as_secs_f64()
            ),
        ),
        line(
            "5b",
            (COVERAGE_RANGE.0..=COVERAGE_RANGE.1).contains(&cov),
            format!("95% interval coverage {cov:.4} (range {COVERAGE_RANGE:?})"),
        ),
        line("5c", ordered, format!("mean predicted sd follows planted month ordering: {}", shown.join("; "))),
    ]
}

fn criterion_baselines(runs: &[(u64, Experiment)]) -> Vec<Outcome> {
    let (mut lr_wins, mut nn_wins) = (0, 0);
    let mut rows = Vec::new();
    for (seed, e) in runs {
        let (enn, nn, lr) = (score(&e.enn), score(&e.nn), score(&e.lr));
        let p = wilcoxon_one_tailed(&abs_errors(&e.enn), &abs_errors(&e.lr))
            .unwrap()
            .p_value;
        if enn < lr && p < LR_P_MAX {
            lr_wins += 1;
        }
        if enn <= nn {
            nn_wins += 1;
        }
        rows.push(format!(
            "seed {seed}: ENN {enn:.3} NN {nn:.3} LR {lr:.3} p {p:.1e}"
        ));
    }
    eprintln!("    {}", rows.join("\n    "));
    vec![
        line(
            "6",
            lr_wins >= LR_WINS_NEEDED,
            format!("ENN beats LR with one-tailed p < {LR_P_MAX} in {lr_wins}/10 seeds (need {LR_WINS_NEEDED})"),
        ),
        line(
            "7",
            nn_wins >= NN_WINS_NEEDED,
            format!("ENN RMSE <= single NN RMSE in {nn_wins}/10 seeds (need {NN_WINS_NEEDED})"),
        ),
    ]
}

// ---------------------------------------------------------------- 8, 9

fn effiq(args: &[&str], out: &Path, extra_env: &[(&str, &str)]) -> Result<(), String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_effiq"));
    cmd.args(args)
        .arg("--out")
        .arg(out)
        .env("EFFIQ_THREADS", "1");
    for (k, v) in extra_env {
        cmd.env(k, v);
    }
    let output = cmd.output().map_err(|e| e.to_string())?;
    if output.status.success() {
        Ok(())
    } else {
        Err(format!(
            "effiq {args:?}: {}",
            String::from_utf8_lossy(&output.stderr)
        ))
    }
}

const STAGES: [&str; 8] = [
    "ingest",
    "label",
    "featurize",
    "split",
    "train",
    "predict",
    "evaluate",
    "report",
];

fn criterion_real_data() -> Outcome {
    let Ok(dir) = std::env::var(VED_DIR_ENV) else {
        return Outcome {
            id: "8",
            pass: None,
            detail: format!(
                "real VED reproduction skipped: set {VED_DIR_ENV} to a directory of VED CSV files"
            ),
        };
    };
    let out = tempfile::tempdir().unwrap();
    let run = || -> Result<String, String> {
        effiq(&["ingest", "--input", &dir], out.path(), &[])?;
        let text = std::fs::read_to_string(out.path().join("ingest/summary.json"))
            .map_err(|e| e.to_string())?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let ice = &v["per_type"]["ICE"];
        let trips = ice["n_trips"].as_f64().unwrap_or(0.0);
        let km = ice["total_distance_km"].as_f64().unwrap_or(0.0);
        for stage in &STAGES[1..] {
            effiq(&[stage], out.path(), &[])?;
        }
        let report = out.path().join("eval/report.csv");
        let ok = (trips / VED_TRIPS - 1.0).abs() <= VED_REL
            && (km / VED_KM - 1.0).abs() <= VED_REL
            && report.exists();
        Ok(format!(
            "{}ICE trips {trips} (reference {VED_TRIPS}), {km:.0} km (reference {VED_KM})",
            if ok { "" } else { "MISMATCH " }
        ))
    };
    match run() {
        Ok(msg) => line(
            "8",
            !msg.starts_with("MISMATCH"),
            format!("real VED: {msg}"),
        ),
        Err(e) => line("8", false, format!("real VED pipeline failed: {e}")),
    }
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn criterion_determinism() -> Outcome {
    let config = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(
        config.path(),
        "seed=11\nsynth_trips=500\nsynth_days=120\nmembers=3\nepochs=3\nbatch=64\nlr=0.01\n",
    )
    .unwrap();
    let cfg = config.path().to_str().unwrap().to_string();
    let runs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &runs {
        for stage in std::iter::once("synth").chain(STAGES) {
            if let Err(e) = effiq(&[stage, "--config", &cfg], dir.path(), &[]) {
                return line("9", false, format!("pipeline failed: {e}"));
            }
        }
    }
    let (a, b) = (runs[0].path(), runs[1].path());
    let files = files_under(a);
    let compared: Vec<&PathBuf> = files
        .iter()
        .filter(|p| {
            ["models", "eval", "report", "preds"]
                .iter()
                .any(|d| p.starts_with(d))
        })
        .collect();
    let differing: Vec<String> = compared
        .iter()
        .filter(|p| std::fs::read(a.join(p)).ok() != std::fs::read(b.join(p)).ok())
        .map(|p| p.display().to_string())
        .collect();
    let same_listing = files == files_under(b);
    line(
        "9",
        differing.is_empty() && same_listing && !compared.is_empty(),
        format!(
            "two seeded single-threaded runs: {} model/report files compared, {} differ {:?}",
            compared.len(),
            differing.len(),
            differing
        ),
    )
}

fn main() {
    let mut outcomes = Vec::new();
    let mut report = |o: Outcome| {
        let tag = match o.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIPPED",
        };
        let known = if o.pass == Some(false) && KNOWN_UNATTAINABLE.contains(&o.id) {
            " (known unattainable)"
        } else {
            ""
        };
        println!("{tag} [{}] {}{known}", o.id, o.detail);
        outcomes.push(o);
    };
    report(criterion_gradients());
    report(criterion_mixture());
    criterion_wilcoxon().into_iter().for_each(&mut report);
    criterion_fcr().into_iter().for_each(&mut report);
    let runs: Vec<(u64, Experiment)> = REPEAT_SEEDS.map(|s| (s, run_experiment(s))).collect();
    let e2e = &runs
        .iter()
        .find(|(s, _)| *s == E2E_SEED)
        .expect("seed in range")
        .1;
    criterion_end_to_end(e2e).into_iter().for_each(&mut report);
    criterion_baselines(&runs).into_iter().for_each(&mut report);
    report(criterion_real_data());
    report(criterion_determinism());

    let unexpected: Vec<&str> = outcomes
        .iter()
        .filter(|o| o.pass == Some(false) && !KNOWN_UNATTAINABLE.contains(&o.id))
        .map(|o| o.id)
        .collect();
    if !unexpected.is_empty() {
        eprintln!("acceptance failures: {unexpected:?}");
        std::process::exit(1);
    }
}
