//! Deep ensemble of heteroscedastic networks.
//!
//! Member `m` is initialized from seed `base + m` and shuffles its batches
//! from a separate stream of the same seed, so results do not depend on
//! whether members train sequentially or on a thread pool. Targets are
//! z-scored with training statistics before fitting; predictions are mapped
//! back to target units before aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDateTime};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::energy::{format_iso, parse_iso};
use crate::error::{Error, Result};
use crate::features::{stratified_indices, FeatureTable, Standardizer, TaskId};
use crate::net::{self, AdamConfig, AdamState, GaussianPrediction, NetworkParams, VAR_FLOOR};
use crate::ved::TripKey;

pub const THREADS_ENV: &str = "EFFIQ_THREADS";
pub const DEFAULT_LR_GRID: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub members: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub adv_eps: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    /// Member concurrency cap; `None` reads `EFFIQ_THREADS`, then falls back
    /// to the rayon default.
    pub threads: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            members: 10,
            epochs: 10,
            batch: 500,
            lr: 0.1,
            adv_eps: 0.01,
            seed: 42,
            hidden: net::DEFAULT_HIDDEN.to_vec(),
            threads: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.members == 0 || self.epochs == 0 || self.batch == 0 {
            return Err(Error::InvalidInput(
                "members, epochs and batch must be positive".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !(self.adv_eps >= 0.0 && self.adv_eps.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "adv_eps must be non-negative, got {}",
                self.adv_eps
            )));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "bad hidden widths {:?}",
                self.hidden
            )));
        }
        Ok(())
    }

    fn resolved_threads(&self) -> Option<usize> {
        self.threads
            .or_else(|| std::env::var(THREADS_ENV).ok()?.trim().parse().ok())
            .filter(|&n| n > 0)
    }
}

/// Batch sizes one epoch uses for `n` samples.
pub fn batch_partition(n: usize, batch: usize) -> Vec<usize> {
    let batch = batch.clamp(1, n.max(1));
    (0..n)
        .step_by(batch)
        .map(|start| batch.min(n - start))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemberLog {
    pub member: usize,
    pub seed: u64,
    /// mean clean-input NLL per completed epoch, standardized target units
    pub epoch_loss: Vec<f64>,
    /// `(epoch, batch)` of the first non-finite update; parameters are
    /// rolled back to before that batch and training stops for the member
    pub diverged_at: Option<(usize, usize)>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub members: Vec<MemberLog>,
}

impl TrainLog {
    pub fn diverged(&self) -> usize {
        self.members
            .iter()
            .filter(|m| m.diverged_at.is_some())
            .count()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for m in &self.members {
            let losses: Vec<String> = m.epoch_loss.iter().map(|l| format!("{l:.6}")).collect();
            let _ = write!(
                out,
                "member={} seed={} steps={} loss=[{}]",
                m.member,
                m.seed,
                m.steps,
                losses.join(",")
            );
            if let Some((e, b)) = m.diverged_at {
                let _ = write!(out, " DIVERGED epoch={e} batch={b}");
            }
            out.push('\n');
        }
        out
    }
}

/// Standardized training arrays.
struct Dataset<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [f64],
}

fn train_member(
    data: &Dataset,
    cfg: &TrainConfig,
    member: usize,
) -> Result<(NetworkParams, MemberLog)> {
    let seed = cfg.seed.wrapping_add(member as u64);
    let d = data.xs[0].len();
    let mut params = NetworkParams::init(d, &cfg.hidden, seed)?;
    let mut adam = AdamState::new(
        &params,
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let n = data.xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = MemberLog {
        member,
        seed,
        epoch_loss: Vec::with_capacity(cfg.epochs),
        diverged_at: None,
        steps: 0,
    };
    let mut bx: Vec<Vec<f64>> = Vec::with_capacity(cfg.batch.min(n));
    let mut by: Vec<f64> = Vec::with_capacity(cfg.batch.min(n));

    'epochs: for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut start = 0;
        let mut loss_sum = 0.0;
        for (b, size) in batch_partition(n, cfg.batch).into_iter().enumerate() {
            bx.clear();
            by.clear();
            for &i in &order[start..start + size] {
                bx.push(data.xs[i].clone());
                by.push(data.ys[i]);
            }
            start += size;
            let (grads, loss) = params.adversarial_backward(&bx, &by, cfg.adv_eps);
            let finite_grad = grads.tensors().flatten().all(|g| g.is_finite());
            if !loss.is_finite() || !finite_grad {
                log.diverged_at = Some((epoch, b));
                break 'epochs;
            }
            let snapshot = params.clone();
            adam.update(&mut params, &grads);
            log.steps += 1;
            if params.tensors().flatten().any(|p| !p.is_finite()) {
                params = snapshot;
                log.diverged_at = Some((epoch, b));
                break 'epochs;
            }
            loss_sum += loss * size as f64;
        }
        log.epoch_loss.push(loss_sum / n as f64);
    }
    Ok((params, log))
}

fn train_members(data: &Dataset, cfg: &TrainConfig) -> Result<(Vec<NetworkParams>, TrainLog)> {
    let run = || -> Result<Vec<(NetworkParams, MemberLog)>> {
        (0..cfg.members)
            .into_par_iter()
            .map(|m| train_member(data, cfg, m))
            .collect()
    };
    let runs = match cfg.resolved_threads() {
        Some(1) => (0..cfg.members)
            .map(|m| train_member(data, cfg, m))
            .collect::<Result<Vec<_>>>()?,
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let (members, logs) = runs.into_iter().unzip();
    Ok((members, TrainLog { members: logs }))
}

/// Moment-matched Gaussian of the uniform mixture of member predictions.
pub fn aggregate(preds: &[GaussianPrediction]) -> GaussianPrediction {
    assert!(!preds.is_empty(), "aggregate needs at least one member");
    let m = preds.len() as f64;
    let mean = preds.iter().map(|p| p.mean).sum::<f64>() / m;
    // E[var] + Var[mean]; same value as E[var + mean^2] - mean*^2 without
    // the cancellation
    let within = preds.iter().map(|p| p.var).sum::<f64>() / m;
    let between = preds.iter().map(|p| (p.mean - mean).powi(2)).sum::<f64>() / m;
    GaussianPrediction {
        mean,
        var: within + between,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub task: Option<TaskId>,
    pub config: TrainConfig,
    pub standardizer: Standardizer,
    pub target_mean: f64,
    pub target_std: f64,
    pub members: Vec<NetworkParams>,
}

fn target_stats(ys: &[f64]) -> (f64, f64) {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let std = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
    (
        mean,
        if std > 1e-12 * mean.abs().max(1.0) {
            std
        } else {
            1.0
        },
    )
}

fn check_rows(names: &[String], xs: &[Vec<f64>], ys: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if xs.len() != ys.len() {
        return Err(Error::Alignment(format!(
            "{} feature rows but {} targets",
            xs.len(),
            ys.len()
        )));
    }
    if let Some(r) = xs.iter().find(|r| r.len() != names.len()) {
        return Err(Error::Alignment(format!(
            "row has {} features, expected {}",
            r.len(),
            names.len()
        )));
    }
    if xs.iter().flatten().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite training value".into()));
    }
    Ok(())
}

impl EnsembleModel {
    /// Fits the standardizer and trains all members on raw feature rows.
    pub fn fit(
        names: &[String],
        xs: &[Vec<f64>],
        ys: &[f64],
        task: Option<TaskId>,
        config: &TrainConfig,
    ) -> Result<(Self, TrainLog)> {
        config.validate()?;
        check_rows(names, xs, ys)?;
        let standardizer = Standardizer::fit(names, xs)?;
        if standardizer.output_dim() == 0 {
            return Err(Error::InsufficientData(
                "every feature is constant on the training set".into(),
            ));
        }
        let zx = standardizer.apply_all(xs);
        let (target_mean, target_std) = target_stats(ys);
        let zy: Vec<f64> = ys.iter().map(|y| (y - target_mean) / target_std).collect();
        let (members, log) = train_members(&Dataset { xs: &zx, ys: &zy }, config)?;
        let model = EnsembleModel {
            task,
            config: config.clone(),
            standardizer,
            target_mean,
            target_std,
            members,
        };
        Ok((model, log))
    }

    pub fn fit_table(table: &FeatureTable, config: &TrainConfig) -> Result<(Self, TrainLog)> {
        let task = table.rows.first().map(|r| r.task);
        Self::fit(
            &table.names,
            &table.features(),
            &table.targets(),
            task,
            config,
        )
    }

    pub fn feature_names(&self) -> &[String] {
        &self.standardizer.input_names
    }

    /// Per-member predictions in target units for one raw feature row.
    pub fn member_predictions(&self, raw: &[f64]) -> Vec<GaussianPrediction> {
        let z = self.standardizer.apply(raw);
        let s2 = self.target_std * self.target_std;
        self.members
            .iter()
            .map(|m| {
                let p = m.predict_unchecked(&z);
                GaussianPrediction {
                    mean: self.target_mean + self.target_std * p.mean,
                    var: (s2 * p.var).max(VAR_FLOOR),
                }
            })
            .collect()
    }

    /// Aggregated prediction for each raw feature row (model feature order).
    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<GaussianPrediction>> {
        let d = self.feature_names().len();
        rows.iter()
            .map(|r| {
                if r.len() != d {
                    return Err(Error::Alignment(format!(
                        "row has {} features, model expects {d}",
                        r.len()
                    )));
                }
                if r.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput("non-finite feature value".into()));
                }
                Ok(aggregate(&self.member_predictions(r)))
            })
            .collect()
    }

    /// Column order mapping the table onto the model's feature order.
    fn align(&self, names: &[String]) -> Result<Vec<usize>> {
        let expected = self.feature_names();
        let missing: Vec<&str> = expected
            .iter()
            .filter(|n| !names.contains(n))
            .map(String::as_str)
            .collect();
        let extra: Vec<&str> = names
            .iter()
            .filter(|n| !expected.contains(n))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::Alignment(format!(
                "feature names differ from model: missing {missing:?}, unexpected {extra:?}"
            )));
        }
        Ok(expected
            .iter()
            .map(|n| names.iter().position(|m| m == n).unwrap())
            .collect())
    }

    /// Predictions with trip metadata, sorted by start time then trip key.
    pub fn predict(&self, table: &FeatureTable) -> Result<Vec<PredictionRecord>> {
        let order = self.align(&table.names)?;
        let rows: Vec<Vec<f64>> = table
            .rows
            .iter()
            .map(|r| order.iter().map(|&j| r.features[j]).collect())
            .collect();
        let preds = self.predict_rows(&rows)?;
        let mut out: Vec<PredictionRecord> = table
            .rows
            .iter()
            .zip(preds)
            .map(|(r, p)| PredictionRecord {
                key: r.key.clone(),
                start: r.start,
                month: r.month,
                task: r.task,
                target: r.target,
                pred_mean: p.mean,
                pred_var: Some(p.var),
            })
            .collect();
        sort_chronological(&mut out);
        Ok(out)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = dir.join(META_FILE);
        fs::write(&meta, self.render_meta()).map_err(|e| Error::io(&meta, e))?;
        for (i, m) in self.members.iter().enumerate() {
            let path = dir.join(member_file(i));
            let mut buf = Vec::new();
            net::write_member(&mut buf, m)?;
            fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(META_FILE);
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let mut model = Self::parse_meta(&text)?;
        for i in 0..model.config.members {
            let path = dir.join(member_file(i));
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let member = net::read_member(bytes.as_slice())?;
            if member.input_dim() != model.standardizer.output_dim()
                || member.hidden_widths() != model.config.hidden
            {
                return Err(Error::ModelFormat(format!(
                    "{} does not match model.meta architecture",
                    path.display()
                )));
            }
            model.members.push(member);
        }
        Ok(model)
    }

    fn render_meta(&self) -> String {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "format={META_FORMAT}");
        let _ = writeln!(s, "task={}", self.task.map(|t| t.key()).unwrap_or_default());
        let _ = writeln!(s, "members={}", c.members);
        let _ = writeln!(s, "epochs={}", c.epochs);
        let _ = writeln!(s, "batch={}", c.batch);
        let _ = writeln!(s, "lr={}", c.lr);
        let _ = writeln!(s, "adv_eps={}", c.adv_eps);
        let _ = writeln!(s, "seed={}", c.seed);
        let _ = writeln!(s, "hidden={}", list(&c.hidden));
        let _ = writeln!(s, "target_mean={}", self.target_mean);
        let _ = writeln!(s, "target_std={}", self.target_std);
        let _ = writeln!(s, "features={}", self.standardizer.input_names.join(","));
        let _ = writeln!(s, "kept={}", list(&self.standardizer.kept));
        let _ = writeln!(s, "mean={}", join(&self.standardizer.mean));
        let _ = writeln!(s, "std={}", join(&self.standardizer.std));
        s
    }

    fn parse_meta(text: &str) -> Result<Self> {
        let fields: BTreeMap<&str, &str> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_once('=')
                    .ok_or_else(|| Error::ModelFormat(format!("bad model.meta line {l:?}")))
            })
            .collect::<Result<_>>()?;
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::ModelFormat(format!("model.meta lacks {k}")))
        };
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::ModelFormat(format!("bad {k} value {v:?}")))
        }
        fn nums<T: std::str::FromStr>(k: &str, v: &str) -> Result<Vec<T>> {
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',').map(|x| num(k, x)).collect()
        }
        if get("format")? != META_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unsupported model format {:?}",
                get("format")?
            )));
        }
        let task = match get("task")? {
            "" => None,
            k => Some(TaskId::parse_key(k)?),
        };
        let config = TrainConfig {
            members: num("members", get("members")?)?,
            epochs: num("epochs", get("epochs")?)?,
            batch: num("batch", get("batch")?)?,
            lr: num("lr", get("lr")?)?,
            adv_eps: num("adv_eps", get("adv_eps")?)?,
            seed: num("seed", get("seed")?)?,
            hidden: nums("hidden", get("hidden")?)?,
            threads: None,
        };
        let input_names: Vec<String> = match get("features")? {
            "" => Vec::new(),
            s => s.split(',').map(str::to_string).collect(),
        };
        let kept: Vec<usize> = nums("kept", get("kept")?)?;
        let mean: Vec<f64> = nums("mean", get("mean")?)?;
        let std: Vec<f64> = nums("std", get("std")?)?;
        if kept.len() != mean.len()
            || kept.len() != std.len()
            || kept.iter().any(|&j| j >= input_names.len())
        {
            return Err(Error::ModelFormat(
                "inconsistent standardizer in model.meta".into(),
            ));
        }
        let dropped = (0..input_names.len())
            .filter(|j| !kept.contains(j))
            .map(|j| input_names[j].clone())
            .collect();
        Ok(EnsembleModel {
            task,
            standardizer: Standardizer {
                input_names,
                kept,
                mean,
                std,
                dropped,
            },
            target_mean: num("target_mean", get("target_mean")?)?,
            target_std: num("target_std", get("target_std")?)?,
            config,
            members: Vec::new(),
        })
    }
}

pub const META_FILE: &str = "model.meta";
const META_FORMAT: &str = "effiq-ensemble-1";

pub fn member_file(i: usize) -> String {
    format!("member_{i:02}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best_lr: f64,
    /// validation NLL per grid value; `None` marks a diverged run
    pub losses: Vec<(f64, Option<f64>)>,
}

/// Trains one member per learning rate on 90% of `table` (stratified by
/// month) for `epochs` epochs and picks the lowest validation NLL. Ties go
/// to the larger learning rate.
pub fn grid_search_lr(
    table: &FeatureTable,
    config: &TrainConfig,
    grid: &[f64],
    epochs: usize,
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty learning-rate grid".into()));
    }
    let (tr, va) = stratified_indices(&table.months(), 0.9, config.seed)?;
    let xs = table.features();
    let ys = table.targets();
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            idx.iter().map(|&i| xs[i].clone()).collect(),
            idx.iter().map(|&i| ys[i]).collect(),
        )
    };
    let (tx, ty) = pick(&tr);
    let (vx, vy) = pick(&va);
    grid_search_arrays(&table.names, (&tx, &ty), (&vx, &vy), config, grid, epochs)
}

pub fn grid_search_arrays(
    names: &[String],
    train: (&[Vec<f64>], &[f64]),
    val: (&[Vec<f64>], &[f64]),
    config: &TrainConfig,
    grid: &[f64],
    epochs: usize,
) -> Result<GridResult> {
    let mut losses = Vec::with_capacity(grid.len());
    for &lr in grid {
        let cfg = TrainConfig {
            members: 1,
            epochs,
            lr,
            ..config.clone()
        };
        let (model, log) = EnsembleModel::fit(names, train.0, train.1, None, &cfg)?;
        let loss = if log.diverged() > 0 {
            None
        } else {
            let preds = model.predict_rows(val.0)?;
            let l = preds
                .iter()
                .zip(val.1)
                .map(|(p, &y)| net::nll(p, y))
                .sum::<f64>()
                / val.1.len() as f64;
            l.is_finite().then_some(l)
        };
        losses.push((lr, loss));
    }
    let best = losses
        .iter()
        .filter_map(|&(lr, l)| l.map(|l| (lr, l)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(b.0.total_cmp(&a.0)))
        .map(|(lr, _)| lr)
        .ok_or_else(|| Error::AllDiverged(format!("{losses:?}")))?;
    Ok(GridResult {
        best_lr: best,
        losses,
    })
}

/// One row of `preds.csv`; `pred_var` is optional for external baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub key: TripKey,
    pub start: NaiveDateTime,
    pub month: u32,
    pub task: TaskId,
    pub target: f64,
    pub pred_mean: f64,
    pub pred_var: Option<f64>,
}

pub const PREDS_HEADER: [&str; 8] = [
    "veh_id",
    "trip_id",
    "start_iso",
    "month",
    "task",
    "target",
    "pred_mean",
    "pred_var",
];

pub fn sort_chronological(records: &mut [PredictionRecord]) {
    records.sort_by(|a, b| a.start.cmp(&b.start).then_with(|| a.key.cmp(&b.key)));
}

pub fn write_preds<W: Write>(out: W, records: &[PredictionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PREDS_HEADER)?;
    for r in records {
        w.write_record([
            r.key.veh_id.clone(),
            r.key.trip_id.clone(),
            format_iso(&r.start),
            r.month.to_string(),
            r.task.key(),
            r.target.to_string(),
            r.pred_mean.to_string(),
            r.pred_var.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<preds>", e))?;
    Ok(())
}

/// Reads a `preds.csv`-schema file. The `pred_var` column may be absent or
/// empty, as for third-party baselines.
pub fn read_preds<R: Read>(input: R) -> Result<Vec<PredictionRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let required = &PREDS_HEADER[..7];
    let missing: Vec<String> = required
        .iter()
        .filter(|c| col(c).is_none())
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema { missing });
    }
    let idx: Vec<usize> = required.iter().map(|c| col(c).unwrap()).collect();
    let var_col = col("pred_var");
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let cell = |i: usize| rec.get(idx[i]).unwrap_or("");
        let float = |i: usize, name: &str| -> Result<f64> {
            cell(i).parse().map_err(|_| Error::parse(name, cell(i)))
        };
        let start = parse_iso(cell(2))?;
        let month: u32 = cell(3)
            .parse()
            .map_err(|_| Error::parse("month", cell(3)))?;
        if month != start.month() {
            return Err(Error::parse(
                "month",
                format!("{month} disagrees with {}", cell(2)),
            ));
        }
        let pred_var = match var_col.and_then(|i| rec.get(i)).unwrap_or("") {
            "" => None,
            v => Some(v.parse().map_err(|_| Error::parse("pred_var", v))?),
        };
        out.push(PredictionRecord {
            key: TripKey {
                veh_id: cell(0).to_string(),
                trip_id: cell(1).to_string(),
            },
            start,
            month,
            task: TaskId::parse_key(cell(4))?,
            target: float(5, "target")?,
            pred_mean: float(6, "pred_mean")?,
            pred_var,
        });
    }
    Ok(out)
}
