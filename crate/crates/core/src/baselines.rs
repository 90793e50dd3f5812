//! Comparison models: least-squares linear regression and a single network
//! trained exactly like one ensemble member.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::ensemble::{sort_chronological, EnsembleModel, PredictionRecord, TrainConfig, TrainLog};
use crate::error::{Error, Result};
use crate::features::{FeatureTable, Standardizer, TaskId};

pub const DEFAULT_RIDGE: f64 = 1e-8;

/// `y = w·x + b` in whatever feature space it was fitted in.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.intercept
    }
}

/// Solves the normal equations with `ridge_eps` added to the weight block of
/// the diagonal (never to the intercept).
pub fn fit_linear(xs: &[Vec<f64>], ys: &[f64], ridge_eps: f64) -> Result<LinearModel> {
    let n = xs.len();
    let d = xs.first().map_or(0, Vec::len);
    if n == 0 || n != ys.len() {
        return Err(Error::InsufficientData(format!(
            "{n} rows for {} targets",
            ys.len()
        )));
    }
    if n < d {
        return Err(Error::InsufficientData(format!(
            "{n} samples for {d} features; supply more data or a larger ridge_eps"
        )));
    }
    let a = DMatrix::from_fn(n, d + 1, |i, j| if j < d { xs[i][j] } else { 1.0 });
    let y = DVector::from_column_slice(ys);
    let mut gram = a.transpose() * &a;
    for j in 0..d {
        gram[(j, j)] += ridge_eps;
    }
    let rhs = a.transpose() * y;
    let beta = gram
        .cholesky()
        .ok_or_else(|| {
            Error::InsufficientData(
                "normal equations are singular; supply more data or a larger ridge_eps".into(),
            )
        })?
        .solve(&rhs);
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidInput("non-finite linear coefficients".into()));
    }
    Ok(LinearModel {
        weights: beta.as_slice()[..d].to_vec(),
        intercept: beta[d],
    })
}

/// Linear regression on standardized features, ready to score a table.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBaseline {
    pub standardizer: Standardizer,
    pub model: LinearModel,
}

impl LinearBaseline {
    pub fn fit(table: &FeatureTable, ridge_eps: f64) -> Result<Self> {
        let xs = table.features();
        let standardizer = Standardizer::fit(&table.names, &xs)?;
        let model = fit_linear(&standardizer.apply_all(&xs), &table.targets(), ridge_eps)?;
        Ok(LinearBaseline {
            standardizer,
            model,
        })
    }

    pub fn predict(&self, table: &FeatureTable) -> Result<Vec<PredictionRecord>> {
        if table.names != self.standardizer.input_names {
            return Err(Error::Alignment(
                "feature names differ from the fitted linear model".into(),
            ));
        }
        let mut out: Vec<PredictionRecord> = table
            .rows
            .iter()
            .map(|r| PredictionRecord {
                key: r.key.clone(),
                start: r.start,
                month: r.month,
                task: r.task,
                target: r.target,
                pred_mean: self.model.predict(&self.standardizer.apply(&r.features)),
                pred_var: None,
            })
            .collect();
        sort_chronological(&mut out);
        Ok(out)
    }

    /// Key=value text, every float in shortest round-trip form.
    pub fn render(&self) -> String {
        let floats = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let st = &self.standardizer;
        let mut s = String::new();
        let _ = writeln!(s, "format={LINEAR_FORMAT}");
        let _ = writeln!(s, "features={}", st.input_names.join(","));
        let _ = writeln!(
            s,
            "kept={}",
            st.kept
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(",")
        );
        let _ = writeln!(s, "mean={}", floats(&st.mean));
        let _ = writeln!(s, "std={}", floats(&st.std));
        let _ = writeln!(s, "weights={}", floats(&self.model.weights));
        let _ = writeln!(s, "intercept={}", self.model.intercept);
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let fields: BTreeMap<&str, &str> = text.lines().filter_map(|l| l.split_once('=')).collect();
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::ModelFormat(format!("linear model lacks {k}")))
        };
        fn list<T: std::str::FromStr>(k: &str, v: &str) -> Result<Vec<T>> {
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',')
                .map(|x| {
                    x.parse()
                        .map_err(|_| Error::ModelFormat(format!("bad {k} value {x:?}")))
                })
                .collect()
        }
        if get("format")? != LINEAR_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unsupported linear model format {:?}",
                get("format")?
            )));
        }
        let input_names: Vec<String> = list("features", get("features")?)?;
        let kept: Vec<usize> = list("kept", get("kept")?)?;
        let mean: Vec<f64> = list("mean", get("mean")?)?;
        let std: Vec<f64> = list("std", get("std")?)?;
        let weights: Vec<f64> = list("weights", get("weights")?)?;
        let intercept: f64 = get("intercept")?
            .parse()
            .map_err(|_| Error::ModelFormat("bad intercept".into()))?;
        let consistent = kept.len() == mean.len()
            && kept.len() == std.len()
            && kept.len() == weights.len()
            && kept.iter().all(|&j| j < input_names.len());
        if !consistent {
            return Err(Error::ModelFormat(
                "inconsistent linear model fields".into(),
            ));
        }
        let dropped = (0..input_names.len())
            .filter(|j| !kept.contains(j))
            .map(|j| input_names[j].clone())
            .collect();
        Ok(LinearBaseline {
            standardizer: Standardizer {
                input_names,
                kept,
                mean,
                std,
                dropped,
            },
            model: LinearModel { weights, intercept },
        })
    }
}

const LINEAR_FORMAT: &str = "effiq-linear-1";

/// A single network with every setting of an ensemble member.
pub fn single_nn(
    names: &[String],
    xs: &[Vec<f64>],
    ys: &[f64],
    task: Option<TaskId>,
    config: &TrainConfig,
) -> Result<(EnsembleModel, TrainLog)> {
    let cfg = TrainConfig {
        members: 1,
        ..config.clone()
    };
    EnsembleModel::fit(names, xs, ys, task, &cfg)
}

pub fn single_nn_table(
    table: &FeatureTable,
    config: &TrainConfig,
) -> Result<(EnsembleModel, TrainLog)> {
    single_nn(
        &table.names,
        &table.features(),
        &table.targets(),
        table.rows.first().map(|r| r.task),
        config,
    )
}
