use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use super::{
    coverage, monthly_report, r2, rmse, wilcoxon_one_tailed, MonthlyReport, WilcoxonResult,
};
use crate::ensemble::PredictionRecord;
use crate::error::{Error, Result};
use crate::features::TaskId;
use crate::ved::TripKey;

pub const REPORT_NOTE: &str =
    "rmse_mean and rmse_std are taken across the monthly RMSE values (population std); \
NLL values drop the additive log(2*pi)/2 constant; Wilcoxon pairs are per-trip absolute errors, \
one-tailed towards the reference model having smaller errors";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedTest {
    pub versus: String,
    pub result: Option<WilcoxonResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelScores {
    pub model: String,
    pub rmse: f64,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    pub r2: Option<f64>,
    pub coverage_95: Option<f64>,
    pub monthly: MonthlyReport,
    /// only filled for the reference model
    pub wilcoxon: Vec<PairedTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskReport {
    pub task: String,
    pub vehicle_type: String,
    pub energy: String,
    pub n_test: usize,
    pub models: Vec<ModelScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub note: String,
    pub tasks: Vec<TaskReport>,
}

impl EvalReport {
    pub fn new(tasks: Vec<TaskReport>) -> Self {
        EvalReport {
            note: REPORT_NOTE.to_string(),
            tasks,
        }
    }
}

fn abs_errors(records: &[&PredictionRecord]) -> Vec<f64> {
    records
        .iter()
        .map(|r| (r.pred_mean - r.target).abs())
        .collect()
}

/// Scores every model on one task. All models must cover the same trips;
/// `reference` is tested against each of the others.
pub fn evaluate_task(
    task: TaskId,
    models: &[(String, Vec<PredictionRecord>)],
    reference: &str,
) -> Result<TaskReport> {
    let by_key: Vec<BTreeMap<&TripKey, &PredictionRecord>> = models
        .iter()
        .map(|(_, recs)| recs.iter().map(|r| (&r.key, r)).collect())
        .collect();
    let ref_idx = models
        .iter()
        .position(|(n, _)| n == reference)
        .ok_or_else(|| {
            Error::InvalidInput(format!("reference model {reference} not among predictions"))
        })?;
    let keys: BTreeSet<&TripKey> = by_key[ref_idx].keys().copied().collect();
    for ((name, recs), map) in models.iter().zip(&by_key) {
        let other: BTreeSet<&TripKey> = map.keys().copied().collect();
        if other != keys || map.len() != recs.len() {
            return Err(Error::Alignment(format!(
                "{name} covers {} trips, {reference} covers {}; {} differ",
                map.len(),
                keys.len(),
                other.symmetric_difference(&keys).count()
            )));
        }
        if let Some(r) = recs.iter().find(|r| r.task != task) {
            return Err(Error::Alignment(format!(
                "{name} has a {} row in the {task} report",
                r.task
            )));
        }
    }
    if keys.is_empty() {
        return Err(Error::InsufficientData(format!("no test trips for {task}")));
    }

    // rows in one shared order so paired errors line up
    let aligned: Vec<Vec<&PredictionRecord>> = by_key
        .iter()
        .map(|m| keys.iter().map(|k| m[*k]).collect())
        .collect();
    let mut scores = Vec::with_capacity(models.len());
    for ((name, recs), rows) in models.iter().zip(&aligned) {
        let preds: Vec<f64> = rows.iter().map(|r| r.pred_mean).collect();
        let targets: Vec<f64> = rows.iter().map(|r| r.target).collect();
        let vars: Option<Vec<f64>> = rows.iter().map(|r| r.pred_var).collect();
        let monthly = monthly_report(recs)?;
        scores.push(ModelScores {
            model: name.clone(),
            rmse: rmse(&preds, &targets)?,
            rmse_mean: monthly.rmse_mean,
            rmse_std: monthly.rmse_std,
            r2: r2(&preds, &targets)?,
            coverage_95: vars
                .map(|v| coverage(&preds, &v, &targets, 0.95))
                .transpose()?,
            monthly,
            wilcoxon: Vec::new(),
        });
    }
    let ref_errors = abs_errors(&aligned[ref_idx]);
    for (i, (name, _)) in models.iter().enumerate() {
        if i == ref_idx {
            continue;
        }
        let test = match wilcoxon_one_tailed(&ref_errors, &abs_errors(&aligned[i])) {
            Ok(r) => PairedTest {
                versus: name.clone(),
                result: Some(r),
                note: None,
            },
            Err(Error::IdenticalErrors) => PairedTest {
                versus: name.clone(),
                result: None,
                note: Some("models identical on this set".into()),
            },
            Err(e) => return Err(e),
        };
        scores[ref_idx].wilcoxon.push(test);
    }
    Ok(TaskReport {
        task: task.key(),
        vehicle_type: task.vehicle_type.to_string(),
        energy: task.energy.to_string(),
        n_test: keys.len(),
        models: scores,
    })
}

/// Flat table: one block per metric, rows are models and columns tasks.
pub fn render_report_csv(report: &EvalReport) -> String {
    let tasks: Vec<&TaskReport> = report.tasks.iter().collect();
    let mut model_names: Vec<&str> = Vec::new();
    for t in &tasks {
        for m in &t.models {
            if !model_names.contains(&m.model.as_str()) {
                model_names.push(&m.model);
            }
        }
    }
    let find = |t: &TaskReport, name: &str| t.models.iter().find(|m| m.model == name).cloned();
    let mut out = String::new();
    let header: Vec<String> = tasks.iter().map(|t| t.task.clone()).collect();
    let _ = writeln!(out, "metric,model,{}", header.join(","));
    let mut block = |metric: &str, cell: &dyn Fn(&ModelScores) -> String| {
        for name in &model_names {
            let cells: Vec<String> = tasks
                .iter()
                .map(|t| find(t, name).map(|m| cell(&m)).unwrap_or_default())
                .collect();
            let _ = writeln!(out, "{metric},{name},{}", cells.join(","));
        }
    };
    block("rmse_mean_std", &|m| {
        format!("{:.4} ± {:.4}", m.rmse_mean, m.rmse_std)
    });
    block("rmse_overall", &|m| format!("{:.4}", m.rmse));
    block("r2", &|m| {
        m.r2.map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "n/a".into())
    });
    block("coverage_95", &|m| {
        m.coverage_95.map(|v| format!("{v:.4}")).unwrap_or_default()
    });
    let mut pairs: Vec<(String, String)> = Vec::new();
    for t in &tasks {
        for m in &t.models {
            for w in &m.wilcoxon {
                let pair = (m.model.clone(), w.versus.clone());
                if !pairs.contains(&pair) {
                    pairs.push(pair);
                }
            }
        }
    }
    for (a, b) in pairs {
        let cells: Vec<String> = tasks
            .iter()
            .map(|t| {
                find(t, &a)
                    .and_then(|m| m.wilcoxon.iter().find(|w| w.versus == b).cloned())
                    .map(|w| match w.result {
                        Some(r) => format!("{:.4}", r.p_value),
                        None => "identical".into(),
                    })
                    .unwrap_or_default()
            })
            .collect();
        let _ = writeln!(out, "wilcoxon_p,{a} < {b},{}", cells.join(","));
    }
    out
}
