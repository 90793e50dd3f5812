//! Regression metrics, interval coverage, per-month summaries and the
//! paired significance test used to compare models.

mod report;
mod wilcoxon;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

pub use report::{evaluate_task, render_report_csv, EvalReport, ModelScores, TaskReport};
pub use wilcoxon::{
    doubled_ranks, exact_upper_tail, normal_upper_tail, wilcoxon_one_tailed, wilcoxon_with,
    WilcoxonMethod, WilcoxonResult, EXACT_MAX_N,
};

use crate::ensemble::PredictionRecord;
use crate::error::{Error, Result};

fn check_pair(preds: &[f64], targets: &[f64]) -> Result<()> {
    if preds.len() != targets.len() {
        return Err(Error::Alignment(format!(
            "{} predictions for {} targets",
            preds.len(),
            targets.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::InsufficientData("no predictions to score".into()));
    }
    Ok(())
}

pub fn rmse(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check_pair(preds, targets)?;
    let sse: f64 = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).powi(2))
        .sum();
    Ok((sse / preds.len() as f64).sqrt())
}

/// Coefficient of determination; `None` when the targets have no variance.
pub fn r2(preds: &[f64], targets: &[f64]) -> Result<Option<f64>> {
    check_pair(preds, targets)?;
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let sst: f64 = targets.iter().map(|t| (t - mean).powi(2)).sum();
    if sst == 0.0 {
        return Ok(None);
    }
    let sse: f64 = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).powi(2))
        .sum();
    Ok(Some(1.0 - sse / sst))
}

/// Two-sided standard-normal quantile for a central interval.
pub fn z_for_level(level: f64) -> f64 {
    Normal::standard().inverse_cdf((1.0 + level) / 2.0)
}

/// Fraction of targets inside `mean ± z(level)·sd`.
pub fn coverage(means: &[f64], vars: &[f64], targets: &[f64], level: f64) -> Result<f64> {
    check_pair(means, targets)?;
    check_pair(vars, targets)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!(
            "coverage level must be in (0,1), got {level}"
        )));
    }
    let z = z_for_level(level);
    let inside = means
        .iter()
        .zip(vars)
        .zip(targets)
        .filter(|((m, v), t)| (*t - *m).abs() <= z * v.sqrt())
        .count();
    Ok(inside as f64 / targets.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthStats {
    pub month: u32,
    pub n: usize,
    pub mean_target: f64,
    pub mean_pred: f64,
    /// mean predicted variance; absent for models without one
    pub mean_var: Option<f64>,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthlyReport {
    pub months: Vec<MonthStats>,
    /// mean and population std of the monthly RMSE values
    pub rmse_mean: f64,
    pub rmse_std: f64,
    pub missing_months: Vec<u32>,
}

pub fn monthly_report(records: &[PredictionRecord]) -> Result<MonthlyReport> {
    if records.is_empty() {
        return Err(Error::InsufficientData(
            "no predictions for a monthly report".into(),
        ));
    }
    let mut months = Vec::new();
    let mut missing_months = Vec::new();
    for month in 1..=12 {
        let rows: Vec<&PredictionRecord> = records.iter().filter(|r| r.month == month).collect();
        if rows.is_empty() {
            missing_months.push(month);
            continue;
        }
        let n = rows.len() as f64;
        let preds: Vec<f64> = rows.iter().map(|r| r.pred_mean).collect();
        let targets: Vec<f64> = rows.iter().map(|r| r.target).collect();
        let mean_var = rows
            .iter()
            .map(|r| r.pred_var)
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.iter().sum::<f64>() / n);
        months.push(MonthStats {
            month,
            n: rows.len(),
            mean_target: targets.iter().sum::<f64>() / n,
            mean_pred: preds.iter().sum::<f64>() / n,
            mean_var,
            rmse: rmse(&preds, &targets)?,
        });
    }
    let k = months.len() as f64;
    let rmse_mean = months.iter().map(|m| m.rmse).sum::<f64>() / k;
    let rmse_std = (months
        .iter()
        .map(|m| (m.rmse - rmse_mean).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    Ok(MonthlyReport {
        months,
        rmse_mean,
        rmse_std,
        missing_months,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::parse_iso;
    use crate::features::TaskId;
    use crate::ved::TripKey;

    fn rec(month: u32, target: f64, pred: f64) -> PredictionRecord {
        PredictionRecord {
            key: TripKey {
                veh_id: "1".into(),
                trip_id: format!("{month}-{target}"),
            },
            start: parse_iso(&format!("2018-{month:02}-01T00:00:00.000")).unwrap(),
            month,
            task: TaskId::ALL[0],
            target,
            pred_mean: pred,
            pred_var: Some(1.0),
        }
    }

    #[test]
    fn rmse_values() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.5355339059327378).abs() < 1e-12);
        assert!(matches!(
            rmse(&[1.0], &[1.0, 2.0]),
            Err(Error::Alignment(_))
        ));
        let shifted = rmse(&[10.0, 10.0], &[13.0, 14.0]).unwrap();
        assert!((shifted - 3.5355339059327378).abs() < 1e-12);
    }

    #[test]
    fn r2_values() {
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), Some(1.0));
        assert_eq!(r2(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), Some(0.0));
        assert_eq!(r2(&[1.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), Some(0.5));
        assert_eq!(r2(&[1.0, 2.0], &[5.0, 5.0]).unwrap(), None);
    }

    #[test]
    fn coverage_limits() {
        assert!((z_for_level(0.95) - 1.959963984540054).abs() < 1e-9);
        let t = [1.0, 5.0, -3.0];
        assert_eq!(coverage(&[0.0; 3], &[1e12; 3], &t, 0.95).unwrap(), 1.0);
        assert_eq!(coverage(&[0.0; 3], &[1e-6; 3], &t, 0.95).unwrap(), 0.0);
    }

    #[test]
    fn monthly_hand_values() {
        let single = monthly_report(&[rec(3, 1.0, 2.0), rec(3, 1.0, 0.0)]).unwrap();
        assert_eq!(single.rmse_std, 0.0);
        assert_eq!(single.missing_months.len(), 11);
        let two = monthly_report(&[rec(1, 0.0, 2.0), rec(2, 0.0, 4.0)]).unwrap();
        assert_eq!(two.rmse_mean, 3.0);
        assert_eq!(two.rmse_std, 1.0);
        assert!(two.missing_months.contains(&7));
        assert_eq!(two.months[0].mean_var, Some(1.0));
    }
}
