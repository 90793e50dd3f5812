use crate::error::{Error, Result};

/// Per-feature z-scoring fitted on training rows. Constant columns are
/// dropped and their names kept in `dropped`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    /// Full input feature order the standardizer expects.
    pub input_names: Vec<String>,
    /// Indices into `input_names` of retained columns.
    pub kept: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub dropped: Vec<String>,
}

impl Standardizer {
    pub fn fit(names: &[String], rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InsufficientData(
                "cannot standardize an empty training set".into(),
            ));
        }
        let d = names.len();
        let n = rows.len() as f64;
        let mut out = Standardizer {
            input_names: names.to_vec(),
            kept: Vec::new(),
            mean: Vec::new(),
            std: Vec::new(),
            dropped: Vec::new(),
        };
        for j in 0..d {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            if std > 1e-12 * mean.abs().max(1.0) {
                out.kept.push(j);
                out.mean.push(mean);
                out.std.push(std);
            } else {
                out.dropped.push(names[j].clone());
            }
        }
        Ok(out)
    }

    pub fn output_names(&self) -> Vec<String> {
        self.kept
            .iter()
            .map(|&j| self.input_names[j].clone())
            .collect()
    }

    pub fn output_dim(&self) -> usize {
        self.kept.len()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        self.kept
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&j, (m, s))| (row[j] - m) / s)
            .collect()
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn hand_computed_column() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
        let s = Standardizer::fit(&names(1), &rows).unwrap();
        assert_eq!(s.mean, vec![2.0]);
        assert!((s.std[0] - 0.816496580927726).abs() < 1e-12);
        assert_eq!(s.apply(&[2.0]), vec![0.0]);
    }

    #[test]
    fn training_set_is_unit_scaled() {
        let rows: Vec<Vec<f64>> = (0..37)
            .map(|i| vec![i as f64 * 0.3 - 2.0, (i as f64).sin() * 10.0])
            .collect();
        let s = Standardizer::fit(&names(2), &rows).unwrap();
        let z = s.apply_all(&rows);
        for j in 0..2 {
            let mean = z.iter().map(|r| r[j]).sum::<f64>() / z.len() as f64;
            let var = z.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / z.len() as f64;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_column_dropped() {
        let rows = vec![vec![1.0, 5.0], vec![2.0, 5.0]];
        let s = Standardizer::fit(&names(2), &rows).unwrap();
        assert_eq!(s.dropped, vec!["f1".to_string()]);
        assert_eq!(s.output_names(), vec!["f0".to_string()]);
        assert_eq!(s.apply(&[1.5, 5.0]).len(), 1);
    }
}
