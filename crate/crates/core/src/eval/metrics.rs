use crate::error::{Error, Result};

/// Count-regression error summary over `n` images.
///
/// Relative metrics are `None` when any ground truth is `<= 0`. `%MAE` and
/// `%RMSE` are means of per-image relative errors; `%RMAE` is
/// `100 * MAE * N / Σ y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub n: usize,
    pub mae: f64,
    pub rmse: f64,
    pub pct_mae: Option<f64>,
    pub pct_rmse: Option<f64>,
    pub pct_rmae: Option<f64>,
}

impl MetricsReport {
    /// `(%MAE, %RMSE, %RMAE)`, or an error when ground truths were not all positive.
    pub fn relative(&self) -> Result<(f64, f64, f64)> {
        match (self.pct_mae, self.pct_rmse, self.pct_rmae) {
            (Some(a), Some(b), Some(c)) => Ok((a, b, c)),
            _ => Err(Error::Contract(
                "relative metrics are undefined when a ground-truth count is <= 0".into(),
            )),
        }
    }
}

pub fn compute_metrics(preds: &[f64], gts: &[f64]) -> Result<MetricsReport> {
    if preds.len() != gts.len() {
        return Err(Error::dim(format!(
            "{} predictions for {} ground truths",
            preds.len(),
            gts.len()
        )));
    }
    let errors: Vec<f64> = preds.iter().zip(gts).map(|(p, y)| p - y).collect();
    metrics_from_errors(&errors, gts)
}

/// Metrics from per-image errors (only magnitudes matter). Used directly for
/// patch-summed errors, where an image's error is the sum of absolute tile
/// errors rather than the error of one prediction.
pub fn metrics_from_errors(errors: &[f64], gts: &[f64]) -> Result<MetricsReport> {
    if errors.len() != gts.len() {
        return Err(Error::dim(format!("{} errors for {} ground truths", errors.len(), gts.len())));
    }
    if errors.is_empty() {
        return Err(Error::Contract("metrics need at least one image".into()));
    }
    if errors.iter().chain(gts).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite prediction or ground truth".into()));
    }
    let n = errors.len() as f64;
    let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let relative_ok = gts.iter().all(|&y| y > 0.0);
    let (pct_mae, pct_rmse, pct_rmae) = if relative_ok {
        let rel: Vec<f64> = errors.iter().zip(gts).map(|(e, y)| e.abs() / y).collect();
        let pct_mae = 100.0 * rel.iter().sum::<f64>() / n;
        let pct_rmse = 100.0 * (rel.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
        let pct_rmae = 100.0 * mae * n / gts.iter().sum::<f64>();
        (Some(pct_mae), Some(pct_rmse), Some(pct_rmae))
    } else {
        (None, None, None)
    };
    Ok(MetricsReport {
        n: errors.len(),
        mae,
        rmse,
        pct_mae,
        pct_rmse,
        pct_rmae,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let m = compute_metrics(&[3.0, 7.0], &[3.0, 7.0]).unwrap();
        assert_eq!((m.mae, m.rmse), (0.0, 0.0));
        assert_eq!(m.relative().unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn two_image_example() {
        let m = compute_metrics(&[12.0, 16.0], &[10.0, 20.0]).unwrap();
        assert_eq!(m.mae, 3.0);
        assert_eq!(m.rmse, 10f64.sqrt());
        let (a, b, c) = m.relative().unwrap();
        assert!((a - 20.0).abs() < 1e-12);
        assert!((b - 20.0).abs() < 1e-12);
        assert!((c - 20.0).abs() < 1e-12);
    }

    #[test]
    fn single_image_example() {
        let m = compute_metrics(&[90.0], &[100.0]).unwrap();
        assert_eq!((m.mae, m.rmse), (10.0, 10.0));
        let (a, b, c) = m.relative().unwrap();
        assert!((a - 10.0).abs() < 1e-12 && (b - 10.0).abs() < 1e-12 && (c - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_ground_truth_flags_relative() {
        let m = compute_metrics(&[1.0, 2.0], &[0.0, 2.0]).unwrap();
        assert_eq!(m.mae, 0.5);
        assert!(m.pct_mae.is_none());
        assert!(m.relative().is_err());
    }

    #[test]
    fn errors() {
        assert!(matches!(compute_metrics(&[1.0], &[1.0, 2.0]), Err(Error::Dimension(_))));
        assert!(compute_metrics(&[], &[]).is_err());
    }
}
