//! Evaluation statistics for simulated predictions.

use alloc::string::String;
// Inherent float methods shadow this trait whenever std is linked in.
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of the evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub signal_id: String,
    pub fit: f64,
    pub coverage: f64,
    pub surprise: f64,
    pub rmse: f64,
    pub n_steps: usize,
}

fn check_len(a: usize, b: usize, what: &'static str) -> Result<()> {
    if a != b {
        return Err(Error::Dimension {
            what,
            expected: a,
            got: b,
        });
    }
    Ok(())
}

/// `100 * (1 - ||y - yhat|| / ||y - mean(y)||)` in percent.
pub fn fit_index(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_len(y_true.len(), y_pred.len(), "prediction")?;
    if y_true.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: y_true.len(),
        });
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let den: f64 = y_true.iter().map(|y| (y - mean) * (y - mean)).sum();
    if den == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let num: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(100.0 * (1.0 - (num / den).sqrt()))
}

/// Percentage of steps with `lo[k] <= y[k] <= hi[k]` (bounds inclusive).
pub fn coverage(y_true: &[f64], lo: &[f64], hi: &[f64]) -> Result<f64> {
    check_len(y_true.len(), lo.len(), "lower bound")?;
    check_len(y_true.len(), hi.len(), "upper bound")?;
    if y_true.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let inside = y_true
        .iter()
        .zip(lo.iter().zip(hi))
        .filter(|(y, (l, h))| *l <= *y && *y <= *h)
        .count();
    Ok(100.0 * inside as f64 / y_true.len() as f64)
}

pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_len(y_true.len(), y_pred.len(), "prediction")?;
    if y_true.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let sse: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sse / y_true.len() as f64).sqrt())
}

/// Drops the first `skip` samples (transient exclusion).
pub fn after_transient(x: &[f64], skip: usize) -> &[f64] {
    &x[skip.min(x.len())..]
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn fit_identities() {
        let y = [1.0, 3.0, -2.0, 0.5];
        assert_eq!(fit_index(&y, &y).unwrap(), 100.0);
        let mean = y.iter().sum::<f64>() / 4.0;
        assert!(fit_index(&y, &[mean; 4]).unwrap().abs() < 1e-12);
        assert_eq!(fit_index(&[2.0; 3], &[1.0; 3]), Err(Error::ZeroVariance));
        assert!(fit_index(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn fit_scale_invariance() {
        let y = [1.0, 3.0, -2.0, 0.5];
        let p = [0.9, 2.5, -1.0, 0.7];
        let a = fit_index(&y, &p).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| -3.0 * v).collect();
        let ps: Vec<f64> = p.iter().map(|v| -3.0 * v).collect();
        assert!((fit_index(&ys, &ps).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn coverage_cases() {
        let y = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(coverage(&y, &[-1e300; 4], &[1e300; 4]).unwrap(), 100.0);
        assert_eq!(coverage(&y, &y, &y).unwrap(), 100.0);
        assert_eq!(coverage(&y, &[0.5; 4], &[2.5; 4]).unwrap(), 50.0);
        assert!(coverage(&y, &[0.0; 3], &[0.0; 4]).is_err());
    }

    #[test]
    fn rmse_value() {
        assert_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), (12.5f64).sqrt());
        assert_eq!(after_transient(&[1.0, 2.0, 3.0], 2), &[3.0]);
        assert!(after_transient(&vec![1.0; 2], 5).is_empty());
    }
}
