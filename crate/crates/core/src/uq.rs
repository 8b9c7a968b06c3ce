//! Linearized posterior predictive distribution.
//!
//! Linearizing the simulated outputs around `theta_map` gives a Gaussian
//! predictive distribution with covariance `J P J^T + I / beta`, where `J` stacks
//! the output gradients on the new input and `P = H^-1`. Only its diagonal is
//! computed, one triangular solve per step.

use alloc::vec::Vec;
// Inherent float methods shadow this trait whenever std is linked in.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::laplace::{posterior_quadform, LaplacePosterior};
use crate::model::{SensitivityState, SequenceModel};

/// Credible intervals at +-3 standard deviations.
pub const DEFAULT_MULTIPLIER: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct UncertainPrediction {
    pub y_mean: Vec<f64>,
    pub var_epistemic: Vec<f64>,
    pub var_total: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Surprise index in percent, `None` when the nominal output is all zero.
    pub surprise: Option<f64>,
    pub multiplier: f64,
}

impl UncertainPrediction {
    pub fn len(&self) -> usize {
        self.y_mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_mean.is_empty()
    }

    pub fn std_epistemic(&self) -> impl Iterator<Item = f64> + '_ {
        self.var_epistemic.iter().map(|v| v.sqrt())
    }

    pub fn std_total(&self) -> impl Iterator<Item = f64> + '_ {
        self.var_total.iter().map(|v| v.sqrt())
    }
}

/// Mean, epistemic/total variance and `+-multiplier * std` intervals for a
/// new input sequence, simulated from the zero state.
pub fn predict_with_uncertainty<M: SequenceModel + ?Sized>(
    model: &M,
    post: &LaplacePosterior,
    u_star: &[f64],
    multiplier: f64,
) -> Result<UncertainPrediction> {
    if model.n_params() != post.n_params() {
        return Err(Error::PosteriorMismatch(alloc::format!(
            "model has {} parameters, posterior {}",
            model.n_params(),
            post.n_params()
        )));
    }
    if model.theta()[..] != post.theta_map[..] {
        return Err(Error::PosteriorMismatch(
            "model parameters differ from the posterior mode".into(),
        ));
    }
    if let Some(k) = u_star.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(k));
    }
    let n = model.sequence_len(u_star)?;
    let noise_var = post.noise_variance();
    let mut y_mean = Vec::with_capacity(n);
    let mut var_epistemic = Vec::with_capacity(n);
    let x0 = alloc::vec![0.0; model.n_states()];
    let s0 = SensitivityState::zeros(model.n_states(), model.n_params());
    model.propagate_sensitivities(u_star, &x0, &s0, &mut |_, y, g| {
        y_mean.push(y);
        var_epistemic.push(posterior_quadform(post, g));
    })?;
    let var_total: Vec<f64> = var_epistemic.iter().map(|v| v + noise_var).collect();
    let (lo, hi): (Vec<f64>, Vec<f64>) = y_mean
        .iter()
        .zip(&var_total)
        .map(|(m, v)| {
            let half = multiplier * v.sqrt();
            (m - half, m + half)
        })
        .unzip();
    let mut pred = UncertainPrediction {
        y_mean,
        var_epistemic,
        var_total,
        lo,
        hi,
        surprise: None,
        multiplier,
    };
    pred.surprise = surprise_index(&pred).ok();
    Ok(pred)
}

/// `100 * sum_k sqrt(var_epistemic[k]) / sum_k |y_mean[k]|`, in percent. Needs no
/// measured output.
pub fn surprise_index(pred: &UncertainPrediction) -> Result<f64> {
    if pred.y_mean.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let denom: f64 = pred.y_mean.iter().map(|y| y.abs()).sum();
    if denom == 0.0 {
        return Err(Error::ZeroNominalEnergy);
    }
    let num: f64 = pred.var_epistemic.iter().map(|v| v.sqrt()).sum();
    Ok(100.0 * num / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplace::gn_precision;
    use crate::linalg::SymPacked;
    use crate::linear::StaticLinearModel;
    use crate::model::ParamVector;
    use alloc::vec;

    fn constant_prediction(c: f64, v: f64, n: usize) -> UncertainPrediction {
        UncertainPrediction {
            y_mean: vec![c; n],
            var_epistemic: vec![v; n],
            var_total: vec![v + 1.0; n],
            lo: vec![c - 1.0; n],
            hi: vec![c + 1.0; n],
            surprise: None,
            multiplier: 3.0,
        }
    }

    #[test]
    fn surprise_of_constant_sequences() {
        assert_eq!(surprise_index(&constant_prediction(2.0, 0.0, 5)).unwrap(), 0.0);
        let s = surprise_index(&constant_prediction(-2.0, 0.09, 5)).unwrap();
        assert!((s - 100.0 * 0.3 / 2.0).abs() < 1e-12);
        assert_eq!(
            surprise_index(&constant_prediction(0.0, 1.0, 5)),
            Err(Error::ZeroNominalEnergy)
        );
    }

    #[test]
    fn linear_predictive_variance() {
        let u = [1.0, -0.5, 2.0, 0.3, -1.2];
        let m = StaticLinearModel::new(vec![0.8]);
        let (tau, beta) = (0.2, 50.0);
        let post = gn_precision(&m, &u, tau, beta, 0).unwrap();
        let u_star = [0.4, -3.0, 1.5];
        let pred = predict_with_uncertainty(&m, &post, &u_star, 3.0).unwrap();
        let h = tau + beta * u.iter().map(|v| v * v).sum::<f64>();
        for (k, &us) in u_star.iter().enumerate() {
            let expected = us * us / h;
            assert!((pred.var_epistemic[k] - expected).abs() <= 1e-12 * expected);
            assert_eq!(pred.var_total[k] - pred.var_epistemic[k], 1.0 / beta);
            assert!(pred.lo[k] <= pred.y_mean[k] && pred.y_mean[k] <= pred.hi[k]);
        }
    }

    #[test]
    fn huge_precision_leaves_only_noise() {
        let m = StaticLinearModel::new(vec![1.0]);
        let mut h = SymPacked::zeros(1);
        h.add_diagonal(1e30);
        let post = LaplacePosterior::from_precision(ParamVector::from(vec![1.0]), 1e30, 4.0, h).unwrap();
        let pred = predict_with_uncertainty(&m, &post, &[1.0, 2.0], 3.0).unwrap();
        assert!(pred.var_epistemic.iter().all(|&v| v < 1e-29));
        assert!(pred.var_total.iter().all(|&v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn mismatch_is_rejected() {
        let m = StaticLinearModel::new(vec![1.0, 2.0]);
        let post = gn_precision(&StaticLinearModel::new(vec![1.0]), &[1.0], 1.0, 1.0, 0).unwrap();
        assert!(matches!(
            predict_with_uncertainty(&m, &post, &[1.0, 1.0], 3.0),
            Err(Error::PosteriorMismatch(_))
        ));
        let other = StaticLinearModel::new(vec![3.0]);
        assert!(matches!(
            predict_with_uncertainty(&other, &post, &[1.0], 3.0),
            Err(Error::PosteriorMismatch(_))
        ));
    }

    #[test]
    fn surprise_is_scale_invariant_for_linear_model() {
        let m = StaticLinearModel::new(vec![0.8]);
        let post = gn_precision(&m, &[1.0, 2.0, -1.0], 0.5, 10.0, 0).unwrap();
        let u = [0.3, -0.7, 1.1];
        let u2: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
        let s1 = predict_with_uncertainty(&m, &post, &u, 3.0).unwrap().surprise.unwrap();
        let s2 = predict_with_uncertainty(&m, &post, &u2, 3.0).unwrap().surprise.unwrap();
        assert!((s1 - s2).abs() <= 1e-12 * s1);
    }
}
