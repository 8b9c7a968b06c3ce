//! Static linear-in-parameters model `y[k] = theta . u[k]`.
//!
//! It has no state and constant output gradients `d y[k]/d theta = u[k]`, so the
//! Laplace posterior and the predictive variance reduce to Bayesian linear
//! regression. Used as a closed-form reference for the rest of the crate.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::model::{ParamVector, SensitivityState, SequenceModel, SimOutput};

#[derive(Debug, Clone, PartialEq)]
pub struct StaticLinearModel {
    theta: ParamVector,
}

impl StaticLinearModel {
    pub fn new(theta: Vec<f64>) -> Self {
        assert!(!theta.is_empty(), "at least one regressor");
        Self {
            theta: theta.into(),
        }
    }
}

impl SequenceModel for StaticLinearModel {
    fn n_inputs(&self) -> usize {
        self.theta.len()
    }

    fn n_states(&self) -> usize {
        0
    }

    fn theta(&self) -> &ParamVector {
        &self.theta
    }

    fn set_theta(&mut self, theta: &[f64]) {
        assert_eq!(theta.len(), self.theta.len(), "parameter vector length");
        self.theta.copy_from_slice(theta);
    }

    fn simulate_from(&self, u: &[f64], x0: &[f64]) -> Result<SimOutput> {
        let n = self.sequence_len(u)?;
        if !x0.is_empty() {
            return Err(Error::Dimension {
                what: "initial state",
                expected: 0,
                got: x0.len(),
            });
        }
        let p = self.theta.len();
        let mut y_mean = Vec::with_capacity(n);
        for k in 0..n {
            let y = dot(&self.theta, &u[k * p..(k + 1) * p]);
            if !y.is_finite() {
                return Err(Error::Divergence { step: k });
            }
            y_mean.push(y);
        }
        Ok(SimOutput {
            y_mean,
            x_traj: None,
            y_grads: None,
            final_state: vec![],
            final_sens: None,
        })
    }

    fn propagate_sensitivities(
        &self,
        u: &[f64],
        x0: &[f64],
        s0: &SensitivityState,
        visit: &mut dyn FnMut(usize, f64, &[f64]),
    ) -> Result<(Vec<f64>, SensitivityState)> {
        let out = self.simulate_from(u, x0)?;
        let p = self.theta.len();
        for (k, &y) in out.y_mean.iter().enumerate() {
            visit(k, y, &u[k * p..(k + 1) * p]);
        }
        Ok((vec![], s0.clone()))
    }
}
