//! Common interface of differentiable sequence models.
//!
//! Training, the Laplace posterior and the predictive distribution only need a
//! model that can simulate an input sequence and stream the per-step output
//! gradients `d y[k] / d theta`. [`crate::NeuralSSModel`] is the main
//! implementation; [`crate::StaticLinearModel`] is a closed-form reference.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Flat parameter vector shared by every network of a model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// State sensitivity `d x[k] / d theta`, an `n_x x n_theta` row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityState {
    pub s: Matrix,
}

impl SensitivityState {
    pub fn zeros(n_x: usize, n_theta: usize) -> Self {
        Self {
            s: Matrix::zeros(n_x, n_theta),
        }
    }

    /// Index one past the last non-zero column over all rows (0 when all zero).
    pub fn active_cols(&self) -> usize {
        let cols = self.s.cols();
        (0..self.s.rows())
            .map(|i| {
                self.s
                    .row(i)
                    .iter()
                    .rposition(|&v| v != 0.0)
                    .map_or(0, |p| p + 1)
            })
            .max()
            .unwrap_or(0)
            .min(cols)
    }
}

/// Result of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    /// Noise-free outputs, one per input sample.
    pub y_mean: Vec<f64>,
    /// State at each step (`N x n_x`), when recorded.
    pub x_traj: Option<Matrix>,
    /// `d y[k] / d theta` (`N x n_theta`), when requested.
    pub y_grads: Option<Matrix>,
    /// State after the last input sample.
    pub final_state: Vec<f64>,
    /// Sensitivity after the last input sample, when requested.
    pub final_sens: Option<SensitivityState>,
}

/// A model mapping an input sequence to a scalar output sequence, with
/// parameter gradients available step by step.
///
/// Inputs are passed as a flat slice of `N * n_inputs()` values, sample-major.
pub trait SequenceModel {
    fn n_inputs(&self) -> usize;

    fn n_states(&self) -> usize;

    fn theta(&self) -> &ParamVector;

    /// Replaces the parameters. Panics on a length mismatch.
    fn set_theta(&mut self, theta: &[f64]);

    fn n_params(&self) -> usize {
        self.theta().len()
    }

    /// Simulates from the initial state `x0`. Errors carry the first step
    /// with a non-finite state or output.
    fn simulate_from(&self, u: &[f64], x0: &[f64]) -> Result<SimOutput>;

    /// Simulates while propagating sensitivities from `(x0, s0)`, calling
    /// `visit(k, y[k], dy[k]/dtheta)` at every step. Returns the final state
    /// and sensitivity.
    fn propagate_sensitivities(
        &self,
        u: &[f64],
        x0: &[f64],
        s0: &SensitivityState,
        visit: &mut dyn FnMut(usize, f64, &[f64]),
    ) -> Result<(Vec<f64>, SensitivityState)>;

    /// Simulation from the zero state.
    fn simulate(&self, u: &[f64]) -> Result<SimOutput> {
        let x0 = vec![0.0; self.n_states()];
        self.simulate_from(u, &x0)
    }

    fn simulate_with_sensitivities(
        &self,
        u: &[f64],
        x0: &[f64],
        s0: &SensitivityState,
    ) -> Result<SimOutput> {
        let n = self.sequence_len(u)?;
        let n_theta = self.n_params();
        let mut y_mean = Vec::with_capacity(n);
        let mut grads = Matrix::zeros(n, n_theta);
        let (final_state, final_sens) =
            self.propagate_sensitivities(u, x0, s0, &mut |k, y, g| {
                y_mean.push(y);
                grads.row_mut(k).copy_from_slice(g);
            })?;
        Ok(SimOutput {
            y_mean,
            x_traj: None,
            y_grads: Some(grads),
            final_state,
            final_sens: Some(final_sens),
        })
    }

    /// Number of samples in `u`, checking it is a whole number of input vectors.
    fn sequence_len(&self, u: &[f64]) -> Result<usize> {
        let n_u = self.n_inputs();
        if n_u == 0 || u.len() % n_u != 0 {
            return Err(Error::Dimension {
                what: "input sequence",
                expected: n_u * (u.len() / n_u.max(1)),
                got: u.len(),
            });
        }
        Ok(u.len() / n_u)
    }
}
