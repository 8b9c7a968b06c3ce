//! Gauss-Newton Laplace approximation of the parameter posterior.
//!
//! Around `theta_map` the posterior is approximated by a Gaussian with precision
//!
//! ```text
//! H = tau I + beta * sum_k g_k g_k^T,     g_k = d yhat[k] / d theta
//! ```
//!
//! The residual-weighted second-derivative term of the exact Hessian is dropped.
//! Only the Cholesky factor of `H` is stored; the covariance `H^-1` is never
//! formed and every variance goes through a triangular solve.
//!
//! Read without the prior, `beta * sum_k g_k g_k^T` is a finite-sample Fisher
//! information matrix, so the same factor also yields asymptotic frequentist
//! confidence intervals for maximum-likelihood estimates.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{norm_sq, Cholesky, CompensatedSum, Matrix, SymPacked};
use crate::model::{ParamVector, SensitivityState, SequenceModel};
use crate::nssm::output_grads_naive;

/// Rank-one terms are summed plainly within a block, blocks are combined with
/// compensated summation.
const BLOCK: usize = 32;

const JITTER_RETRIES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct LaplacePosterior {
    pub theta_map: ParamVector,
    pub tau: f64,
    pub beta: f64,
    chol: Cholesky,
    /// Diagonal jitter that was needed for the factorization (0 when none).
    pub jitter: f64,
}

impl LaplacePosterior {
    /// Factorizes the precision `h`, adding diagonal jitter
    /// `1e-8 * trace / n` (then x10, up to three retries) when it is not
    /// numerically positive definite.
    pub fn from_precision(theta_map: ParamVector, tau: f64, beta: f64, h: SymPacked) -> Result<Self> {
        if h.dim() != theta_map.len() {
            return Err(Error::Dimension {
                what: "precision matrix",
                expected: theta_map.len(),
                got: h.dim(),
            });
        }
        let (chol, jitter) = factorize_with_jitter(h)?;
        Ok(Self {
            theta_map,
            tau,
            beta,
            chol,
            jitter,
        })
    }

    /// Rebuilds a posterior from a stored factor.
    pub fn from_factor(theta_map: ParamVector, tau: f64, beta: f64, chol: Cholesky, jitter: f64) -> Result<Self> {
        if chol.dim() != theta_map.len() {
            return Err(Error::Dimension {
                what: "Cholesky factor",
                expected: theta_map.len(),
                got: chol.dim(),
            });
        }
        Ok(Self {
            theta_map,
            tau,
            beta,
            chol,
            jitter,
        })
    }

    pub fn n_params(&self) -> usize {
        self.theta_map.len()
    }

    pub fn factor(&self) -> &Cholesky {
        &self.chol
    }

    /// `L L^T`, for inspection and tests.
    pub fn precision(&self) -> SymPacked {
        self.chol.reconstruct()
    }

    pub fn noise_variance(&self) -> f64 {
        1.0 / self.beta
    }
}

fn factorize_with_jitter(mut h: SymPacked) -> Result<(Cholesky, f64)> {
    if let Ok(c) = h.cholesky() {
        return Ok((c, 0.0));
    }
    let n = h.dim().max(1) as f64;
    let base = (1e-8 * h.trace() / n).abs().max(f64::MIN_POSITIVE);
    let mut added = 0.0;
    let mut target = base;
    for _ in 0..JITTER_RETRIES {
        h.add_diagonal(target - added);
        added = target;
        if let Ok(c) = h.cholesky() {
            return Ok((c, added));
        }
        target *= 10.0;
    }
    h.add_diagonal(-added);
    Err(Error::NotPositiveDefinite {
        min_eig: h.gershgorin_min(),
    })
}

/// Accumulates `sum_k g_k g_k^T` in compensated precision.
#[derive(Debug, Clone)]
pub struct GnAccumulator {
    block: SymPacked,
    in_block: usize,
    total: CompensatedSum,
    count: usize,
}

impl GnAccumulator {
    pub fn new(n: usize) -> Self {
        Self {
            block: SymPacked::zeros(n),
            in_block: 0,
            total: CompensatedSum::zeros(crate::linalg::packed_len(n)),
            count: 0,
        }
    }

    pub fn add(&mut self, g: &[f64]) {
        self.block.add_outer(1.0, g);
        self.in_block += 1;
        self.count += 1;
        if self.in_block == BLOCK {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.in_block > 0 {
            self.total.add(self.block.packed());
            self.block = SymPacked::zeros(self.block.dim());
            self.in_block = 0;
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `tau I + beta * sum g g^T`
    pub fn finish(mut self, tau: f64, beta: f64) -> SymPacked {
        self.flush();
        let n = self.block.dim();
        let mut h = SymPacked::from_packed(n, self.total.finish());
        let scaled: Vec<f64> = h.packed().iter().map(|v| beta * v).collect();
        h = SymPacked::from_packed(n, scaled);
        h.add_diagonal(tau);
        h
    }
}

/// Gauss-Newton precision at the model's current parameters, accumulated over
/// the steps after `washout` of a zero-initial-state simulation of `u`, using
/// the recursive output sensitivities.
pub fn gn_precision<M: SequenceModel + ?Sized>(
    model: &M,
    u: &[f64],
    tau: f64,
    beta: f64,
    washout: usize,
) -> Result<LaplacePosterior> {
    let n_params = model.n_params();
    let mut acc = GnAccumulator::new(n_params);
    if model.sequence_len(u)? > washout {
        let x0 = vec![0.0; model.n_states()];
        let s0 = SensitivityState::zeros(model.n_states(), n_params);
        model.propagate_sensitivities(u, &x0, &s0, &mut |k, _, g| {
            if k >= washout {
                acc.add(g);
            }
        })?;
    }
    LaplacePosterior::from_precision(model.theta().clone(), tau, beta, acc.finish(tau, beta))
}

/// Same precision built from per-step finite-difference gradients
/// ([`output_grads_naive`]). Quadratic in the sequence length.
pub fn gn_precision_naive<M: SequenceModel + Clone>(
    model: &M,
    u: &[f64],
    tau: f64,
    beta: f64,
    washout: usize,
) -> Result<LaplacePosterior> {
    let x0 = vec![0.0; model.n_states()];
    let grads: Matrix = output_grads_naive(model, u, &x0)?;
    let mut acc = GnAccumulator::new(model.n_params());
    for k in washout..grads.rows() {
        acc.add(grads.row(k));
    }
    LaplacePosterior::from_precision(model.theta().clone(), tau, beta, acc.finish(tau, beta))
}

/// `g^T H^{-1} g` as the squared norm of `L^{-1} g`.
pub fn posterior_quadform(post: &LaplacePosterior, g: &[f64]) -> f64 {
    let mut z = g.to_vec();
    post.chol.solve_lower_in_place(&mut z);
    norm_sq(&z)
}
