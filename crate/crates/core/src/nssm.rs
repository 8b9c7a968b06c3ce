//! Neural state-space model
//!
//! ```text
//! x[k+1] = F(x[k], u[k]; theta)
//! y[k]   = G(x[k]; theta)
//! ```
//!
//! with `F` and `G` one-hidden-layer networks sharing a single parameter vector
//! (`F` first, then `G`). Output gradients are obtained with the forward
//! sensitivity recursion
//!
//! ```text
//! s[k+1]          = J_fx[k] s[k] + J_ftheta[k]
//! d y[k]/d theta  = J_gx[k] s[k] + J_gtheta[k]
//! ```
//!
//! at cost `O(N (n_x + 1) n_theta)`. Since `G`'s parameters never reach the
//! state, the recursion only carries the `F` columns of `s` whenever the initial
//! sensitivity has no `G` component.
//!
//! Jacobians of `F` and `G` are evaluated analytically, layer by layer, rather
//! than through reverse-mode passes.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, Matrix};
use crate::mlp::{self, Activations, MlpSpec, ParamSlice};
use crate::model::{ParamVector, SensitivityState, SequenceModel, SimOutput};

pub const DEFAULT_STATES: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralSSModel {
    n_x: usize,
    n_u: usize,
    f: ParamSlice,
    g: ParamSlice,
    theta: ParamVector,
}

impl NeuralSSModel {
    /// Model with zero parameters. `F` maps `n_x + n_u -> n_x`, `G` maps `n_x -> 1`.
    pub fn new(n_x: usize, n_u: usize, n_hidden: usize, bypass: bool) -> Result<Self> {
        let f_spec = MlpSpec::new(n_x + n_u, n_x)
            .with_hidden(n_hidden)
            .with_bypass(bypass);
        let g_spec = MlpSpec::new(n_x, 1).with_hidden(n_hidden).with_bypass(bypass);
        Self::from_specs(n_x, n_u, f_spec, g_spec)
    }

    pub fn from_specs(n_x: usize, n_u: usize, f_spec: MlpSpec, g_spec: MlpSpec) -> Result<Self> {
        if n_x == 0 || n_u == 0 {
            return Err(Error::Config(alloc::format!(
                "state and input dimensions must be positive (n_x={n_x}, n_u={n_u})"
            )));
        }
        f_spec.validate()?;
        g_spec.validate()?;
        if f_spec.n_in != n_x + n_u || f_spec.n_out != n_x {
            return Err(Error::Config(alloc::format!(
                "F must map {} -> {}, got {} -> {}",
                n_x + n_u,
                n_x,
                f_spec.n_in,
                f_spec.n_out
            )));
        }
        if g_spec.n_in != n_x || g_spec.n_out != 1 {
            return Err(Error::Config(alloc::format!(
                "G must map {} -> 1, got {} -> {}",
                n_x,
                g_spec.n_in,
                g_spec.n_out
            )));
        }
        let f = ParamSlice {
            offset: 0,
            spec: f_spec,
        };
        let g = ParamSlice {
            offset: f.end(),
            spec: g_spec,
        };
        let theta = ParamVector::zeros(g.end());
        Ok(Self {
            n_x,
            n_u,
            f,
            g,
            theta,
        })
    }

    /// Six states, one input, 15 hidden units and linear bypass: 385 parameters.
    pub fn default_architecture() -> Self {
        Self::new(DEFAULT_STATES, 1, mlp::DEFAULT_HIDDEN, true).expect("valid default dimensions")
    }

    pub fn with_theta(mut self, theta: &[f64]) -> Self {
        self.set_theta(theta);
        self
    }

    /// Random initialization of both networks (see [`mlp::init_params`]).
    pub fn init_random<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let f = mlp::init_params(&self.f.spec, rng);
        let g = mlp::init_params(&self.g.spec, rng);
        self.f.get_mut(&mut self.theta).copy_from_slice(&f);
        self.g.get_mut(&mut self.theta).copy_from_slice(&g);
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_y(&self) -> usize {
        1
    }

    pub fn f_slice(&self) -> ParamSlice {
        self.f
    }

    pub fn g_slice(&self) -> ParamSlice {
        self.g
    }

    fn check_x0(&self, x0: &[f64]) -> Result<()> {
        if x0.len() != self.n_x {
            return Err(Error::Dimension {
                what: "initial state",
                expected: self.n_x,
                got: x0.len(),
            });
        }
        Ok(())
    }
}

impl SequenceModel for NeuralSSModel {
    fn n_inputs(&self) -> usize {
        self.n_u
    }

    fn n_states(&self) -> usize {
        self.n_x
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
        self.check_x0(x0)?;
        let (n_x, n_u) = (self.n_x, self.n_u);
        let fp = self.f.get(&self.theta);
        let gp = self.g.get(&self.theta);
        let mut act_f = Activations::new(&self.f.spec);
        let mut act_g = Activations::new(&self.g.spec);
        let mut z = vec![0.0; n_x + n_u];
        z[..n_x].copy_from_slice(x0);
        let mut x_next = vec![0.0; n_x];
        let mut y = [0.0];
        let mut y_mean = Vec::with_capacity(n);
        let mut traj = Matrix::zeros(n, n_x);
        for k in 0..n {
            traj.row_mut(k).copy_from_slice(&z[..n_x]);
            mlp::forward_into(&self.g.spec, gp, &z[..n_x], &mut act_g, &mut y);
            if !y[0].is_finite() {
                return Err(Error::Divergence { step: k });
            }
            y_mean.push(y[0]);
            z[n_x..].copy_from_slice(&u[k * n_u..(k + 1) * n_u]);
            mlp::forward_into(&self.f.spec, fp, &z, &mut act_f, &mut x_next);
            if x_next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { step: k + 1 });
            }
            z[..n_x].copy_from_slice(&x_next);
        }
        Ok(SimOutput {
            y_mean,
            x_traj: Some(traj),
            y_grads: None,
            final_state: z[..n_x].to_vec(),
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
        let n = self.sequence_len(u)?;
        self.check_x0(x0)?;
        let (n_x, n_u) = (self.n_x, self.n_u);
        let n_theta = self.theta.len();
        if s0.s.rows() != n_x || s0.s.cols() != n_theta {
            return Err(Error::Dimension {
                what: "initial sensitivity",
                expected: n_x * n_theta,
                got: s0.s.rows() * s0.s.cols(),
            });
        }
        let (f_spec, g_spec) = (&self.f.spec, &self.g.spec);
        let fp = self.f.get(&self.theta);
        let gp = self.g.get(&self.theta);

        // Columns carried by the recursion.
        let width = if s0.active_cols() <= self.f.end() {
            self.f.end()
        } else {
            n_theta
        };
        let mut s = vec![0.0; n_x * width];
        for i in 0..n_x {
            s[i * width..(i + 1) * width].copy_from_slice(&s0.s.row(i)[..width]);
        }
        let mut s_next = vec![0.0; n_x * width];

        let mut act_f = Activations::new(f_spec);
        let mut act_g = Activations::new(g_spec);
        let mut jfx = vec![0.0; n_x * n_x];
        let mut jgx = vec![0.0; n_x];
        let mut grad = vec![0.0; n_theta];
        let mut z = vec![0.0; n_x + n_u];
        z[..n_x].copy_from_slice(x0);
        let mut x_next = vec![0.0; n_x];
        let mut y = [0.0];

        for k in 0..n {
            // Output and its gradient.
            mlp::forward_into(g_spec, gp, &z[..n_x], &mut act_g, &mut y);
            if !y[0].is_finite() {
                return Err(Error::Divergence { step: k });
            }
            mlp::input_jacobian_into(g_spec, gp, &act_g, n_x, &mut jgx);
            grad.fill(0.0);
            for (i, &c) in jgx.iter().enumerate() {
                axpy(c, &s[i * width..(i + 1) * width], &mut grad[..width]);
            }
            mlp::add_param_jacobian(g_spec, gp, &z[..n_x], &act_g, &mut grad, n_theta, self.g.offset);
            visit(k, y[0], &grad);

            // State update and sensitivity recursion.
            z[n_x..].copy_from_slice(&u[k * n_u..(k + 1) * n_u]);
            mlp::forward_into(f_spec, fp, &z, &mut act_f, &mut x_next);
            if x_next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { step: k + 1 });
            }
            mlp::input_jacobian_into(f_spec, fp, &act_f, n_x, &mut jfx);
            mat_mul_small(&jfx, n_x, &s, width, &mut s_next);
            mlp::add_param_jacobian(f_spec, fp, &z, &act_f, &mut s_next, width, self.f.offset);
            core::mem::swap(&mut s, &mut s_next);
            z[..n_x].copy_from_slice(&x_next);
        }

        let mut s_final = SensitivityState::zeros(n_x, n_theta);
        for i in 0..n_x {
            s_final.s.row_mut(i)[..width].copy_from_slice(&s[i * width..(i + 1) * width]);
        }
        Ok((z[..n_x].to_vec(), s_final))
    }
}

/// `out = a * b` with `a` a small `m x m` matrix and `b`, `out` of shape
/// `m x width`, all row-major. Columns are processed in fixed-width blocks.
fn mat_mul_small(a: &[f64], m: usize, b: &[f64], width: usize, out: &mut [f64]) {
    const LANES: usize = 8;
    let full = width / LANES * LANES;
    for i in 0..m {
        let coeffs = &a[i * m..(i + 1) * m];
        let row = &mut out[i * width..(i + 1) * width];
        for c in (0..full).step_by(LANES) {
            let mut acc = [0.0; LANES];
            for (j, &cj) in coeffs.iter().enumerate() {
                let src: &[f64; LANES] = b[j * width + c..j * width + c + LANES].try_into().unwrap();
                for l in 0..LANES {
                    acc[l] += cj * src[l];
                }
            }
            row[c..c + LANES].copy_from_slice(&acc);
        }
        for c in full..width {
            row[c] = coeffs.iter().enumerate().map(|(j, &cj)| cj * b[j * width + c]).sum();
        }
    }
}

/// Output gradients by per-step central finite differences: for every step
/// `k` each parameter is perturbed and the prefix `u[0..=k]` re-simulated.
///
/// Cost grows quadratically with `N`; this is the reference the recursive
/// sensitivities are checked and benchmarked against.
pub fn output_grads_naive<M: SequenceModel + Clone>(
    model: &M,
    u: &[f64],
    x0: &[f64],
) -> Result<Matrix> {
    let n = model.sequence_len(u)?;
    let n_u = model.n_inputs();
    let theta: Vec<f64> = model.theta().to_vec();
    let mut work = model.clone();
    let mut perturbed = theta.clone();
    let mut grads = Matrix::zeros(n, theta.len());
    for k in 0..n {
        let prefix = &u[..(k + 1) * n_u];
        for i in 0..theta.len() {
            let h = FD_STEP * theta[i].abs().max(1.0);
            perturbed[i] = theta[i] + h;
            work.set_theta(&perturbed);
            let plus = work.simulate_from(prefix, x0)?.y_mean[k];
            perturbed[i] = theta[i] - h;
            work.set_theta(&perturbed);
            let minus = work.simulate_from(prefix, x0)?.y_mean[k];
            perturbed[i] = theta[i];
            grads[(k, i)] = (plus - minus) / (2.0 * h);
        }
    }
    Ok(grads)
}

const FD_STEP: f64 = 1e-5;
