//! MAP estimation.
//!
//! The objective is the negative log posterior without its constant,
//!
//! ```text
//! NLL(theta) = beta/2 * sum_k (y[k] - yhat[k](theta))^2 + tau/2 * |theta|^2
//! ```
//!
//! where the sum skips the first `washout` steps of every simulated segment.
//! Training runs Adam on minibatches of random contiguous sub-sequences, each
//! simulated from the zero state, and then refines with L-BFGS on the
//! full-length simulation. Gradients always come from the forward sensitivity
//! recursion of the model.

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{axpy, norm_sq};
use crate::model::{ParamVector, SensitivityState, SequenceModel};
use crate::optim::{gradient_descent, Adam, Lbfgs};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineMethod {
    #[default]
    Lbfgs,
    GradientDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub subseq_len: usize,
    pub epochs_adam: usize,
    pub epochs_refine: usize,
    /// Quasi-Newton iterations per minibatch slot of a refinement epoch, so an
    /// epoch runs `ceil(#sub-sequences / batch_size) * refine_iters` iterations.
    pub refine_iters: usize,
    pub refine: RefineMethod,
    pub lbfgs_memory: usize,
    pub lr: f64,
    pub washout: usize,
    /// Prior precision.
    pub tau: f64,
    /// Noise precision.
    pub beta: f64,
    /// Estimate the noise precision from the final residuals.
    pub estimate_beta: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            subseq_len: 256,
            epochs_adam: 120,
            epochs_refine: 4,
            refine_iters: 20,
            refine: RefineMethod::Lbfgs,
            lbfgs_memory: 20,
            lr: 1e-3,
            washout: 64,
            tau: 1e-2,
            beta: 1.0 / (5e-3 * 5e-3),
            estimate_beta: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::Config(msg));
        if self.subseq_len <= self.washout {
            return fail(alloc::format!(
                "sub-sequence length {} must exceed washout {}",
                self.subseq_len,
                self.washout
            ));
        }
        if self.batch_size == 0 {
            return fail("batch size must be at least 1".into());
        }
        if !(self.tau >= 0.0) {
            return fail(alloc::format!("prior precision must be >= 0, got {}", self.tau));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return fail(alloc::format!("noise precision must be > 0, got {}", self.beta));
        }
        if !(self.lr > 0.0) {
            return fail(alloc::format!("learning rate must be > 0, got {}", self.lr));
        }
        Ok(())
    }
}

/// Objective value and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct NllValue {
    pub value: f64,
    pub grad: Vec<f64>,
    /// Number of residuals in the likelihood term.
    pub n_terms: usize,
}

/// Likelihood term of one segment: `beta/2 * sum (y - yhat)^2` over the steps
/// after `washout`, its gradient, and the final `(state, sensitivity)`.
pub fn segment_likelihood<M: SequenceModel + ?Sized>(
    model: &M,
    u: &[f64],
    y: &[f64],
    washout: usize,
    beta: f64,
    x0: &[f64],
    s0: &SensitivityState,
) -> Result<(NllValue, Vec<f64>, SensitivityState)> {
    let n = model.sequence_len(u)?;
    if y.len() != n {
        return Err(Error::Dimension {
            what: "output sequence",
            expected: n,
            got: y.len(),
        });
    }
    let mut value = 0.0;
    let mut grad = vec![0.0; model.n_params()];
    let (xf, sf) = model.propagate_sensitivities(u, x0, s0, &mut |k, yhat, g| {
        if k >= washout {
            let r = yhat - y[k];
            value += 0.5 * beta * r * r;
            axpy(beta * r, g, &mut grad);
        }
    })?;
    Ok((
        NllValue {
            value,
            grad,
            n_terms: n.saturating_sub(washout),
        },
        xf,
        sf,
    ))
}

/// Full-sequence objective from the zero initial state, with gradient.
pub fn nll<M: SequenceModel + ?Sized>(
    model: &M,
    u: &[f64],
    y: &[f64],
    tau: f64,
    beta: f64,
    washout: usize,
) -> Result<NllValue> {
    let n = model.sequence_len(u)?;
    if n <= washout {
        return Err(Error::TooShort {
            needed: washout + 1,
            got: n,
        });
    }
    let x0 = vec![0.0; model.n_states()];
    let s0 = SensitivityState::zeros(model.n_states(), model.n_params());
    let (mut out, _, _) = segment_likelihood(model, u, y, washout, beta, &x0, &s0)?;
    let theta = model.theta();
    out.value += 0.5 * tau * norm_sq(theta);
    axpy(tau, theta, &mut out.grad);
    Ok(out)
}

/// Objective value only (plain simulation, no sensitivities).
pub fn nll_value<M: SequenceModel + ?Sized>(
    model: &M,
    u: &[f64],
    y: &[f64],
    tau: f64,
    beta: f64,
    washout: usize,
) -> Result<f64> {
    let sim = model.simulate(u)?;
    if sim.y_mean.len() != y.len() {
        return Err(Error::Dimension {
            what: "output sequence",
            expected: sim.y_mean.len(),
            got: y.len(),
        });
    }
    if y.len() <= washout {
        return Err(Error::TooShort {
            needed: washout + 1,
            got: y.len(),
        });
    }
    let sse: f64 = sim.y_mean[washout..]
        .iter()
        .zip(&y[washout..])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(0.5 * beta * sse + 0.5 * tau * norm_sq(model.theta()))
}

/// Maps a closure over minibatch items. Implementations may run items
/// concurrently but must return results in input order.
pub trait BatchExecutor {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send;
}

/// Runs items one after another.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl BatchExecutor for Sequential {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        items.iter().map(f).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    Adam,
    Refine,
}

/// Full-dataset objective after one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub nll: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub trace: Vec<EpochRecord>,
    pub theta_map: ParamVector,
    /// Full-dataset objective at `theta_map`.
    pub best_nll: f64,
    pub best_epoch: usize,
    /// Noise precision re-estimated from the final residuals, if requested.
    pub beta_estimate: Option<f64>,
    pub config: TrainConfig,
    /// Filled in by callers that can read a clock.
    pub wall_time_s: Option<f64>,
}

/// MAP training with sequential minibatch evaluation.
pub fn train_map<M>(dataset: &Dataset, model_init: &M, cfg: &TrainConfig) -> Result<TrainReport>
where
    M: SequenceModel + Clone + Sync,
{
    train_map_with(&Sequential, dataset, model_init, cfg, &mut |_| {})
}

/// MAP training. `progress` sees every recorded epoch.
pub fn train_map_with<M, E>(
    exec: &E,
    dataset: &Dataset,
    model_init: &M,
    cfg: &TrainConfig,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainReport>
where
    M: SequenceModel + Clone + Sync,
    E: BatchExecutor,
{
    cfg.validate()?;
    let n_u = model_init.n_inputs();
    let (u, y) = (&dataset.u[..], &dataset.y[..]);
    let n = model_init.sequence_len(u)?;
    if y.len() != n {
        return Err(Error::Dimension {
            what: "output sequence",
            expected: n,
            got: y.len(),
        });
    }
    if n < cfg.subseq_len {
        return Err(Error::TooShort {
            needed: cfg.subseq_len,
            got: n,
        });
    }
    let (tau, beta, washout, len) = (cfg.tau, cfg.beta, cfg.washout, cfg.subseq_len);
    let n_states = model_init.n_states();
    let n_params = model_init.n_params();

    let mut model = model_init.clone();
    let mut theta: Vec<f64> = model.theta().to_vec();
    let full_value = |m: &M, epoch: usize, batch: usize| -> Result<f64> {
        match nll_value(m, u, y, tau, beta, washout) {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::NonFiniteLoss { epoch, batch }),
        }
    };

    let mut trace = Vec::new();
    let init_nll = full_value(&model, 0, 0)?;
    let mut best = (init_nll, 0usize, theta.clone());
    let rec = EpochRecord {
        epoch: 0,
        phase: Phase::Init,
        nll: init_nll,
    };
    progress(&rec);
    trace.push(rec);

    // Minibatch objectives are rescaled to estimate the full-data likelihood.
    let full_terms = (n - washout) as f64;
    let mut starts: Vec<usize> = (0..=n - len).collect();
    let mut shuffle_rng = rng::stream(cfg.seed, SHUFFLE_STREAM);
    let mut adam = Adam::new(n_params, cfg.lr);
    let x0 = vec![0.0; n_states];
    let s0 = SensitivityState::zeros(n_states, n_params);

    for epoch in 1..=cfg.epochs_adam {
        starts.shuffle(&mut shuffle_rng);
        for (b, batch) in starts.chunks(cfg.batch_size).enumerate() {
            let results = exec.map(batch, |&start| {
                segment_likelihood(
                    &model,
                    &u[start * n_u..(start + len) * n_u],
                    &y[start..start + len],
                    washout,
                    beta,
                    &x0,
                    &s0,
                )
                .map(|(v, _, _)| v)
                .map_err(|e| (start, e))
            });
            let scale = full_terms / (batch.len() * (len - washout)) as f64;
            let mut value = 0.5 * tau * norm_sq(&theta);
            let mut grad: Vec<f64> = theta.iter().map(|t| tau * t).collect();
            for r in results {
                let part = r.map_err(|(start, e)| match e {
                    Error::Divergence { step } => Error::BatchDivergence {
                        epoch,
                        batch: b,
                        start,
                        step,
                    },
                    other => other,
                })?;
                value += scale * part.value;
                axpy(scale, &part.grad, &mut grad);
            }
            if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            adam.step(&mut theta, &grad);
            model.set_theta(&theta);
        }
        let v = full_value(&model, epoch, starts.len().div_ceil(cfg.batch_size))?;
        if v < best.0 {
            best = (v, epoch, theta.clone());
        }
        let rec = EpochRecord {
            epoch,
            phase: Phase::Adam,
            nll: v,
        };
        progress(&rec);
        trace.push(rec);
    }

    if cfg.epochs_refine > 0 {
        // Refine from the best Adam iterate; the minibatch noise of the last
        // few Adam steps is not worth keeping.
        theta.clone_from(&best.2);
        let mut probe = model.clone();
        let mut objective = |th: &[f64]| -> Result<(f64, Vec<f64>)> {
            probe.set_theta(th);
            let v = nll(&probe, u, y, tau, beta, washout)?;
            Ok((v.value, v.grad))
        };
        let (mut f, mut g) = objective(&theta)?;
        let mut lbfgs = Lbfgs::new(cfg.lbfgs_memory);
        let slots = starts.len().div_ceil(cfg.batch_size);
        for r in 0..cfg.epochs_refine {
            let epoch = cfg.epochs_adam + r + 1;
            let mut stalls = 0;
            for _ in 0..slots {
                let stalled = match cfg.refine {
                    RefineMethod::Lbfgs => lbfgs.run(&mut theta, &mut f, &mut g, cfg.refine_iters, &mut objective).stalled,
                    RefineMethod::GradientDescent => {
                        gradient_descent(&mut theta, &mut f, &mut g, cfg.refine_iters, &mut objective).stalled
                    }
                };
                if stalled {
                    // Retry once with a fresh curvature memory, then give up on this epoch.
                    lbfgs.reset();
                    stalls += 1;
                    if stalls > 1 {
                        break;
                    }
                } else {
                    stalls = 0;
                }
            }
            if !f.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: 0 });
            }
            if f < best.0 {
                best = (f, epoch, theta.clone());
            }
            let rec = EpochRecord {
                epoch,
                phase: Phase::Refine,
                nll: f,
            };
            progress(&rec);
            trace.push(rec);
        }
    }

    let (best_nll, best_epoch, theta_map) = best;
    let beta_estimate = if cfg.estimate_beta {
        model.set_theta(&theta_map);
        let sim = model.simulate(u)?;
        let res: Vec<f64> = sim.y_mean[washout..]
            .iter()
            .zip(&y[washout..])
            .map(|(a, b)| a - b)
            .collect();
        let var = norm_sq(&res) / res.len() as f64;
        (var > 0.0).then(|| 1.0 / var)
    } else {
        None
    };

    Ok(TrainReport {
        trace,
        theta_map: theta_map.into(),
        best_nll,
        best_epoch,
        beta_estimate,
        config: *cfg,
        wall_time_s: None,
    })
}

const SHUFFLE_STREAM: u64 = 0x7368756666;
