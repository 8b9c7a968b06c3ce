//! Neural state-space models with quantified uncertainty.
//!
//! The crate is `no_std` and only needs `alloc`. It covers the numerical side of
//! the workflow:
//!
//! * [`mlp`]: one-hidden-layer tanh networks with a linear bypass and analytic Jacobians.
//! * [`nssm`]: the state-space model `x[k+1] = F(x[k], u[k])`, `y[k] = G(x[k])`,
//!   simulation and forward sensitivity propagation.
//! * [`trainer`]: MAP estimation with Adam on random sub-sequences followed by
//!   full-batch L-BFGS refinement.
//! * [`laplace`]: Gauss-Newton Laplace posterior stored as a Cholesky factor of the
//!   precision matrix.
//! * [`uq`]: linearized predictive distribution, credible intervals, surprise index.
//! * [`metrics`]: FIT index, interval coverage and RMSE.
//! * [`wh`] and [`multisine`]: a synthetic Wiener-Hammerstein data generator.
//!
//! File formats, the command line and timing live in the `nssm-unc` crate.
#![no_std]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod laplace;
pub mod linalg;
pub mod linear;
pub mod metrics;
pub mod mlp;
pub mod model;
pub mod multisine;
pub mod nssm;
pub mod optim;
pub mod rng;
pub mod trainer;
pub mod uq;
pub mod wh;

pub use dataset::{Dataset, DatasetMeta};
pub use error::{Error, Result};
pub use laplace::{gn_precision, posterior_quadform, LaplacePosterior};
pub use linear::StaticLinearModel;
pub use metrics::{coverage, fit_index, rmse, EvalReport};
pub use mlp::{MlpSpec, ParamSlice};
pub use model::{ParamVector, SensitivityState, SequenceModel, SimOutput};
pub use multisine::{multisine, MultisineConfig};
pub use nssm::{output_grads_naive, NeuralSSModel};
pub use trainer::{nll, train_map, TrainConfig, TrainReport};
pub use uq::{predict_with_uncertainty, surprise_index, UncertainPrediction};
pub use wh::{wh_simulate, LtiFilter, Nonlinearity, WienerHammerstein};
