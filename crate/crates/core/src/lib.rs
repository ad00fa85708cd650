//! Volatility inference for discretely observed jump diffusions through a
//! deliberately jump-free working model.
//!
//! The pipeline for one data set:
//!
//! 1. choose a truncation level and estimate the jump quadratic variation
//!    (`jump_thresh`);
//! 2. temper the Gaussian working likelihood by
//!    `kappa = (1 - J_hat / (T theta_hat))^2` and update an inverse-gamma prior
//!    (`vol_posterior`);
//! 3. shift the tempered posterior by `J_hat / T` and read off an
//!    equal-tailed credible interval.
//!
//! `sde_sim` generates paths with ground truth, `diagnostics` checks the
//! normal limits numerically and `mc_harness` runs coverage studies.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod jump_thresh;
pub mod mc_harness;
mod parallel;
pub mod quadrature;
pub mod sde_sim;
pub mod seed;
pub mod vol_posterior;

pub use error::{Error, Result};
pub use jump_thresh::{estimate_jump_qv, interquartile_threshold, qv_error_rate, QvEstimate, ThresholdRule};
pub use sde_sim::{
    simulate_jumps, simulate_path, simulate_path_given_jumps, DiffusionSpec, JumpRealization, JumpSpec, SamplePath,
    SizeLaw,
};
pub use vol_posterior::{
    bvm_normal, compute_kappa, compute_mle, credible_interval, gibbs_update, infer, modify_posterior,
    CredibleInterval, GibbsPosterior, Inference, InferenceSettings, InverseGammaParams, ModifiedPosterior,
    NormalApprox,
};
