//! A workbench for compute-optimal scaling analysis of language-model
//! pretraining runs.
//!
//! What lives here:
//!
//! * [`arch_params`] — transformer parameter accounting: the standard
//!   (attention coefficient 4) and best-fit (coefficient 5) counting
//!   formulas, and disagreement statistics against reported sizes.
//! * [`scaling_model`] — the loss surface `E + A*N^-alpha + B*D^-beta` and
//!   its compute-optimal allocation, tokens-per-parameter ratio, and slope
//!   per decade of compute.
//! * [`fit_engine`] — Huber-loss fitting of the five parameters in log space
//!   with grid-seeded BFGS, plus case-resampling bootstrap uncertainty.
//! * [`perturb`] — multiplicative, additive, systematic-bias, and log-normal
//!   noise perturbations of model sizes, with their default sweep grids.
//! * [`sensitivity`] — perturb-refit sweeps and closed-form predictions the
//!   refits are checked against.
//! * [`io_ingest`] — CSV schemas, the embedded 50-row architecture table,
//!   interpretation remapping, and deterministic CSV/SVG emission.
//! * [`cli`] — the `chinchilla-workbench` command surface.
//!
//! Start with the runnable examples (`cargo run --example params_compare`,
//! `fit_synthetic`, `compute_optimal`, `bootstrap_uncertainty`,
//! `perturbation_sweep`, `ratio_curve_svg`); each one walks a single
//! capability end to end.

pub mod arch_params;
pub mod cli;
pub mod error;
pub mod fit_engine;
pub mod io_ingest;
mod optimizer;
pub mod perturb;
pub mod scaling_model;
pub mod sensitivity;

pub use error::{Error, Result};
