//! Perturb-refit sweeps and the closed-form predictions they are checked
//! against.
//!
//! A sweep perturbs the dataset's distinct model sizes at every grid point,
//! refits the scaling law, and derives the tokens-per-parameter curve and its
//! slope per decade of compute. Closed-form expectations:
//!
//! * multiplicative `c_m`: `alpha` unchanged, `A -> A*c_m^alpha`, ratio curve
//!   shifted by the constant `c_m^(-2*alpha/(alpha+beta))`
//! * systematic bias `s`: `alpha -> alpha/s`, `A -> A*mu_geo^(alpha*(1-s)/s)`,
//!   ratio exponent `(alpha/s - beta)/(alpha/s + beta)`
//! * additive `c_a`: no pure power law exists; the local log-log slope scales
//!   by `N/(N + c_a)`, pushing the fitted exponent above `alpha` for positive
//!   offsets and below it for negative ones

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit_engine::{
    bootstrap, fit, BootstrapOptions, BootstrapResult, FitConfig, FitResult, RunDataset,
    TrainingRun,
};
use crate::perturb::{apply, Perturbation, SweepGrid, SweepKind};
use crate::scaling_model::{
    default_compute_grid, ratio_slope_per_decade, tokens_per_param, ComputeModel,
    ScalingLawParams,
};

/// Budgets at which every sweep row reports the tokens-per-parameter ratio.
pub const RATIO_REFERENCE_BUDGETS: [f64; 3] = [1e19, 1e21, 1e23];

/// One grid point of a sweep: the refit outcome plus derived ratio curves.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPointResult {
    pub perturbation: Perturbation,
    /// Scalar knob value of the perturbation.
    pub value: f64,
    /// Absent when the perturbation or the refit failed.
    pub fit: Option<FitResult>,
    pub bootstrap: Option<BootstrapResult>,
    /// Tokens-per-parameter over the default compute grid (empty on failure).
    pub ratio_curve: Vec<(f64, f64)>,
    /// Ratio at [`RATIO_REFERENCE_BUDGETS`]; NaN slots on failure.
    pub reference_ratios: [f64; 3],
    /// OLS slope of the ratio against log10 compute; NaN on failure.
    pub ratio_slope_per_decade: f64,
    /// Set exactly when some derived quantity is non-finite.
    pub nan_flag: bool,
    pub error: Option<String>,
}

/// A full sweep: the unperturbed baseline plus one result per grid point,
/// in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub baseline: FitResult,
    pub points: Vec<SweepPointResult>,
}

fn failed_point(perturbation: &Perturbation, message: String) -> SweepPointResult {
    SweepPointResult {
        perturbation: *perturbation,
        value: perturbation.value(),
        fit: None,
        bootstrap: None,
        ratio_curve: Vec::new(),
        reference_ratios: [f64::NAN; 3],
        ratio_slope_per_decade: f64::NAN,
        nan_flag: true,
        error: Some(message),
    }
}

/// Derived ratio quantities for a fitted law; failures surface as NaN.
fn derive_ratios(params: &ScalingLawParams, cm: &ComputeModel) -> (Vec<(f64, f64)>, [f64; 3], f64) {
    let grid = default_compute_grid();
    let curve: Vec<(f64, f64)> = grid
        .iter()
        .map(|&c| (c, tokens_per_param(params, c, cm).unwrap_or(f64::NAN)))
        .collect();
    let mut refs = [f64::NAN; 3];
    for (slot, &budget) in refs.iter_mut().zip(RATIO_REFERENCE_BUDGETS.iter()) {
        *slot = tokens_per_param(params, budget, cm).unwrap_or(f64::NAN);
    }
    let slope = ratio_slope_per_decade(params, cm, &grid).unwrap_or(f64::NAN);
    (curve, refs, slope)
}

/// Runs a perturb-refit sweep over `grid`.
///
/// Every point perturbs the distinct model sizes (runs sharing a size share
/// its perturbed value), refits with the full `fit_config`, and derives ratio
/// curves. When `bootstrap_opts` is given, each point also bootstraps, with
/// resample refits warm-started from a 32-point lattice around that point's
/// own fit. Perturbation and refit failures flag the point and the sweep
/// continues.
pub fn run_sweep(
    dataset: &RunDataset,
    grid: &SweepGrid,
    fit_config: &FitConfig,
    bootstrap_opts: Option<&BootstrapOptions>,
) -> Result<SweepResult> {
    let baseline = fit(dataset, fit_config)?;
    let distinct = dataset.distinct_param_counts();
    let index_of: std::collections::HashMap<u64, usize> =
        distinct.iter().enumerate().map(|(i, c)| (c.to_bits(), i)).collect();
    let cm = ComputeModel::default();

    let points: Vec<SweepPointResult> = grid
        .points()
        .iter()
        .map(|perturbation| {
            let perturbed = match apply(perturbation, &distinct) {
                Ok(p) => p,
                Err(e) => return failed_point(perturbation, e.to_string()),
            };
            let rows: Vec<TrainingRun> = dataset
                .runs()
                .iter()
                .map(|run| TrainingRun {
                    n_params: perturbed[index_of[&run.n_params.to_bits()]],
                    ..run.clone()
                })
                .collect();
            let perturbed_dataset = match RunDataset::new(rows) {
                Ok(d) => d,
                Err(e) => return failed_point(perturbation, e.to_string()),
            };
            let fit_result = match fit(&perturbed_dataset, fit_config) {
                Ok(f) => f,
                Err(e) => return failed_point(perturbation, e.to_string()),
            };

            let mut error = None;
            let bs = bootstrap_opts.and_then(|opts| {
                let warm = fit_config.refit_near(&fit_result.log_params);
                match bootstrap(&perturbed_dataset, &warm, opts) {
                    Ok(b) => Some(b),
                    Err(e) => {
                        error = Some(format!("bootstrap failed: {e}"));
                        None
                    }
                }
            });

            let (curve, refs, slope) = derive_ratios(&fit_result.params, &cm);
            let nan_flag = !slope.is_finite()
                || refs.iter().any(|r| !r.is_finite())
                || curve.iter().any(|(_, r)| !r.is_finite());
            SweepPointResult {
                perturbation: *perturbation,
                value: perturbation.value(),
                fit: Some(fit_result),
                bootstrap: bs,
                ratio_curve: curve,
                reference_ratios: refs,
                ratio_slope_per_decade: slope,
                nan_flag,
                error,
            }
        })
        .collect();

    Ok(SweepResult { kind: grid.kind(), baseline, points })
}

/// Bootstraps several datasets in parallel with a shared warm-start policy.
/// Used where many independent bootstraps are wanted at once.
pub fn bootstrap_many(
    jobs: &[(&RunDataset, &FitResult)],
    fit_config: &FitConfig,
    opts: &BootstrapOptions,
) -> Vec<Result<BootstrapResult>> {
    jobs.par_iter()
        .map(|(ds, base)| bootstrap(ds, &fit_config.refit_near(&base.log_params), opts))
        .collect()
}

/// Closed-form refit prediction under a multiplicative count error:
/// the exponent survives and the prefactor absorbs `factor^alpha`.
pub fn predict_multiplicative(
    base: &ScalingLawParams,
    factor: f64,
) -> Result<ScalingLawParams> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::InvalidPerturbation {
            reason: format!("multiplicative factor must be positive, got {factor}"),
        });
    }
    Ok(ScalingLawParams {
        param_prefactor: base.param_prefactor * factor.powf(base.param_exponent),
        ..*base
    })
}

/// Constant factor by which a multiplicative perturbation shifts the whole
/// tokens-per-parameter curve: `factor^(-2*alpha/(alpha+beta))`.
pub fn multiplicative_ratio_shift(base: &ScalingLawParams, factor: f64) -> f64 {
    let (alpha, beta) = (base.param_exponent, base.data_exponent);
    factor.powf(-2.0 * alpha / (alpha + beta))
}

/// Closed-form refit prediction under a systematic bias about `geo_mean`:
/// the exponent is divided by the bias slope and the prefactor picks up
/// `geo_mean^(alpha*(1-s)/s)`.
pub fn predict_systematic(
    base: &ScalingLawParams,
    slope: f64,
    geo_mean: f64,
) -> Result<ScalingLawParams> {
    if !(slope > 0.0) || !slope.is_finite() {
        return Err(Error::InvalidPerturbation {
            reason: format!("systematic bias slope must be positive, got {slope}"),
        });
    }
    if !(geo_mean > 0.0) || !geo_mean.is_finite() {
        return Err(Error::NonPositiveInput { what: "geo_mean", value: geo_mean });
    }
    let alpha = base.param_exponent;
    Ok(ScalingLawParams {
        param_exponent: alpha / slope,
        param_prefactor: base.param_prefactor * geo_mean.powf(alpha * (1.0 - slope) / slope),
        ..*base
    })
}

/// Ratio-curve exponent implied by a systematic bias:
/// `(alpha/s - beta)/(alpha/s + beta)`.
pub fn systematic_ratio_exponent(base: &ScalingLawParams, slope: f64) -> f64 {
    let tilted = base.param_exponent / slope;
    (tilted - base.data_exponent) / (tilted + base.data_exponent)
}

/// Magnitude of the local log-log slope of `A*(N + offset)^-alpha` at `N`:
/// `alpha * N / (N + offset)`. Callers guarantee `N > 0` and `N + offset > 0`.
pub fn additive_effective_slope(n_params: f64, offset: f64, alpha: f64) -> f64 {
    alpha * n_params / (n_params + offset)
}

/// Log-log OLS trend through positive points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawTrend {
    /// Intercept in log space (natural log of the prefactor).
    pub ln_prefactor: f64,
    pub exponent: f64,
    pub r_squared: f64,
}

/// Fits `y = k * x^p` by ordinary least squares on `(ln x, ln y)`.
pub fn fit_power_law_trend(xs: &[f64], ys: &[f64]) -> Result<PowerLawTrend> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::TooFewTrendPoints { n: xs.len().min(ys.len()) });
    }
    for (index, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        if !(x > 0.0) || !(y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::NonPositiveTrendPoint { index });
        }
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let exponent = sxy / sxx;
    let ln_prefactor = my - exponent * mx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        let fitted = ln_prefactor + exponent * x;
        ss_res += (y - fitted) * (y - fitted);
        ss_tot += (y - my) * (y - my);
    }
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(PowerLawTrend { ln_prefactor, exponent, r_squared })
}
