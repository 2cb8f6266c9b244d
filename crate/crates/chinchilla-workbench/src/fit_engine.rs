//! Scaling-law estimation from observed training runs.
//!
//! The objective is a Huber loss over log-space residuals,
//!
//! ```text
//! sum_i Huber_delta( LSE(a - alpha*ln N_i, b - beta*ln D_i, e) - ln L_i )
//! ```
//!
//! where `LSE` is the overflow-safe log-sum-exp and `(a, b, e) = (ln A, ln B, ln E)`.
//! [`fit`] runs a deterministic BFGS descent from every point of a log-space
//! initialization lattice and keeps the lowest final objective, breaking ties
//! by lowest grid index. [`bootstrap`] refits case-resampled datasets and
//! summarizes the spread of the five estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optimizer::{self, BfgsSettings};
use crate::scaling_model::ScalingLawParams;

/// One observed pretraining run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub n_params: f64,
    pub d_tokens: f64,
    pub loss: f64,
    pub run_id: Option<String>,
}

impl TrainingRun {
    pub fn new(n_params: f64, d_tokens: f64, loss: f64) -> Self {
        TrainingRun { n_params, d_tokens, loss, run_id: None }
    }

    fn validate(&self, row: usize) -> Result<()> {
        for (value, what) in [
            (self.n_params, "n_params"),
            (self.d_tokens, "d_tokens"),
            (self.loss, "loss"),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::CsvRow {
                    row,
                    message: format!("{what} must be positive and finite, got {value}"),
                });
            }
        }
        Ok(())
    }
}

/// An ordered collection of runs. Construction rejects nonpositive or
/// non-finite values; the richer identifiability requirements are checked by
/// [`fit`], where they matter.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDataset {
    runs: Vec<TrainingRun>,
}

impl RunDataset {
    pub fn new(runs: Vec<TrainingRun>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (i, run) in runs.iter().enumerate() {
            run.validate(i + 1)?;
        }
        Ok(RunDataset { runs })
    }

    pub fn runs(&self) -> &[TrainingRun] {
        &self.runs
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Distinct parameter counts in first-appearance order (bit-exact dedup).
    pub fn distinct_param_counts(&self) -> Vec<f64> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for run in &self.runs {
            if seen.insert(run.n_params.to_bits()) {
                out.push(run.n_params);
            }
        }
        out
    }

    fn distinct_token_count(&self) -> usize {
        self.runs
            .iter()
            .map(|r| r.d_tokens.to_bits())
            .collect::<std::collections::HashSet<_>>()
            .len()
    }

    fn check_fittable(&self) -> Result<()> {
        let distinct_params = self.distinct_param_counts().len();
        let distinct_tokens = self.distinct_token_count();
        if self.runs.len() < 5 || distinct_params < 3 || distinct_tokens < 3 {
            return Err(Error::Underdetermined {
                runs: self.runs.len(),
                distinct_params,
                distinct_tokens,
            });
        }
        Ok(())
    }
}

/// Estimates in the optimizer's coordinates: log prefactors and floor, raw exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScaleParams {
    /// `ln A`.
    pub ln_param_prefactor: f64,
    /// `ln B`.
    pub ln_data_prefactor: f64,
    /// `ln E`.
    pub ln_irreducible_loss: f64,
    /// `alpha`.
    pub param_exponent: f64,
    /// `beta`.
    pub data_exponent: f64,
}

impl LogScaleParams {
    fn from_vector(x: &[f64; 5]) -> Self {
        LogScaleParams {
            ln_param_prefactor: x[0],
            ln_data_prefactor: x[1],
            ln_irreducible_loss: x[2],
            param_exponent: x[3],
            data_exponent: x[4],
        }
    }

    fn to_vector(self) -> [f64; 5] {
        [
            self.ln_param_prefactor,
            self.ln_data_prefactor,
            self.ln_irreducible_loss,
            self.param_exponent,
            self.data_exponent,
        ]
    }

    /// Exponentiates back to the loss-surface parameterization.
    pub fn to_params(self) -> ScalingLawParams {
        ScalingLawParams {
            irreducible_loss: self.ln_irreducible_loss.exp(),
            param_prefactor: self.ln_param_prefactor.exp(),
            param_exponent: self.param_exponent,
            data_prefactor: self.ln_data_prefactor.exp(),
            data_exponent: self.data_exponent,
        }
    }
}

/// Fit configuration: Huber width, initialization lattice, optimizer budget.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub huber_delta: f64,
    /// Initializations for `ln A`.
    pub ln_param_prefactor_inits: Vec<f64>,
    /// Initializations for `ln B`.
    pub ln_data_prefactor_inits: Vec<f64>,
    /// Initializations for `ln E`.
    pub ln_irreducible_inits: Vec<f64>,
    /// Initializations for `alpha`.
    pub param_exponent_inits: Vec<f64>,
    /// Initializations for `beta`.
    pub data_exponent_inits: Vec<f64>,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        let exponents = vec![0.0, 0.5, 1.0, 1.5, 2.0];
        let floors = vec![-1.0, -0.5, 0.0, 0.5, 1.0];
        let prefactors = vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0];
        FitConfig {
            huber_delta: 1e-3,
            ln_param_prefactor_inits: prefactors.clone(),
            ln_data_prefactor_inits: prefactors,
            ln_irreducible_inits: floors,
            param_exponent_inits: exponents.clone(),
            data_exponent_inits: exponents,
            max_iterations: 10_000,
            gradient_tolerance: 1e-8,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if !(self.huber_delta > 0.0) || !self.huber_delta.is_finite() {
            return Err(Error::InvalidFitConfig {
                reason: format!("huber_delta must be positive, got {}", self.huber_delta),
            });
        }
        let grids = [
            &self.ln_param_prefactor_inits,
            &self.ln_data_prefactor_inits,
            &self.ln_irreducible_inits,
            &self.param_exponent_inits,
            &self.data_exponent_inits,
        ];
        if grids.iter().any(|g| g.is_empty()) {
            return Err(Error::InvalidFitConfig { reason: "empty initialization grid".into() });
        }
        if grids.iter().flat_map(|g| g.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidFitConfig { reason: "non-finite grid value".into() });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidFitConfig { reason: "max_iterations must be >= 1".into() });
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidFitConfig {
                reason: "gradient_tolerance must be positive".into(),
            });
        }
        Ok(())
    }

    /// Number of optimizer starts the lattice induces.
    pub fn start_count(&self) -> usize {
        self.ln_param_prefactor_inits.len()
            * self.ln_data_prefactor_inits.len()
            * self.ln_irreducible_inits.len()
            * self.param_exponent_inits.len()
            * self.data_exponent_inits.len()
    }

    /// A small 32-start lattice bracketing a known estimate, for refits of
    /// nearby problems (bootstrap resamples, warm re-runs).
    pub fn refit_near(&self, center: &LogScaleParams) -> FitConfig {
        let around = |v: f64| vec![v - 0.25, v + 0.25];
        FitConfig {
            ln_param_prefactor_inits: around(center.ln_param_prefactor),
            ln_data_prefactor_inits: around(center.ln_data_prefactor),
            ln_irreducible_inits: around(center.ln_irreducible_loss),
            param_exponent_inits: around(center.param_exponent),
            data_exponent_inits: around(center.data_exponent),
            ..self.clone()
        }
    }

    fn starts(&self) -> Vec<[f64; 5]> {
        let mut starts = Vec::with_capacity(self.start_count());
        for &a in &self.ln_param_prefactor_inits {
            for &b in &self.ln_data_prefactor_inits {
                for &e in &self.ln_irreducible_inits {
                    for &alpha in &self.param_exponent_inits {
                        for &beta in &self.data_exponent_inits {
                            starts.push([a, b, e, alpha, beta]);
                        }
                    }
                }
            }
        }
        starts
    }
}

/// Outcome of one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ScalingLawParams,
    pub log_params: LogScaleParams,
    /// Final Huber objective at the optimum.
    pub objective: f64,
    /// Whether the selected start met the gradient tolerance.
    pub converged: bool,
}

/// Run data pre-projected into log space, plus the evaluation kernel.
struct FitProblem {
    ln_n: Vec<f64>,
    ln_d: Vec<f64>,
    ln_l: Vec<f64>,
    delta: f64,
}

impl FitProblem {
    fn new(dataset: &RunDataset, delta: f64) -> Self {
        let ln_n = dataset.runs().iter().map(|r| r.n_params.ln()).collect();
        let ln_d = dataset.runs().iter().map(|r| r.d_tokens.ln()).collect();
        let ln_l = dataset.runs().iter().map(|r| r.loss.ln()).collect();
        FitProblem { ln_n, ln_d, ln_l, delta }
    }

    fn objective_only(&self, x: &[f64; 5]) -> f64 {
        let [a, b, e, alpha, beta] = *x;
        let mut total = 0.0;
        for i in 0..self.ln_n.len() {
            let t1 = a - alpha * self.ln_n[i];
            let t2 = b - beta * self.ln_d[i];
            let m = t1.max(t2).max(e);
            let z = (t1 - m).exp() + (t2 - m).exp() + (e - m).exp();
            let r = m + z.ln() - self.ln_l[i];
            let abs_r = r.abs();
            total += if abs_r <= self.delta {
                0.5 * r * r
            } else {
                self.delta * (abs_r - 0.5 * self.delta)
            };
        }
        total
    }

    fn objective_and_gradient(&self, x: &[f64; 5]) -> (f64, [f64; 5]) {
        let [a, b, e, alpha, beta] = *x;
        let mut total = 0.0;
        let mut grad = [0.0; 5];
        for i in 0..self.ln_n.len() {
            let t1 = a - alpha * self.ln_n[i];
            let t2 = b - beta * self.ln_d[i];
            let m = t1.max(t2).max(e);
            let e1 = (t1 - m).exp();
            let e2 = (t2 - m).exp();
            let e3 = (e - m).exp();
            let z = e1 + e2 + e3;
            let r = m + z.ln() - self.ln_l[i];
            let abs_r = r.abs();
            let weight = if abs_r <= self.delta {
                total += 0.5 * r * r;
                r
            } else {
                total += self.delta * (abs_r - 0.5 * self.delta);
                self.delta * r.signum()
            };
            let s1 = e1 / z;
            let s2 = e2 / z;
            let s3 = e3 / z;
            grad[0] += weight * s1;
            grad[1] += weight * s2;
            grad[2] += weight * s3;
            grad[3] -= weight * s1 * self.ln_n[i];
            grad[4] -= weight * s2 * self.ln_d[i];
        }
        (total, grad)
    }
}

/// The fit objective at a given point of log-parameter space.
pub fn huber_lse_objective(
    log_params: &LogScaleParams,
    dataset: &RunDataset,
    delta: f64,
) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidFitConfig {
            reason: format!("huber_delta must be positive, got {delta}"),
        });
    }
    let x = log_params.to_vector();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "log_params" });
    }
    Ok(FitProblem::new(dataset, delta).objective_only(&x))
}

/// Fits the five-parameter law by multistart BFGS on the Huber-LSE objective.
///
/// Deterministic: the start lattice is enumerated in a fixed order, each
/// descent is sequential arithmetic, and ties in the final objective go to
/// the lowest start index.
pub fn fit(dataset: &RunDataset, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    dataset.check_fittable()?;
    let problem = FitProblem::new(dataset, config.huber_delta);
    let settings = BfgsSettings {
        gradient_tolerance: config.gradient_tolerance,
        max_iterations: config.max_iterations,
    };

    let starts = config.starts();
    let outcomes: Vec<_> = starts
        .par_iter()
        .map(|&x0| optimizer::minimize(|x| problem.objective_and_gradient(x), x0, &settings))
        .collect();

    let mut best: Option<&optimizer::BfgsRun> = None;
    for run in outcomes.iter().flatten() {
        if run.value.is_finite() && best.is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let Some(best) = best else {
        return Err(Error::AllStartsFailed {
            diagnostics: format!("{} starts, none finite", starts.len()),
        });
    };

    let log_params = LogScaleParams::from_vector(&best.x);
    Ok(FitResult {
        params: log_params.to_params(),
        log_params,
        objective: best.value,
        converged: best.converged,
    })
}

/// Per-parameter summary values (one slot per scaling-law parameter).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamStats {
    pub irreducible_loss: f64,
    pub param_prefactor: f64,
    pub param_exponent: f64,
    pub data_prefactor: f64,
    pub data_exponent: f64,
}

impl ParamStats {
    fn from_fn(mut f: impl FnMut(usize) -> f64) -> Self {
        ParamStats {
            irreducible_loss: f(0),
            param_prefactor: f(1),
            param_exponent: f(2),
            data_prefactor: f(3),
            data_exponent: f(4),
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.irreducible_loss,
            self.param_prefactor,
            self.param_exponent,
            self.data_prefactor,
            self.data_exponent,
        ]
    }
}

/// Resampling controls. Defaults: 4000 resamples, seed 0, 80% intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub n_resamples: usize,
    pub seed: u64,
    pub confidence_level: f64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions { n_resamples: 4000, seed: 0, confidence_level: 0.80 }
    }
}

/// Spread of refit parameters over with-replacement resamples.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub n_resamples: usize,
    /// Resamples whose refit failed and were dropped.
    pub n_dropped: usize,
    /// Set when the result is degenerate (one resample) or more than 10% of
    /// resamples were dropped.
    pub flagged: bool,
    pub confidence_level: f64,
    pub seed: u64,
    /// Sample standard deviation of each parameter across resamples.
    pub standard_errors: ParamStats,
    /// Percentile-interval lower bounds.
    pub lower: ParamStats,
    /// Percentile-interval upper bounds.
    pub upper: ParamStats,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Case-resampling bootstrap: each resample draws `len` rows with replacement
/// from the dataset (ChaCha stream `seed`/`resample index`) and refits with
/// [`fit`] under `config`. Failed refits are dropped and counted.
pub fn bootstrap(
    dataset: &RunDataset,
    config: &FitConfig,
    opts: &BootstrapOptions,
) -> Result<BootstrapResult> {
    if opts.n_resamples == 0 {
        return Err(Error::NoResamples);
    }
    if !(opts.confidence_level > 0.0 && opts.confidence_level < 1.0) {
        return Err(Error::InvalidFitConfig {
            reason: format!("confidence level must lie in (0, 1), got {}", opts.confidence_level),
        });
    }
    config.validate()?;
    dataset.check_fittable()?;

    let n = dataset.len();
    let refits: Vec<Option<FitResult>> = (0..opts.n_resamples)
        .into_par_iter()
        .map(|resample| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(1 + resample as u64);
            let rows: Vec<TrainingRun> =
                (0..n).map(|_| dataset.runs()[rng.random_range(0..n)].clone()).collect();
            let resampled = RunDataset::new(rows).expect("resampled rows stay valid");
            fit(&resampled, config).ok()
        })
        .collect();

    let estimates: Vec<[f64; 5]> = refits
        .iter()
        .flatten()
        .map(|r| {
            let p = &r.params;
            [
                p.irreducible_loss,
                p.param_prefactor,
                p.param_exponent,
                p.data_prefactor,
                p.data_exponent,
            ]
        })
        .collect();
    let n_dropped = opts.n_resamples - estimates.len();
    if estimates.is_empty() {
        return Err(Error::AllStartsFailed {
            diagnostics: format!("all {} bootstrap resamples failed to fit", opts.n_resamples),
        });
    }

    let k = estimates.len();
    let standard_errors = ParamStats::from_fn(|p| {
        if k < 2 {
            return 0.0;
        }
        let mean = estimates.iter().map(|e| e[p]).sum::<f64>() / k as f64;
        let ss = estimates.iter().map(|e| (e[p] - mean).powi(2)).sum::<f64>();
        (ss / (k - 1) as f64).sqrt()
    });

    let tail = (1.0 - opts.confidence_level) / 2.0;
    let sorted_by_param: Vec<Vec<f64>> = (0..5)
        .map(|p| {
            let mut v: Vec<f64> = estimates.iter().map(|e| e[p]).collect();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    let lower = ParamStats::from_fn(|p| quantile(&sorted_by_param[p], tail));
    let upper = ParamStats::from_fn(|p| quantile(&sorted_by_param[p], 1.0 - tail));

    Ok(BootstrapResult {
        n_resamples: opts.n_resamples,
        n_dropped,
        flagged: opts.n_resamples == 1 || n_dropped * 10 > opts.n_resamples,
        confidence_level: opts.confidence_level,
        seed: opts.seed,
        standard_errors,
        lower,
        upper,
    })
}
