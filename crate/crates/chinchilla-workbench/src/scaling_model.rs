//! The five-parameter loss surface `L(N, D) = E + A*N^-alpha + B*D^-beta`
//! and the compute-optimal quantities it implies.
//!
//! With a compute budget `C = c*N*D`, minimizing the predicted loss over the
//! allocation gives
//!
//! ```text
//! N_opt = (alpha*A / (beta*B*c^beta))^(1/(alpha+beta)) * C^(beta/(alpha+beta))
//! D_opt = C / (c * N_opt)
//! D_opt/N_opt = K * C^((alpha-beta)/(alpha+beta)),   K = (1/c) * (beta*B*c^beta / (alpha*A))^(2/(alpha+beta))
//! ```
//!
//! When `alpha = beta` the ratio is budget-independent and collapses to
//! `(B/A)^(1/alpha)`.

use crate::error::{Error, Result};

/// Parameters of the loss surface. All prefactors and exponents positive;
/// the irreducible loss is nonnegative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingLawParams {
    /// E: loss floor in nats as both resources grow without bound.
    pub irreducible_loss: f64,
    /// A: model-size prefactor.
    pub param_prefactor: f64,
    /// alpha: model-size exponent.
    pub param_exponent: f64,
    /// B: data prefactor.
    pub data_prefactor: f64,
    /// beta: data exponent.
    pub data_exponent: f64,
}

impl ScalingLawParams {
    pub fn new(
        irreducible_loss: f64,
        param_prefactor: f64,
        param_exponent: f64,
        data_prefactor: f64,
        data_exponent: f64,
    ) -> Result<Self> {
        let p = Self {
            irreducible_loss,
            param_prefactor,
            param_exponent,
            data_prefactor,
            data_exponent,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.irreducible_loss >= 0.0, "irreducible_loss", self.irreducible_loss),
            (self.param_prefactor > 0.0, "param_prefactor", self.param_prefactor),
            (self.param_exponent > 0.0, "param_exponent", self.param_exponent),
            (self.data_prefactor > 0.0, "data_prefactor", self.data_prefactor),
            (self.data_exponent > 0.0, "data_exponent", self.data_exponent),
        ];
        for (ok, what, value) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::NonPositiveInput { what, value });
            }
        }
        Ok(())
    }
}

/// Training-compute accounting: `C = flops_per_param_token * N * D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputeModel {
    pub flops_per_param_token: f64,
}

impl Default for ComputeModel {
    /// The conventional `C ~= 6*N*D`.
    fn default() -> Self {
        ComputeModel { flops_per_param_token: 6.0 }
    }
}

/// Loss-minimizing split of one compute budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalAllocation {
    pub n_opt: f64,
    pub d_opt: f64,
    /// `d_opt / n_opt`.
    pub ratio: f64,
}

/// Predicted loss at a given model size and token count.
pub fn eval_loss(p: &ScalingLawParams, n_params: f64, d_tokens: f64) -> Result<f64> {
    if !(n_params > 0.0) || !n_params.is_finite() {
        return Err(Error::NonPositiveInput { what: "n_params", value: n_params });
    }
    if !(d_tokens > 0.0) || !d_tokens.is_finite() {
        return Err(Error::NonPositiveInput { what: "d_tokens", value: d_tokens });
    }
    Ok(p.irreducible_loss
        + p.param_prefactor * n_params.powf(-p.param_exponent)
        + p.data_prefactor * d_tokens.powf(-p.data_exponent))
}

/// Closed-form loss-minimizing allocation of the budget `compute`.
pub fn optimal_allocation(
    p: &ScalingLawParams,
    compute: f64,
    cm: &ComputeModel,
) -> Result<OptimalAllocation> {
    if !(compute > 0.0) || !compute.is_finite() {
        return Err(Error::NonPositiveInput { what: "compute", value: compute });
    }
    let (alpha, beta) = (p.param_exponent, p.data_exponent);
    let sum = alpha + beta;
    if sum == 0.0 {
        return Err(Error::DegenerateExponents);
    }
    let c = cm.flops_per_param_token;
    let base = (alpha * p.param_prefactor) / (beta * p.data_prefactor * c.powf(beta));
    let n_opt = base.powf(1.0 / sum) * compute.powf(beta / sum);
    let d_opt = compute / (c * n_opt);
    Ok(OptimalAllocation { n_opt, d_opt, ratio: d_opt / n_opt })
}

/// Budget-independent prefactor of the tokens-per-parameter curve.
///
/// When `alpha = beta` the powers of the compute coefficient cancel and this
/// is exactly `(B/A)^(1/alpha)`.
pub fn ratio_prefactor(p: &ScalingLawParams, cm: &ComputeModel) -> Result<f64> {
    let (alpha, beta) = (p.param_exponent, p.data_exponent);
    let sum = alpha + beta;
    if sum == 0.0 {
        return Err(Error::DegenerateExponents);
    }
    let c = cm.flops_per_param_token;
    if alpha == beta {
        return Ok((p.data_prefactor / p.param_prefactor).powf(1.0 / alpha));
    }
    let inner = (beta * p.data_prefactor * c.powf(beta)) / (alpha * p.param_prefactor);
    Ok(inner.powf(2.0 / sum) / c)
}

/// Exponent of the tokens-per-parameter curve in the budget:
/// `(alpha - beta) / (alpha + beta)`.
pub fn ratio_exponent(p: &ScalingLawParams) -> Result<f64> {
    let sum = p.param_exponent + p.data_exponent;
    if sum == 0.0 {
        return Err(Error::DegenerateExponents);
    }
    Ok((p.param_exponent - p.data_exponent) / sum)
}

/// Compute-optimal tokens-per-parameter ratio at one budget.
pub fn tokens_per_param(p: &ScalingLawParams, compute: f64, cm: &ComputeModel) -> Result<f64> {
    if !(compute > 0.0) || !compute.is_finite() {
        return Err(Error::NonPositiveInput { what: "compute", value: compute });
    }
    Ok(ratio_prefactor(p, cm)? * compute.powf(ratio_exponent(p)?))
}

/// Tokens-per-parameter over a whole budget grid, in grid order.
pub fn ratio_curve(
    p: &ScalingLawParams,
    cm: &ComputeModel,
    compute_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    compute_grid
        .iter()
        .map(|&c| tokens_per_param(p, c, cm).map(|r| (c, r)))
        .collect()
}

/// Ordinary-least-squares slope of tokens-per-parameter against `log10(C)`.
pub fn ratio_slope_per_decade(
    p: &ScalingLawParams,
    cm: &ComputeModel,
    compute_grid: &[f64],
) -> Result<f64> {
    let mut distinct = compute_grid.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::DegenerateComputeGrid);
    }
    let xs: Vec<f64> = compute_grid.iter().map(|c| c.log10()).collect();
    let ys: Vec<f64> = compute_grid
        .iter()
        .map(|&c| tokens_per_param(p, c, cm))
        .collect::<Result<_>>()?;
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    Ok(sxy / sxx)
}

/// Default budget grid: 50 log-spaced FLOP budgets spanning 1e18..1e26.
pub fn default_compute_grid() -> Vec<f64> {
    log_spaced(1e18, 1e26, 50)
}

/// `n` points log-spaced from `lo` to `hi` inclusive, endpoints exact.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > 0.0);
    let (llo, lhi) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| {
            let e = llo + (i as f64) * (lhi - llo) / ((n - 1) as f64);
            10f64.powf(e)
        })
        .collect()
}
