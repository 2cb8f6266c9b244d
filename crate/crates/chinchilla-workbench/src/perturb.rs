//! Structured perturbations of model parameter counts.
//!
//! Four families, each acting elementwise on a vector of counts:
//!
//! * multiplicative: `c_m * N_i`
//! * additive: `c_a + N_i`
//! * systematic bias: `mu_geo * (N_i / mu_geo)^s` about the geometric mean
//! * log-normal noise: `exp(delta_i) * N_i`, `delta_i ~ Normal(0, sigma^2)`
//!
//! Perturbed counts stay real-valued; rounding back to integers would only
//! discard information before fitting.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scaling_model::log_spaced;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    /// Scale every count by `factor` (> 0).
    Multiplicative { factor: f64 },
    /// Shift every count by `offset` (any real; results must stay positive).
    Additive { offset: f64 },
    /// Tilt counts about their geometric mean with exponent `slope` (> 0).
    /// `slope < 1` inflates small models and shrinks large ones.
    SystematicBias { slope: f64 },
    /// Multiply each count by `exp(delta)` with `delta ~ Normal(0, sigma^2)`
    /// drawn once per count from the seeded generator.
    LogNormalNoise { sigma: f64, seed: u64 },
}

impl Perturbation {
    pub fn kind(&self) -> SweepKind {
        match self {
            Perturbation::Multiplicative { .. } => SweepKind::Multiplicative,
            Perturbation::Additive { .. } => SweepKind::Additive,
            Perturbation::SystematicBias { .. } => SweepKind::SystematicBias,
            Perturbation::LogNormalNoise { .. } => SweepKind::LogNormalNoise,
        }
    }

    /// The scalar knob: `c_m`, `c_a`, `s`, or `sigma`.
    pub fn value(&self) -> f64 {
        match *self {
            Perturbation::Multiplicative { factor } => factor,
            Perturbation::Additive { offset } => offset,
            Perturbation::SystematicBias { slope } => slope,
            Perturbation::LogNormalNoise { sigma, .. } => sigma,
        }
    }

    fn validate(&self) -> Result<()> {
        let reason = match *self {
            Perturbation::Multiplicative { factor } if !(factor > 0.0) || !factor.is_finite() => {
                Some(format!("multiplicative factor must be positive, got {factor}"))
            }
            Perturbation::Additive { offset } if !offset.is_finite() => {
                Some(format!("additive offset must be finite, got {offset}"))
            }
            Perturbation::SystematicBias { slope } if !(slope > 0.0) || !slope.is_finite() => {
                Some(format!("systematic bias slope must be positive, got {slope}"))
            }
            Perturbation::LogNormalNoise { sigma, .. } if !(sigma >= 0.0) || !sigma.is_finite() => {
                Some(format!("noise sigma must be nonnegative, got {sigma}"))
            }
            _ => None,
        };
        match reason {
            Some(reason) => Err(Error::InvalidPerturbation { reason }),
            None => Ok(()),
        }
    }
}

/// Geometric mean computed through logs, which stays finite where the raw
/// product of fifty ~1e9 counts would overflow.
pub fn geometric_mean(counts: &[f64]) -> f64 {
    let mean_ln = counts.iter().map(|c| c.ln()).sum::<f64>() / counts.len() as f64;
    mean_ln.exp()
}

/// Applies a perturbation to a vector of counts, preserving order.
///
/// Errors when any input count is nonpositive, or when the perturbed count
/// at some index would be nonpositive (only the additive family can do that).
pub fn apply(perturbation: &Perturbation, counts: &[f64]) -> Result<Vec<f64>> {
    perturbation.validate()?;
    for (index, &c) in counts.iter().enumerate() {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::NonPositivePerturbedCount { index, value: c });
        }
    }
    let perturbed = match *perturbation {
        Perturbation::Multiplicative { factor } => {
            counts.iter().map(|&c| factor * c).collect::<Vec<_>>()
        }
        Perturbation::Additive { offset } => counts.iter().map(|&c| offset + c).collect(),
        Perturbation::SystematicBias { slope } => {
            if slope == 1.0 {
                // Exact no-op; the powf round trip would smudge low bits.
                counts.to_vec()
            } else {
                let mu = geometric_mean(counts);
                counts.iter().map(|&c| mu * (c / mu).powf(slope)).collect()
            }
        }
        Perturbation::LogNormalNoise { sigma, seed } => {
            if sigma == 0.0 {
                counts.to_vec()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                counts
                    .iter()
                    .map(|&c| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        (sigma * z).exp() * c
                    })
                    .collect()
            }
        }
    };
    for (index, &value) in perturbed.iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::NonPositivePerturbedCount { index, value });
        }
    }
    Ok(perturbed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepKind {
    Multiplicative,
    Additive,
    SystematicBias,
    LogNormalNoise,
}

impl SweepKind {
    pub fn label(&self) -> &'static str {
        match self {
            SweepKind::Multiplicative => "multiplicative",
            SweepKind::Additive => "additive",
            SweepKind::SystematicBias => "systematic",
            SweepKind::LogNormalNoise => "lognormal",
        }
    }
}

/// An ordered single-variant grid of perturbations.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    kind: SweepKind,
    points: Vec<Perturbation>,
}

impl SweepGrid {
    pub fn new(points: Vec<Perturbation>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidSweepGrid);
        };
        let kind = first.kind();
        if points.iter().any(|p| p.kind() != kind) {
            return Err(Error::InvalidSweepGrid);
        }
        for p in &points {
            p.validate()?;
        }
        Ok(SweepGrid { kind, points })
    }

    pub fn kind(&self) -> SweepKind {
        self.kind
    }

    pub fn points(&self) -> &[Perturbation] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Rewrites the seed on every noise point; no-op for other kinds.
    pub fn with_noise_seed(mut self, seed: u64) -> Self {
        for p in &mut self.points {
            if let Perturbation::LogNormalNoise { sigma, .. } = *p {
                *p = Perturbation::LogNormalNoise { sigma, seed };
            }
        }
        self
    }
}

/// Number of sigma values in the default noise sweep (the swept range is
/// fixed at [1e-2, 1e2]; the count is this artifact's choice).
pub const DEFAULT_NOISE_GRID_LEN: usize = 9;

/// The default sweep grid for each family:
///
/// * multiplicative: 11 factors log-spaced over [1e-3, 1e3]
/// * additive: five negative magnitudes -10^7.6..-10^6.6, zero, five positive
///   10^6.6..10^7.6, ascending
/// * systematic bias: 11 slopes log-spaced over [10^-0.5, 10^0.5]
/// * log-normal noise: [`DEFAULT_NOISE_GRID_LEN`] sigmas log-spaced over
///   [1e-2, 1e2], all sharing seed 0 (one draw per sweep point)
pub fn default_sweep(kind: SweepKind) -> SweepGrid {
    let points = match kind {
        SweepKind::Multiplicative => log_spaced(1e-3, 1e3, 11)
            .into_iter()
            .map(|factor| Perturbation::Multiplicative { factor })
            .collect(),
        SweepKind::Additive => {
            let magnitudes = log_spaced(10f64.powf(6.6), 10f64.powf(7.6), 5);
            let mut offsets: Vec<f64> = magnitudes.iter().rev().map(|m| -m).collect();
            offsets.push(0.0);
            offsets.extend(&magnitudes);
            offsets.into_iter().map(|offset| Perturbation::Additive { offset }).collect()
        }
        SweepKind::SystematicBias => log_spaced(10f64.powf(-0.5), 10f64.powf(0.5), 11)
            .into_iter()
            .map(|slope| Perturbation::SystematicBias { slope })
            .collect(),
        SweepKind::LogNormalNoise => log_spaced(1e-2, 1e2, DEFAULT_NOISE_GRID_LEN)
            .into_iter()
            .map(|sigma| Perturbation::LogNormalNoise { sigma, seed: 0 })
            .collect(),
    };
    SweepGrid { kind, points }
}
