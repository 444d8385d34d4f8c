//! Observation-distribution families: log-likelihoods, sampling, and
//! closed-form KL divergences.
//!
//! Two scalar families are supported, both identified by their mean:
//! the unit-variance normal and the exponential (rate = 1/mean). All
//! log quantities — log-densities, LLRs, divergences, thresholds — are
//! expressed in base-2 logarithms (bits); closed forms derived in nats
//! are converted by dividing by ln 2.
//!
//! Both families have log-densities that are *affine* in the
//! observation up to a parameter-free term, which the stage runners
//! exploit to accumulate pairwise LLRs in O(1) state per hypothesis
//! (see [`affine_log_density`]).

use rand::Rng;
use rand_distr::{Distribution as _, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// log₂(e): multiply a nat-valued quantity by this to get bits.
pub const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Supported observation-distribution families.
///
/// Parameter vectors for both families are one-dimensional: the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Normal with variance fixed at 1; the parameter is the mean.
    NormalUnitVariance,
    /// Exponential parameterized by its mean m > 0 (rate 1/m).
    ExponentialByMean,
}

impl Family {
    /// Dimension of a valid parameter vector for this family.
    pub fn param_dim(self) -> usize {
        1
    }

    /// Checks that `theta` is a valid parameter vector for this family.
    pub fn validate(self, theta: &ParamVector) -> Result<(), DistributionError> {
        if theta.dim() != self.param_dim() {
            return Err(DistributionError::DimensionMismatch {
                left: theta.dim(),
                right: self.param_dim(),
            });
        }
        let v = theta.value();
        if !v.is_finite() {
            return Err(DistributionError::InvalidParameter {
                family: self,
                reason: format!("non-finite component {v}"),
            });
        }
        if self == Family::ExponentialByMean && v <= 0.0 {
            return Err(DistributionError::InvalidParameter {
                family: self,
                reason: format!("exponential mean must be strictly positive, got {v}"),
            });
        }
        Ok(())
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::NormalUnitVariance => "normal_unit_variance",
            Family::ExponentialByMean => "exponential_by_mean",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Distribution parameter vector θ.
///
/// Stored as a plain real vector; the owning action's family dictates
/// the dimension (1 for both supported families) and the component
/// domain. Serializes as a bare JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(components: Vec<f64>) -> Self {
        ParamVector(components)
    }

    /// One-dimensional parameter (the common case here).
    pub fn scalar(value: f64) -> Self {
        ParamVector(vec![value])
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// First component; the mean for both supported families.
    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// Exact component-wise equality (bit-level on each float).
    pub fn identical(&self, other: &ParamVector) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl From<f64> for ParamVector {
    fn from(v: f64) -> Self {
        ParamVector::scalar(v)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("invalid parameter for {family}: {reason}")]
    InvalidParameter { family: Family, reason: String },
    #[error("parameter dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("observation {x} outside the support of {family}")]
    OutsideSupport { family: Family, x: f64 },
}

/// Log₂-density of `x` under the family with parameter `theta`, in bits.
///
/// An exponential observation below 0 is a support error rather than
/// −∞: the simulator never generates such a value, so receiving one
/// means the observation and the instance are out of sync.
pub fn log_likelihood(
    family: Family,
    theta: &ParamVector,
    x: f64,
) -> Result<f64, DistributionError> {
    let affine = affine_log_density(family, theta)?;
    if family == Family::ExponentialByMean && x < 0.0 {
        return Err(DistributionError::OutsideSupport { family, x });
    }
    Ok(affine.intercept + affine.slope * x + base_log_density(family, x))
}

/// θ-dependent part of the log₂-density: log₂ f(x; θ) = intercept + slope·x + b(x)
/// with b(x) shared by every parameter of the family (see [`base_log_density`]).
///
/// Pairwise LLR increments therefore reduce to differences of these
/// affine forms, and a stage only needs the running sample count and
/// observation sum to reconstruct every accumulated LLR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineLogDensity {
    pub intercept: f64,
    pub slope: f64,
}

pub fn affine_log_density(
    family: Family,
    theta: &ParamVector,
) -> Result<AffineLogDensity, DistributionError> {
    family.validate(theta)?;
    let m = theta.value();
    Ok(match family {
        Family::NormalUnitVariance => {
            // log₂ f = −log₂√(2π) − (x−μ)²·log₂e/2; the −x²·log₂e/2 piece is θ-free.
            let half_log2e = LOG2_E / 2.0;
            AffineLogDensity {
                intercept: -0.5 * (std::f64::consts::TAU).ln() * LOG2_E - half_log2e * m * m,
                slope: LOG2_E * m,
            }
        }
        Family::ExponentialByMean => AffineLogDensity {
            intercept: -m.ln() * LOG2_E,
            slope: -LOG2_E / m,
        },
    })
}

/// θ-free remainder of the log₂-density (see [`affine_log_density`]).
pub fn base_log_density(family: Family, x: f64) -> f64 {
    match family {
        Family::NormalUnitVariance => -0.5 * LOG2_E * x * x,
        Family::ExponentialByMean => 0.0,
    }
}

/// Draws one observation from the family.
pub fn sample<R: Rng + ?Sized>(
    family: Family,
    theta: &ParamVector,
    rng: &mut R,
) -> Result<f64, DistributionError> {
    family.validate(theta)?;
    let m = theta.value();
    Ok(match family {
        Family::NormalUnitVariance => Normal::new(m, 1.0).unwrap().sample(rng),
        Family::ExponentialByMean => Exp::new(1.0 / m).unwrap().sample(rng),
    })
}

/// Closed-form KL divergence D(f(·;θᵢ) ‖ f(·;θⱼ)) in bits.
///
/// Normal: (μᵢ−μⱼ)²/(2 ln 2). Exponential by mean: (ln(mⱼ/mᵢ) + mᵢ/mⱼ − 1)/ln 2.
pub fn kl_divergence(
    family: Family,
    theta_i: &ParamVector,
    theta_j: &ParamVector,
) -> Result<f64, DistributionError> {
    family.validate(theta_i)?;
    family.validate(theta_j)?;
    let (a, b) = (theta_i.value(), theta_j.value());
    Ok(match family {
        Family::NormalUnitVariance => {
            let d = a - b;
            d * d * LOG2_E / 2.0
        }
        Family::ExponentialByMean => ((b / a).ln() + a / b - 1.0) * LOG2_E,
    })
}

/// Squared ℓ₂ distance ‖θᵢ − θⱼ‖² between parameter vectors.
pub fn squared_param_distance(
    theta_i: &ParamVector,
    theta_j: &ParamVector,
) -> Result<f64, DistributionError> {
    if theta_i.dim() != theta_j.dim() {
        return Err(DistributionError::DimensionMismatch {
            left: theta_i.dim(),
            right: theta_j.dim(),
        });
    }
    Ok(theta_i
        .components()
        .iter()
        .zip(theta_j.components())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}
