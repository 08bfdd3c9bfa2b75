//! Gumbel broadcast-time law, its k-fold convolutions and the closed-form
//! saddle-point approximation used for fitting block-time histograms.
//!
//! `(location, scale)` are the literal parameters of the double-exponential
//! CCDF `1 - exp(-exp(-(t - location) / scale))`. They are *not* the mean and
//! standard deviation of the law: the mean is `location + γ·scale` and the
//! standard deviation is `π·scale/√6`. Exact moments are exposed separately
//! through [`moments_approx`] and [`MomentSummary`].

mod convolution;
mod gumbel;
mod moments;
pub mod quadrature;
mod saddle;

use std::f64::consts::PI;

use thiserror::Error;

pub use convolution::{exact_conv_pdf, exact_conv_pdf_with, ConvolutionDomain, ConvolutionOptions};
pub use gumbel::{
    approx_normalization, approx_pdf_k, gumbel_ccdf, gumbel_cdf, gumbel_pdf, gumbel_quantile, gumbel_sample,
    normal_limit_pdf,
};
pub use moments::{
    analytic_broadcast_mean, analytic_broadcast_mean_through, analytic_broadcast_variance,
    analytic_broadcast_variance_through, harmonic, moments_approx, MomentSummary,
};
pub use saddle::{saddle_exponent, saddle_exponent_slope, saddle_point_location};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Apéry's constant ζ(3).
pub const APERY: f64 = 1.202_056_903_159_594_3;

/// Skewness of a single Gumbel variable, `12√6·ζ(3)/π³ ≈ 1.1395`.
pub fn gumbel_skewness() -> f64 {
    12.0 * 6f64.sqrt() * APERY / PI.powi(3)
}

/// Largest supported convolution order.
pub const MAX_ORDER: u32 = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("invalid Gumbel parameters (location={location}, scale={scale}): scale must be finite and > 0, location finite")]
    InvalidParams { location: f64, scale: f64 },
    #[error("convolution order {0} outside 1..={MAX_ORDER}")]
    InvalidOrder(u32),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature failed to converge after {evaluations} evaluations (estimate {estimate:e}, error estimate {error:e})")]
    Quadrature {
        estimate: f64,
        error: f64,
        evaluations: usize,
    },
}

pub type Result<T, E = DistError> = std::result::Result<T, E>;

/// Location/scale pair of a Gumbel law, both in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GumbelParams {
    location: f64,
    scale: f64,
}

impl GumbelParams {
    pub fn new(location: f64, scale: f64) -> Result<Self> {
        if !location.is_finite() || !scale.is_finite() || scale <= 0.0 {
            return Err(DistError::InvalidParams { location, scale });
        }
        Ok(Self { location, scale })
    }

    /// Standard Gumbel, location 0 and scale 1.
    pub fn standard() -> Self {
        Self {
            location: 0.0,
            scale: 1.0,
        }
    }

    /// Parameters whose law has the given mean and standard deviation.
    pub fn from_moments(mean: f64, std_dev: f64) -> Result<Self> {
        let scale = std_dev * 6f64.sqrt() / PI;
        Self::new(mean - EULER_GAMMA * scale, scale)
    }

    #[inline]
    pub fn location(&self) -> f64 {
        self.location
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Exact mean, `location + γ·scale`.
    pub fn mean(&self) -> f64 {
        self.location + EULER_GAMMA * self.scale
    }

    /// Exact standard deviation, `π·scale/√6`.
    pub fn std_dev(&self) -> f64 {
        PI * self.scale / 6f64.sqrt()
    }

    /// Multiply location and scale by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.location * factor, self.scale * factor)
    }
}

/// Number of independent Gumbel phases summed into one block time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConvolutionOrder(u32);

impl ConvolutionOrder {
    pub fn new(k: u32) -> Result<Self> {
        if (1..=MAX_ORDER).contains(&k) {
            Ok(Self(k))
        } else {
            Err(DistError::InvalidOrder(k))
        }
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    #[inline]
    pub(crate) fn as_f64(self) -> f64 {
        f64::from(self.0)
    }
}

impl TryFrom<u32> for ConvolutionOrder {
    type Error = DistError;

    fn try_from(k: u32) -> Result<Self> {
        Self::new(k)
    }
}

impl std::fmt::Display for ConvolutionOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Per-hop coefficients linking the transfer time `Δt` to the Gumbel
/// parameters of one full broadcast among `n_validators` nodes:
/// `location = a·N·ln N` and `scale = b·N` with `a = 2Δt`, `b = (π/√3)Δt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BroadcastCoefficients {
    pub a: f64,
    pub b: f64,
    pub delta_t: f64,
    pub n_validators: u32,
}

impl BroadcastCoefficients {
    pub fn from_delta_t(delta_t: f64, n_validators: u32) -> Result<Self> {
        if !(delta_t.is_finite() && delta_t > 0.0) {
            return Err(DistError::Domain(format!(
                "transfer time must be finite and > 0, got {delta_t}"
            )));
        }
        if n_validators < 2 {
            return Err(DistError::Domain(format!(
                "need at least 2 validators, got {n_validators}"
            )));
        }
        Ok(Self {
            a: 2.0 * delta_t,
            b: PI / 3f64.sqrt() * delta_t,
            delta_t,
            n_validators,
        })
    }

    pub fn location(&self) -> f64 {
        let n = f64::from(self.n_validators);
        self.a * n * n.ln()
    }

    pub fn scale(&self) -> f64 {
        self.b * f64::from(self.n_validators)
    }

    pub fn gumbel_params(&self) -> Result<GumbelParams> {
        GumbelParams::new(self.location(), self.scale())
    }
}

pub(crate) fn check_finite(t: f64) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(DistError::Domain(format!("argument must be finite, got {t}")))
    }
}

/// `ln(n!)` by direct summation; exact enough for the orders used here and
/// free of overflow.
pub(crate) fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|i| f64::from(i).ln()).sum()
}
