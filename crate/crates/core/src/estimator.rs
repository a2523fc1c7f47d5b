//! Control-variate estimation of ensemble averages.
//!
//! `X` is an expensive quantity (a full-field conductivity component) and `Y`
//! a cheap surrogate of it evaluated on the same realizations. For any `ξ`,
//! `Z = X - ξ (Y - E(Y))` has the same expectation as `X`; its variance
//! `var X - 2ξ cov(X, Y) + ξ² var Y` is smallest at `ξ* = cov(X, Y) / var Y`,
//! where `var Z = (1 - ρ²) var X`. The gain is summarised by the efficiency
//! index `1 / √(1 - ρ²)`, the factor by which the confidence interval shrinks
//! at equal sample size.
//!
//! All moments use the `1/M` normalisation by default.

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Confidence multiplier for (approximately) 99% intervals.
pub const DEFAULT_ALPHA: f64 = 2.6;
/// Exact two-sided 99% standard normal quantile.
pub const EXACT_ALPHA_99: f64 = 2.575_829_303_548_900_4;

const SATURATION: f64 = 1.0 - 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("at least 2 samples are required, got {0}")]
    TooFewSamples(usize),
    #[error("paired samples differ in length: {x} values of X, {y} of Y")]
    LengthMismatch { x: usize, y: usize },
    #[error("surrogate has zero variance")]
    DegenerateSurrogate,
    #[error("non-finite value in sample")]
    NonFinite,
}

type Result<T> = std::result::Result<T, EstimatorError>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by `M`.
    #[default]
    Biased,
    /// Divide by `M - 1`.
    Unbiased,
}

/// Values of `X` and `Y` on the same `M` realizations.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedSample {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl PairedSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(EstimatorError::LengthMismatch { x: x.len(), y: y.len() });
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(EstimatorError::NonFinite);
        }
        Ok(PairedSample { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub cov_xy: f64,
    pub count: usize,
}

impl Moments {
    /// `cov / √(var_x var_y)`, zero when either variance vanishes.
    pub fn correlation(&self) -> f64 {
        let d = (self.var_x * self.var_y).sqrt();
        if d > 0.0 {
            (self.cov_xy / d).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Means, variances and covariance with the `1/M` normalisation.
pub fn empirical_moments(sample: &PairedSample) -> Result<Moments> {
    empirical_moments_with(sample, Normalization::Biased)
}

pub fn empirical_moments_with(sample: &PairedSample, normalization: Normalization) -> Result<Moments> {
    let m = sample.len();
    if m < 2 {
        return Err(EstimatorError::TooFewSamples(m));
    }
    let (mx, my) = (mean(&sample.x), mean(&sample.y));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in sample.x.iter().zip(&sample.y) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let d = match normalization {
        Normalization::Biased => m as f64,
        Normalization::Unbiased => (m - 1) as f64,
    };
    Ok(Moments { mean_x: mx, mean_y: my, var_x: sxx / d, var_y: syy / d, cov_xy: sxy / d, count: m })
}

/// `ξ* = cov(X, Y) / var(Y)`.
pub fn xi_star(cov_xy: f64, var_y: f64) -> Result<f64> {
    if var_y > 0.0 {
        Ok(cov_xy / var_y)
    } else {
        Err(EstimatorError::DegenerateSurrogate)
    }
}

/// Estimate of `E(Y)` from a large, independent surrogate-only sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateMean {
    pub mean: f64,
    pub ci_halfwidth: f64,
    pub sample_count: usize,
}

impl SurrogateMean {
    pub fn from_samples(values: &[f64], alpha: f64) -> Result<Self> {
        let m = values.len();
        if m < 2 {
            return Err(EstimatorError::TooFewSamples(m));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EstimatorError::NonFinite);
        }
        let mu = mean(values);
        let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / m as f64;
        Ok(SurrogateMean { mean: mu, ci_halfwidth: alpha * var.sqrt() / (m as f64).sqrt(), sample_count: m })
    }

    /// A mean known without error.
    pub fn exact(mean: f64) -> Self {
        SurrogateMean { mean, ci_halfwidth: 0.0, sample_count: usize::MAX }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvEstimate {
    /// `mean(x) - ξ (mean(y) - E(Y))`.
    pub mean: f64,
    /// `α σ_Z / √M`.
    pub ci_halfwidth: f64,
    pub plain_mean: f64,
    /// `α σ_X / √M`.
    pub plain_ci_halfwidth: f64,
    /// Coefficient actually used (`ξ*`, or 0 for a degenerate surrogate).
    pub xi_star: f64,
    pub correlation: f64,
    pub efficiency_index: f64,
    pub effective_efficiency_index: f64,
    /// `ci_halfwidth + |ξ| ci(E(Y))`.
    pub total_ci_halfwidth: f64,
    pub var_z: f64,
    pub alpha: f64,
    pub sample_count: usize,
    pub surrogate_count: usize,
    /// `|ρ| ≥ 1 - 1e-12`: the efficiency index is not meaningful.
    pub saturated: bool,
    /// The surrogate had zero variance and plain Monte-Carlo was used.
    pub degenerate: bool,
}

/// Control-variate estimate with the optimal coefficient `ξ*`.
///
/// A surrogate with zero variance falls back to `ξ = 0` (plain Monte-Carlo)
/// with a warning.
pub fn control_variate_estimate(sample: &PairedSample, surrogate: &SurrogateMean, alpha: f64) -> Result<CvEstimate> {
    let mo = empirical_moments(sample)?;
    match xi_star(mo.cov_xy, mo.var_y) {
        Ok(xi) => Ok(build(sample, &mo, surrogate, xi, alpha, false)),
        Err(EstimatorError::DegenerateSurrogate) => {
            warn!("surrogate has zero variance; falling back to plain Monte-Carlo");
            Ok(build(sample, &mo, surrogate, 0.0, alpha, true))
        }
        Err(e) => Err(e),
    }
}

/// Control-variate estimate with a prescribed coefficient.
pub fn estimate_with_xi(sample: &PairedSample, surrogate: &SurrogateMean, xi: f64, alpha: f64) -> Result<CvEstimate> {
    let mo = empirical_moments(sample)?;
    Ok(build(sample, &mo, surrogate, xi, alpha, false))
}

fn build(sample: &PairedSample, mo: &Moments, surrogate: &SurrogateMean, xi: f64, alpha: f64, degenerate: bool) -> CvEstimate {
    let m = sample.len();
    let sqrt_m = (m as f64).sqrt();
    if surrogate.sample_count < m {
        warn!("surrogate mean uses {} samples, fewer than the {m} paired ones", surrogate.sample_count);
    }
    let z: Vec<f64> = sample.x.iter().zip(&sample.y).map(|(x, y)| x - xi * (y - surrogate.mean)).collect();
    let mz = mean(&z);
    let var_z = z.iter().map(|v| (v - mz) * (v - mz)).sum::<f64>() / m as f64;
    let ci_z = alpha * var_z.sqrt() / sqrt_m;
    let ci_x = alpha * mo.var_x.sqrt() / sqrt_m;
    let rho = if degenerate { 0.0 } else { mo.correlation() };
    let saturated = rho.abs() >= SATURATION;
    let efficiency = if saturated { f64::INFINITY } else { 1.0 / (1.0 - rho * rho).sqrt() };
    CvEstimate {
        mean: mo.mean_x - xi * (mo.mean_y - surrogate.mean),
        ci_halfwidth: ci_z,
        plain_mean: mo.mean_x,
        plain_ci_halfwidth: ci_x,
        xi_star: xi,
        correlation: rho,
        efficiency_index: efficiency,
        effective_efficiency_index: effective_efficiency(ci_x, efficiency, xi, surrogate.ci_halfwidth),
        total_ci_halfwidth: ci_z + xi.abs() * surrogate.ci_halfwidth,
        var_z,
        alpha,
        sample_count: m,
        surrogate_count: surrogate.sample_count,
        saturated,
        degenerate,
    }
}

/// Efficiency once the uncertainty on `E(Y)` is charged to the estimate:
/// `ci_x / (ci_x / efficiency + |ξ*| ci_surrogate)`.
///
/// Returns `+∞` when the total interval vanishes.
pub fn effective_efficiency(ci_x: f64, efficiency: f64, xi_star: f64, ci_surrogate_mean: f64) -> f64 {
    let total = ci_x / efficiency + xi_star.abs() * ci_surrogate_mean;
    if total > 0.0 {
        ci_x / total
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

/// `mean ∓ α σ / √M`.
pub fn confidence_interval(mean: f64, sigma: f64, count: usize, alpha: f64) -> Interval {
    let h = alpha * sigma / (count as f64).sqrt();
    Interval { lower: mean - h, upper: mean + h }
}

/// `(v - reference) / reference` for every value.
pub fn relative_errors(values: &[f64], reference: f64) -> Vec<f64> {
    values.iter().map(|v| (v - reference) / reference).collect()
}
