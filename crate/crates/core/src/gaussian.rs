//! Standard-normal kernels and the discretization of latent risk factors
//! onto `2^n` grid points.
//!
//! The distribution and quantile functions are the `F` and `F^-1` used by the
//! conditional default model:
//!
//! ```text
//! PD(z) = F( (F^-1(p0) - sqrt(rho) * sum_i alpha_i z_i) / sqrt(1 - rho) )
//! ```

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{domain, Result};

/// Largest register width accepted for a single factor.
pub const MAX_FACTOR_QUBITS: usize = 20;

/// Default truncation of the discretized normal, in standard deviations.
pub const DEFAULT_BOUND_SIGMAS: f64 = 3.0;

/// Standard normal CDF.
///
/// Evaluated through the fdlibm `erfc` (via `libm`, about 1 ulp over the real
/// line), which keeps the lower tail free of cancellation.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("normal cdf needs a finite argument, got {x}"));
    }
    Ok(cdf(x))
}

#[inline]
pub(crate) fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

#[inline]
pub(crate) fn pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal quantile.
///
/// Newton iteration on the CDF from a rational starting guess, falling back
/// to bisection whenever a step leaves the current bracket.
pub fn std_normal_ppf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("normal quantile needs p in (0,1), got {p}"));
    }
    Ok(ppf(p))
}

pub(crate) fn ppf(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    let mut x = initial_guess(p).clamp(lo, hi);

    for _ in 0..200 {
        let diff = cdf(x) - p;
        if diff == 0.0 {
            return x;
        }
        if diff > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let density = pdf(x);
        let newton = if density > 0.0 { x - diff / density } else { f64::NAN };
        let next = if newton.is_finite() && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
            return next;
        }
        x = next;
    }
    x
}

// Tail-aware starting point (Abramowitz & Stegun 26.2.23, |error| < 4.5e-4).
fn initial_guess(p: f64) -> f64 {
    let q = p.min(1.0 - p);
    let t = (-2.0 * q.ln()).sqrt();
    let x = t
        - (2.515_517 + 0.802_853 * t + 0.010_328 * t * t)
            / (1.0 + 1.432_788 * t + 0.189_269 * t * t + 0.001_308 * t * t * t);
    if p < 0.5 {
        -x
    } else {
        x
    }
}

/// A truncated standard-normal-like variable discretized onto `2^n_z`
/// equally spaced points `z_i = a_z * i + b_z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorGrid {
    n_z: usize,
    z_min: f64,
    z_max: f64,
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl FactorGrid {
    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn z_min(&self) -> f64 {
        self.z_min
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    /// Slope `a_z` of the index-to-value map.
    pub fn step(&self) -> f64 {
        (self.z_max - self.z_min) / (self.len() - 1) as f64
    }

    /// Offset `b_z` of the index-to-value map.
    pub fn offset(&self) -> f64 {
        self.z_min
    }

    /// Value at the centre of the truncation range (not a grid point).
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.z_min + self.z_max)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }
}

/// Discretize `N(mean, std^2)` truncated to `mean ± bound_sigmas·std` onto
/// `2^n_z` points, with weights proportional to the density at each point.
pub fn discretize_normal(n_z: usize, mean: f64, std: f64, bound_sigmas: f64) -> Result<FactorGrid> {
    if n_z == 0 {
        return domain("a factor register needs at least one qubit");
    }
    if n_z > MAX_FACTOR_QUBITS {
        return domain(format!("factor register of {n_z} qubits exceeds {MAX_FACTOR_QUBITS}"));
    }
    if !(std > 0.0 && std.is_finite()) {
        return domain(format!("standard deviation must be positive, got {std}"));
    }
    if !(bound_sigmas > 0.0 && bound_sigmas.is_finite()) {
        return domain(format!("truncation bound must be positive, got {bound_sigmas}"));
    }
    if !mean.is_finite() {
        return domain("mean must be finite");
    }

    let n = 1usize << n_z;
    let z_min = mean - bound_sigmas * std;
    let z_max = mean + bound_sigmas * std;
    let step = (z_max - z_min) / (n - 1) as f64;
    let values: Vec<f64> = (0..n).map(|i| step * i as f64 + z_min).collect();
    let weights: Vec<f64> = values.iter().map(|&z| pdf((z - mean) / std)).collect();
    let total: f64 = weights.iter().sum();
    let probs = weights.into_iter().map(|w| w / total).collect();

    Ok(FactorGrid { n_z, z_min, z_max, values, probs })
}

/// `count` independent standard-normal factor grids of `n_z` qubits each.
pub fn standard_grids(count: usize, n_z: usize, bound_sigmas: f64) -> Result<Vec<FactorGrid>> {
    (0..count).map(|_| discretize_normal(n_z, 0.0, 1.0, bound_sigmas)).collect()
}

/// Conditional default probability under a multi-factor Gaussian model.
///
/// With a single factor and unit weight this is the one-factor Vasicek
/// formula.
pub fn conditional_pd(p0: f64, rho: f64, alphas: &[f64], z: &[f64]) -> Result<f64> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return domain(format!("default probability must lie in (0,1), got {p0}"));
    }
    if !(0.0..1.0).contains(&rho) {
        return domain(format!("sensitivity must lie in [0,1), got {rho}"));
    }
    if alphas.is_empty() || alphas.len() != z.len() {
        return domain(format!(
            "factor weights ({}) and realizations ({}) must be non-empty and equal length",
            alphas.len(),
            z.len()
        ));
    }
    let y: f64 = alphas.iter().zip(z).map(|(a, z)| a * z).sum();
    if !y.is_finite() {
        return domain("factor combination is not finite");
    }
    Ok(pd_given_y(ppf(p0), rho, y))
}

/// PD for a precomputed threshold `F^-1(p0)` and combined factor `y`.
///
/// Tails that round to exactly 0 or 1 are pulled back to the nearest
/// representable values inside the open unit interval.
#[inline]
pub(crate) fn pd_given_y(threshold: f64, rho: f64, y: f64) -> f64 {
    const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;
    cdf((threshold - rho.sqrt() * y) / (1.0 - rho).sqrt()).clamp(f64::MIN_POSITIVE, BELOW_ONE)
}

/// Rotation angle `2·asin(sqrt(p))` that loads probability `p` into `|1>`.
#[inline]
pub fn probability_angle(p: f64) -> f64 {
    2.0 * p.clamp(0.0, 1.0).sqrt().asin()
}
