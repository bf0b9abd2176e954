//! Bounded per-coefficient channel densities.
//!
//! A [`ChannelDensity`] is the transmitter-side law of one unknown canonical
//! coefficient: a probability density supported on an interval inside
//! `(1/M, M)`, with a finite peak `f_max` and a declared power-scaling
//! exponent `alpha` such that `f_max <= C * P^(alpha/2)`. Families are
//! restricted to shapes with closed-form interval probabilities so that
//! bound checks downstream never depend on quadrature error.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

/// Default coefficient bound `M` used when a channel does not specify one.
pub const DEFAULT_BOUND_M: f64 = 4.0;

/// Default witness constant `C` in `f_max <= C * P^(alpha/2)`.
pub const DEFAULT_SCALE_C: f64 = 2.0;

/// Relative tolerance for the unit-mass quadrature check.
const NORMALIZATION_RTOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DensityError {
    #[error("support ({0}, {1}) is empty or outside (1/M, M) for M = {2}")]
    InvalidSupport(f64, f64, f64),
    #[error("alpha = {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("density integrates to {0}, not 1 (relative tolerance 1e-9)")]
    NotNormalized(f64),
    #[error("density peak {peak} exceeds declared f_max {f_max}")]
    PeakAboveFmax { peak: f64, f_max: f64 },
    #[error("f_max = {f_max} exceeds witness C * P^(alpha/2) = {witness}")]
    ScalingWitness { f_max: f64, witness: f64 },
    #[error("atomic law: mass on a zero-measure set admits no bounded density")]
    AtomicLaw,
    #[error("quantization cell narrower than floating-point resolution (B = {0})")]
    PrecisionExhausted(u32),
    #[error("value {0} outside density support ({1}, {2})")]
    OutOfSupport(f64, f64, f64),
    #[error("interval [{0}, {1}] has lo > hi")]
    InvalidInterval(f64, f64),
    #[error("truncated gaussian has non-positive std dev {0}")]
    InvalidStdDev(f64),
}

/// Density family tag. Each family has closed-form cdf and interval mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DensityFamily {
    /// Uniform over the support interval.
    Uniform,
    /// Gaussian restricted and renormalized to the support interval.
    TruncatedGaussian { mean: f64, std_dev: f64 },
    /// Uniform prior restricted to one of `2^feedback_bits` equal cells.
    QuantizedPosterior {
        feedback_bits: u32,
        prior_support: (f64, f64),
    },
}

/// A bounded probability density for one unknown channel coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDensity {
    family: DensityFamily,
    support: (f64, f64),
    f_max: f64,
    alpha: f64,
    power: f64,
    scale_c: f64,
}

impl ChannelDensity {
    /// Uniform density on `(lo, hi)`, declared non-scaling (`alpha = 0`).
    pub fn uniform(lo: f64, hi: f64, power: f64) -> Result<Self, DensityError> {
        Self::new(DensityFamily::Uniform, (lo, hi), power, 0.0, DEFAULT_SCALE_C)
    }

    /// Uniform density of width `P^(-alpha/2)` centered at 1, so that
    /// `f_max = P^(alpha/2)` exactly. This is the stock density for
    /// slope experiments where the peak must track the power.
    pub fn uniform_scaled(power: f64, alpha: f64) -> Result<Self, DensityError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(DensityError::InvalidAlpha(alpha));
        }
        let width = power.powf(-alpha / 2.0);
        let lo = 1.0 - width / 2.0;
        Self::new(
            DensityFamily::Uniform,
            (lo, lo + width),
            power,
            alpha,
            DEFAULT_SCALE_C,
        )
    }

    /// Gaussian with the given location and scale, truncated to `(lo, hi)`.
    pub fn truncated_gaussian(
        mean: f64,
        std_dev: f64,
        lo: f64,
        hi: f64,
        power: f64,
    ) -> Result<Self, DensityError> {
        if !(std_dev > 0.0) {
            return Err(DensityError::InvalidStdDev(std_dev));
        }
        Self::new(
            DensityFamily::TruncatedGaussian { mean, std_dev },
            (lo, hi),
            power,
            0.0,
            DEFAULT_SCALE_C,
        )
    }

    /// General constructor; validates every invariant before returning.
    pub fn new(
        family: DensityFamily,
        support: (f64, f64),
        power: f64,
        alpha: f64,
        scale_c: f64,
    ) -> Result<Self, DensityError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(DensityError::InvalidAlpha(alpha));
        }
        let peak = analytic_peak(&family, support)?;
        // f_max is at least 1 by convention, so products of per-slot peaks
        // can only grow when slots are added.
        let f_max = peak.max(1.0);
        // The witness constant is recorded, never asserted to a fixed value;
        // it absorbs whatever constant the construction actually needs.
        let witness_floor = f_max / power.powf(alpha / 2.0);
        let scale_c = scale_c.max(witness_floor);
        let d = Self {
            family,
            support,
            f_max,
            alpha,
            power,
            scale_c,
        };
        d.validate(DEFAULT_BOUND_M)?;
        Ok(d)
    }

    /// Checks all invariants against the coefficient bound `M`.
    pub fn validate(&self, bound_m: f64) -> Result<(), DensityError> {
        let (lo, hi) = self.support;
        if !(lo < hi) || lo < 1.0 / bound_m - 1e-12 || hi > bound_m + 1e-12 {
            return Err(DensityError::InvalidSupport(lo, hi, bound_m));
        }
        let mass = integrate_simpson(|g| self.pdf(g), lo, hi, 1 << 14);
        if (mass - 1.0).abs() > NORMALIZATION_RTOL {
            return Err(DensityError::NotNormalized(mass));
        }
        let peak = analytic_peak(&self.family, self.support)?;
        if peak > self.f_max * (1.0 + 1e-12) {
            return Err(DensityError::PeakAboveFmax {
                peak,
                f_max: self.f_max,
            });
        }
        let witness = self.scale_c * self.power.powf(self.alpha / 2.0);
        if self.f_max > witness * (1.0 + 1e-12) {
            return Err(DensityError::ScalingWitness {
                f_max: self.f_max,
                witness,
            });
        }
        Ok(())
    }

    pub fn family(&self) -> &DensityFamily {
        &self.family
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// The recorded O(.) witness pair `(alpha, C)` with `f_max <= C * P^(alpha/2)`.
    pub fn scaling_witness(&self) -> (f64, f64) {
        (self.alpha, self.scale_c)
    }

    /// Density value at `g` (0 outside the support).
    pub fn pdf(&self, g: f64) -> f64 {
        let (lo, hi) = self.support;
        if g < lo || g > hi {
            return 0.0;
        }
        match &self.family {
            DensityFamily::Uniform | DensityFamily::QuantizedPosterior { .. } => 1.0 / (hi - lo),
            DensityFamily::TruncatedGaussian { mean, std_dev } => {
                let n = Normal::new(0.0, 1.0).expect("unit normal");
                let z_mass = n.cdf((hi - mean) / std_dev) - n.cdf((lo - mean) / std_dev);
                let z = (g - mean) / std_dev;
                let phi = (-0.5 * z * z).exp() / (std_dev * (2.0 * std::f64::consts::PI).sqrt());
                phi / z_mass
            }
        }
    }

    /// P(G <= g), closed form per family.
    pub fn cdf(&self, g: f64) -> f64 {
        let (lo, hi) = self.support;
        if g <= lo {
            return 0.0;
        }
        if g >= hi {
            return 1.0;
        }
        match &self.family {
            DensityFamily::Uniform | DensityFamily::QuantizedPosterior { .. } => {
                (g - lo) / (hi - lo)
            }
            DensityFamily::TruncatedGaussian { mean, std_dev } => {
                let n = Normal::new(0.0, 1.0).expect("unit normal");
                let c_lo = n.cdf((lo - mean) / std_dev);
                let c_hi = n.cdf((hi - mean) / std_dev);
                (n.cdf((g - mean) / std_dev) - c_lo) / (c_hi - c_lo)
            }
        }
    }

    /// Quantile function, the inverse of [`cdf`](Self::cdf) on `[0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let (lo, hi) = self.support;
        let u = u.clamp(0.0, 1.0);
        match &self.family {
            DensityFamily::Uniform | DensityFamily::QuantizedPosterior { .. } => {
                lo + u * (hi - lo)
            }
            DensityFamily::TruncatedGaussian { mean, std_dev } => {
                let n = Normal::new(0.0, 1.0).expect("unit normal");
                let c_lo = n.cdf((lo - mean) / std_dev);
                let c_hi = n.cdf((hi - mean) / std_dev);
                let x = mean + std_dev * n.inverse_cdf(c_lo + u * (c_hi - c_lo));
                x.clamp(lo, hi)
            }
        }
    }

    /// Exact probability mass of `[lo, hi]` intersected with the support.
    ///
    /// Always satisfies `result <= f_max * (hi - lo)`.
    pub fn interval_probability(&self, lo: f64, hi: f64) -> Result<f64, DensityError> {
        if lo > hi {
            return Err(DensityError::InvalidInterval(lo, hi));
        }
        let (a, b) = self.support;
        let lo = lo.max(a);
        let hi = hi.min(b);
        if lo >= hi {
            return Ok(0.0);
        }
        Ok(self.cdf(hi) - self.cdf(lo))
    }

    /// Posterior after observing `feedback_bits` bits of uniform-cell
    /// quantized feedback about the true value `true_g`: the prior
    /// restricted and renormalized to the cell containing `true_g`.
    pub fn build_quantized_posterior(
        &self,
        true_g: f64,
        feedback_bits: u32,
    ) -> Result<ChannelDensity, DensityError> {
        let (a, b) = self.support;
        if true_g < a || true_g > b {
            return Err(DensityError::OutOfSupport(true_g, a, b));
        }
        if feedback_bits >= 1020 {
            return Err(DensityError::PrecisionExhausted(feedback_bits));
        }
        let cells = (feedback_bits as f64).exp2();
        let width = (b - a) / cells;
        let idx = (((true_g - a) / width).floor()).min(cells - 1.0).max(0.0);
        let cell_lo = a + idx * width;
        let cell_hi = cell_lo + width;
        if !(cell_lo < cell_hi) || width < (a.abs() + b.abs()) * f64::EPSILON * 4.0 {
            return Err(DensityError::PrecisionExhausted(feedback_bits));
        }
        let family = match &self.family {
            DensityFamily::Uniform => DensityFamily::QuantizedPosterior {
                feedback_bits,
                prior_support: (a, b),
            },
            DensityFamily::QuantizedPosterior {
                feedback_bits: prior_bits,
                prior_support,
            } => DensityFamily::QuantizedPosterior {
                feedback_bits: prior_bits + feedback_bits,
                prior_support: *prior_support,
            },
            DensityFamily::TruncatedGaussian { mean, std_dev } => DensityFamily::TruncatedGaussian {
                mean: *mean,
                std_dev: *std_dev,
            },
        };
        let peak = analytic_peak(&family, (cell_lo, cell_hi))?;
        let f_max = peak.max(1.0);
        // Declare the scaling the posterior actually has: alpha capped at 1,
        // with the remainder absorbed into the witness constant.
        let alpha = (2.0 * f_max.log2() / self.power.log2()).clamp(0.0, 1.0);
        let scale_c = self
            .scale_c
            .max(f_max / self.power.powf(alpha / 2.0));
        let d = ChannelDensity {
            family,
            support: (cell_lo, cell_hi),
            f_max,
            alpha,
            power: self.power,
            scale_c,
        };
        d.validate(DEFAULT_BOUND_M)?;
        Ok(d)
    }

    /// Draws one coefficient from the density.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.gen::<f64>())
    }

    /// Expectation `E[f(G)]` by composite Simpson quadrature over the support.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let (a, b) = self.support;
        integrate_simpson(|g| f(g) * self.pdf(g), a, b, 1 << 14)
    }
}

/// Analytic supremum of the density over its support.
fn analytic_peak(family: &DensityFamily, support: (f64, f64)) -> Result<f64, DensityError> {
    let (lo, hi) = support;
    if !(lo < hi) {
        return Err(DensityError::InvalidSupport(lo, hi, DEFAULT_BOUND_M));
    }
    Ok(match family {
        DensityFamily::Uniform | DensityFamily::QuantizedPosterior { .. } => 1.0 / (hi - lo),
        DensityFamily::TruncatedGaussian { mean, std_dev } => {
            let n = Normal::new(0.0, 1.0).expect("unit normal");
            let z_mass = n.cdf((hi - mean) / std_dev) - n.cdf((lo - mean) / std_dev);
            // Peak sits at the mode if it is inside the support, else at the
            // nearer endpoint.
            let at = mean.clamp(lo, hi);
            let z = (at - mean) / std_dev;
            let phi = (-0.5 * z * z).exp() / (std_dev * (2.0 * std::f64::consts::PI).sqrt());
            phi / z_mass
        }
    })
}

/// Composite Simpson rule with `n` (even) subintervals.
pub(crate) fn integrate_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    debug_assert!(n % 2 == 0 && n >= 2);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Per-user channel knowledge at the transmitter.
///
/// A user marked perfect carries no density by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum UserCsit {
    /// The transmitter knows this user's coefficients exactly.
    Perfect,
    /// Finite precision: only a bounded-density posterior is available,
    /// optionally refined by `feedback_bits` per coefficient per symbol.
    Finite {
        density: ChannelDensity,
        feedback_bits: Option<u32>,
    },
}

/// CSIT for all users of a broadcast instance. Index 0 is user 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsitState {
    users: Vec<UserCsit>,
}

impl CsitState {
    pub fn new(users: Vec<UserCsit>) -> Self {
        Self { users }
    }

    /// The PN setting: user 1 perfect, remaining users finite precision.
    pub fn pn(finite: Vec<ChannelDensity>) -> Self {
        let mut users = vec![UserCsit::Perfect];
        users.extend(finite.into_iter().map(|density| UserCsit::Finite {
            density,
            feedback_bits: None,
        }));
        Self { users }
    }

    pub fn user(&self, k: usize) -> &UserCsit {
        &self.users[k - 1]
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }
}
