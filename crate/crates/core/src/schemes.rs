//! Achievability side: transmission schemes on the noisy canonical channel.
//!
//! Rates come from closed-form Gaussian SINR expressions; the DoF slopes of
//! interest are an SINR-scaling phenomenon and decoding simulation would
//! only add noise around them. Trials average the expressions over channel
//! draws.

use crate::density::{ChannelDensity, DensityError};
use crate::fitting::{linear_fit, FitError, LinearFit};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SchemesError {
    #[error("alpha = {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("need >= {need} rate points spanning >= {decades} decades of P; got {got} points over {span:.2} decades")]
    InsufficientSpan {
        got: usize,
        need: usize,
        decades: f64,
        span: f64,
    },
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Which scheme produced a rate point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SchemeTag {
    /// Best-effort zero forcing against the quantized estimate, residual
    /// interference treated as noise.
    ZfQuantizedFeedback { alpha: f64 },
    /// Two-slot blind interference alignment in the PN setting.
    BlindIaPn,
}

/// One measured finite-P operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub power: f64,
    /// Per-user achievable rate in bits per channel use.
    pub rates: Vec<f64>,
    pub scheme: SchemeTag,
    /// Feedback bits per coefficient per symbol (0 when no feedback).
    pub feedback_bits: u32,
    /// Mean residual interference power at the finite-precision user.
    pub residual_power: f64,
}

impl RatePoint {
    pub fn sum_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    /// Rates are nonnegative and below the single-user cap with bounded
    /// gains, `1/2 log2(1 + P M^2)`.
    pub fn validate(&self, bound_m: f64) -> bool {
        let cap = 0.5 * (1.0 + self.power * bound_m * bound_m).log2();
        self.rates.iter().all(|&r| r >= 0.0 && r <= cap)
    }
}

/// Zero forcing with quantized feedback at rate `(alpha/2) log2 P`, i.e.
/// `B = ceil((alpha/2) log2 P)` bits for user 2's cross coefficient. User
/// 1's precoder nulls the quantized estimate; what leaks at user 2 is the
/// quantization error, whose power scales like `P^(1-alpha)`.
pub fn zf_quantized_feedback<R: Rng + ?Sized>(
    power: f64,
    alpha: f64,
    d: &ChannelDensity,
    trials: usize,
    rng: &mut R,
) -> Result<RatePoint, SchemesError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(SchemesError::InvalidAlpha(alpha));
    }
    let bits = ((alpha / 2.0) * power.log2()).ceil().max(0.0) as u32;
    let p1 = power / 2.0;
    let p2 = power / 2.0;
    // Uniform quantizer over the support: 2^B equal cells, estimate at the
    // cell center. Same cell geometry as the quantized-posterior density.
    let (lo, hi) = d.support();
    let cells = (bits as f64).exp2();
    let width = (hi - lo) / cells;
    let mut r1_acc = 0.0;
    let mut r2_acc = 0.0;
    let mut resid_acc = 0.0;
    for _ in 0..trials {
        let g = d.sample(rng);
        let idx = ((g - lo) / width).floor().clamp(0.0, cells - 1.0);
        let g_hat = lo + (idx + 0.5) * width;
        // v1 = [1, -g_hat]/sqrt(1 + g_hat^2) nulls [g_hat, 1]; v2 = [0, 1]
        // nulls user 1's channel [1, 0] exactly (perfect CSIT for user 1).
        let c_sq = 1.0 / (1.0 + g_hat * g_hat);
        let resid = c_sq * (g - g_hat) * (g - g_hat) * p1;
        r1_acc += 0.5 * (1.0 + c_sq * p1).log2();
        r2_acc += 0.5 * (1.0 + p2 / (1.0 + resid)).log2();
        resid_acc += resid;
    }
    let t = trials as f64;
    Ok(RatePoint {
        power,
        rates: vec![r1_acc / t, r2_acc / t],
        scheme: SchemeTag::ZfQuantizedFeedback { alpha },
        feedback_bits: bits,
        residual_power: resid_acc / t,
    })
}

/// Two-slot blind interference alignment in the PN setting: user 1's
/// channel changes across the two slots while user 2's stays constant.
/// Two symbols for user 1 ride both slots and are resolved from the 2x2
/// system; user 2's symbol is sent in the per-slot null space of user 1's
/// channel and survives the difference combiner interference-free.
pub fn blind_ia_pn<R: Rng + ?Sized>(
    power: f64,
    trials: usize,
    rng: &mut R,
) -> Result<RatePoint, SchemesError> {
    let pu = power / 4.0; // per-symbol power of each user-1 stream
    let pw = power / 2.0; // user-2 symbol power
    let mut r1_acc = 0.0;
    let mut r2_acc = 0.0;
    let draw = |rng: &mut R| 0.5 + rng.gen::<f64>();
    for _ in 0..trials {
        // Resample the probability-zero singular draws.
        let (h1a, h1b, h2, det) = loop {
            let h1a = [draw(rng), draw(rng)];
            let h1b = [draw(rng), draw(rng)];
            let h2 = [draw(rng), draw(rng)];
            let det = h1a[0] * h1b[1] - h1a[1] * h1b[0];
            if det.abs() > 1e-9 {
                break (h1a, h1b, h2, det);
            }
        };
        // User 1 resolves u from Y1(s) = h1(s).u + Z over the two slots:
        // per channel use, (1/4) log2 det(I + Pu H H^T).
        let hht = [
            [
                h1a[0] * h1a[0] + h1a[1] * h1a[1],
                h1a[0] * h1b[0] + h1a[1] * h1b[1],
            ],
            [
                h1a[0] * h1b[0] + h1a[1] * h1b[1],
                h1b[0] * h1b[0] + h1b[1] * h1b[1],
            ],
        ];
        let det_i_phh = (1.0 + pu * hht[0][0]) * (1.0 + pu * hht[1][1])
            - (pu * hht[0][1]) * (pu * hht[1][0]);
        r1_acc += 0.25 * det_i_phh.log2();
        let _ = det;
        // Null directions of user 1's channel per slot.
        let v = |h: [f64; 2]| {
            let norm = (h[0] * h[0] + h[1] * h[1]).sqrt();
            [-h[1] / norm, h[0] / norm]
        };
        let va = v(h1a);
        let vb = v(h1b);
        // The repeated interference h2.u cancels exactly in the difference;
        // user 2 decodes w from a gain of (h2.va - h2.vb) with noise power 2.
        let a = h2[0] * (va[0] - vb[0]) + h2[1] * (va[1] - vb[1]);
        r2_acc += 0.25 * (1.0 + a * a * pw / 2.0).log2();
    }
    let t = trials as f64;
    Ok(RatePoint {
        power,
        rates: vec![r1_acc / t, r2_acc / t],
        scheme: SchemeTag::BlindIaPn,
        feedback_bits: 0,
        residual_power: 0.0,
    })
}

/// A fitted DoF slope with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DofEstimate {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
}

/// Least-squares slope of rate against `(1/2) log2 P`. Requires at least 4
/// points spanning at least 4 decades of P.
pub fn slope_fit(points: &[(f64, f64)]) -> Result<DofEstimate, SchemesError> {
    let (min_p, max_p) = points.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &(p, _)| {
        (lo.min(p), hi.max(p))
    });
    let span = (max_p / min_p).log10();
    if points.len() < 4 || span < 4.0 - 1e-9 {
        return Err(SchemesError::InsufficientSpan {
            got: points.len(),
            need: 4,
            decades: 4.0,
            span,
        });
    }
    let xs: Vec<f64> = points.iter().map(|&(p, _)| 0.5 * p.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, r)| r).collect();
    let LinearFit {
        slope,
        intercept,
        slope_stderr,
    } = linear_fit(&xs, &ys)?;
    Ok(DofEstimate {
        slope,
        stderr: slope_stderr,
        intercept,
    })
}

/// Least-squares exponent of the residual interference power against P:
/// slope of `log2(residual)` on `log2(P)`.
pub fn residual_exponent_fit(points: &[(f64, f64)]) -> Result<DofEstimate, SchemesError> {
    let xs: Vec<f64> = points.iter().map(|&(p, _)| p.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, r)| r.max(1e-300).log2()).collect();
    let LinearFit {
        slope,
        intercept,
        slope_stderr,
    } = linear_fit(&xs, &ys)?;
    Ok(DofEstimate {
        slope,
        stderr: slope_stderr,
        intercept,
    })
}

/// The half-decade power grid the slope experiments run on.
pub fn power_grid(lo_exp10: f64, hi_exp10: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut e = lo_exp10;
    while e <= hi_exp10 + 1e-9 {
        grid.push(10f64.powf(e));
        e += 0.5;
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn slope_of_exact_line_is_one() {
        let pts: Vec<(f64, f64)> = [1e2, 1e4, 1e6, 1e8]
            .iter()
            .map(|&p: &f64| (p, 0.5 * p.log2()))
            .collect();
        let est = slope_fit(&pts).unwrap();
        assert!((est.slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slope_of_constant_is_zero() {
        let pts: Vec<(f64, f64)> = [1e2, 1e4, 1e6, 1e8].iter().map(|&p| (p, 3.0)).collect();
        let est = slope_fit(&pts).unwrap();
        assert!(est.slope.abs() < 1e-12);
    }

    #[test]
    fn slope_fit_refuses_short_span() {
        let pts = vec![(1e2, 1.0), (1e3, 2.0), (1e4, 3.0), (2e4, 3.1)];
        assert!(matches!(
            slope_fit(&pts),
            Err(SchemesError::InsufficientSpan { .. })
        ));
    }

    #[test]
    fn zf_quantizer_matches_posterior_cells() {
        let d = ChannelDensity::uniform(0.5, 1.5, 1e6).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(20);
        for bits in [0u32, 1, 3, 6] {
            let cells = (bits as f64).exp2();
            let width = 1.0 / cells;
            for _ in 0..50 {
                let g = d.sample(&mut rng);
                let idx = ((g - 0.5) / width).floor().clamp(0.0, cells - 1.0);
                let g_hat = 0.5 + (idx + 0.5) * width;
                let post = d.build_quantized_posterior(g, bits).unwrap();
                let (lo, hi) = post.support();
                assert!((g_hat - 0.5 * (lo + hi)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zf_rates_validate_and_scale() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let d = ChannelDensity::uniform(0.5, 1.5, 1e6).unwrap();
        let point = zf_quantized_feedback(1e6, 0.5, &d, 500, &mut rng).unwrap();
        assert!(point.validate(4.0));
        assert_eq!(point.feedback_bits, 5);
        assert!(point.residual_power > 0.0);
    }

    #[test]
    fn zf_alpha_zero_user2_saturates() {
        let mut rng = ChaCha12Rng::seed_from_u64(22);
        let mut rates2 = Vec::new();
        for &p in &[1e4, 1e6, 1e8] {
            let d = ChannelDensity::uniform(0.5, 1.5, p).unwrap();
            let point = zf_quantized_feedback(p, 0.0, &d, 2000, &mut rng).unwrap();
            assert_eq!(point.feedback_bits, 0);
            rates2.push(point.rates[1]);
        }
        // Interference grows with P: user 2's rate stops growing.
        assert!((rates2[2] - rates2[0]).abs() < 0.5);
    }

    #[test]
    fn bia_interference_cancels_exactly() {
        // The difference combiner annihilates the repeated interference in
        // exact arithmetic: both rates are positive at P = 1e4.
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let point = blind_ia_pn(1e4, 200, &mut rng).unwrap();
        assert!(point.rates[0] > 0.0 && point.rates[1] > 0.0);
        assert!(point.validate(4.0));
    }

    #[test]
    fn bia_slopes_near_one_and_half() {
        let mut rng = ChaCha12Rng::seed_from_u64(24);
        let grid = power_grid(3.0, 9.0);
        let mut pts1 = Vec::new();
        let mut pts2 = Vec::new();
        for &p in &grid {
            let point = blind_ia_pn(p, 400, &mut rng).unwrap();
            pts1.push((p, point.rates[0]));
            pts2.push((p, point.rates[1]));
        }
        let d1 = slope_fit(&pts1).unwrap().slope;
        let d2 = slope_fit(&pts2).unwrap().slope;
        assert!((d1 - 1.0).abs() < 0.05, "d1 = {d1}");
        assert!((d2 - 0.5).abs() < 0.05, "d2 = {d2}");
    }
}
