//! General and canonical channel models and the reduction between them.
//!
//! The general model is a per-time 2x2 real coefficient matrix with all
//! entries and the determinant bounded away from zero and infinity. The
//! canonical model is lower triangular with unit diagonal; only the cross
//! coefficients below the diagonal are stored. The reduction consolidates
//! the general channel's unknowns into a single cross coefficient per time
//! slot while inflating the power budget by a bounded factor.

use crate::density::ChannelDensity;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("bound M = {0} must exceed 1")]
    InvalidBound(f64),
    #[error("coefficient G[{row}][{col}]({t}) = {value} outside [1/M, M] for M = {bound}")]
    CoefficientBound {
        t: usize,
        row: usize,
        col: usize,
        value: f64,
        bound: f64,
    },
    #[error("degenerate channel: |det G({t})| = {det} outside [1/M, M] for M = {bound}")]
    DeterminantBound { t: usize, det: f64, bound: f64 },
    #[error("canonical coefficient G_{{{k}{j}}}({t}) = {value} outside (1/M, M) for M = {bound}")]
    CanonicalBound {
        t: usize,
        k: usize,
        j: usize,
        value: f64,
        bound: f64,
    },
    #[error("need at least 2 users, got {0}")]
    TooFewUsers(usize),
    #[error("expected {expected} cross coefficients per slot for {users} users, got {got}")]
    CoefficientShape {
        users: usize,
        expected: usize,
        got: usize,
    },
    #[error("correlation rho = {0} outside (-1, 1)")]
    InvalidCorrelation(f64),
}

/// Per-time 2x2 general channel with bound `M` and power budget `P~`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralChannel2x2 {
    /// `coefficients[t][i][j]` is the gain from transmit antenna `j+1` to
    /// user `i+1` at time `t+1`.
    coefficients: Vec<[[f64; 2]; 2]>,
    bound_m: f64,
    power: f64,
}

impl GeneralChannel2x2 {
    /// Validates every per-entry and determinant bound before returning.
    pub fn new(
        coefficients: Vec<[[f64; 2]; 2]>,
        bound_m: f64,
        power: f64,
    ) -> Result<Self, ChannelError> {
        if !(bound_m > 1.0) {
            return Err(ChannelError::InvalidBound(bound_m));
        }
        for (t, g) in coefficients.iter().enumerate() {
            for (row, r) in g.iter().enumerate() {
                for (col, &v) in r.iter().enumerate() {
                    if v.abs() < 1.0 / bound_m || v.abs() > bound_m {
                        return Err(ChannelError::CoefficientBound {
                            t: t + 1,
                            row: row + 1,
                            col: col + 1,
                            value: v,
                            bound: bound_m,
                        });
                    }
                }
            }
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            if det.abs() < 1.0 / bound_m || det.abs() > bound_m {
                return Err(ChannelError::DeterminantBound {
                    t: t + 1,
                    det,
                    bound: bound_m,
                });
            }
        }
        Ok(Self {
            coefficients,
            bound_m,
            power,
        })
    }

    pub fn block_len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn bound_m(&self) -> f64 {
        self.bound_m
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn coefficients(&self) -> &[[[f64; 2]; 2]] {
        &self.coefficients
    }
}

/// Realized canonical channel: unit diagonal, stored cross coefficients.
///
/// `cross[t]` holds `G_{kj}(t)` for `2 <= k <= K`, `1 <= j < k`, in
/// row-major order `(2,1), (3,1), (3,2), (4,1), ...`. Diagonal entries are
/// exactly 1 and never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalChannel {
    users: usize,
    cross: Vec<Vec<f64>>,
    bound_m: f64,
    power: f64,
}

impl CanonicalChannel {
    pub fn new(
        users: usize,
        cross: Vec<Vec<f64>>,
        bound_m: f64,
        power: f64,
    ) -> Result<Self, ChannelError> {
        if users < 2 {
            return Err(ChannelError::TooFewUsers(users));
        }
        if !(bound_m > 1.0) {
            return Err(ChannelError::InvalidBound(bound_m));
        }
        let expected = users * (users - 1) / 2;
        for (t, slot) in cross.iter().enumerate() {
            if slot.len() != expected {
                return Err(ChannelError::CoefficientShape {
                    users,
                    expected,
                    got: slot.len(),
                });
            }
            for (idx, &v) in slot.iter().enumerate() {
                // Open interval with epsilon slack: reductions of general
                // channels whose entries sit exactly on their (closed)
                // bounds land exactly on M^2.
                if v.abs() < (1.0 - 1e-12) / bound_m || v.abs() > bound_m * (1.0 + 1e-12) {
                    let (k, j) = cross_index_to_kj(idx);
                    return Err(ChannelError::CanonicalBound {
                        t: t + 1,
                        k,
                        j,
                        value: v,
                        bound: bound_m,
                    });
                }
            }
        }
        Ok(Self {
            users,
            cross,
            bound_m,
            power,
        })
    }

    /// Two-user canonical channel from the per-slot cross coefficients.
    pub fn two_user(g21: Vec<f64>, bound_m: f64, power: f64) -> Result<Self, ChannelError> {
        Self::new(2, g21.into_iter().map(|g| vec![g]).collect(), bound_m, power)
    }

    /// Samples an i.i.d. (or AR(1)-correlated, via Gaussian copula) block of
    /// `block_len` slots where every cross coefficient of user `k` is drawn
    /// from `densities[k-2]`.
    pub fn sample<R: Rng + ?Sized>(
        users: usize,
        block_len: usize,
        densities: &[ChannelDensity],
        rho: f64,
        bound_m: f64,
        power: f64,
        rng: &mut R,
    ) -> Result<Self, ChannelError> {
        if users < 2 {
            return Err(ChannelError::TooFewUsers(users));
        }
        assert_eq!(densities.len(), users - 1, "one density per user beyond user 1");
        if !(-1.0..1.0).contains(&rho) {
            return Err(ChannelError::InvalidCorrelation(rho));
        }
        let n_cross = users * (users - 1) / 2;
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        // One latent AR(1) Gaussian track per cross coefficient keeps the
        // marginal law exactly equal to the configured density.
        let mut latent = vec![0.0f64; n_cross];
        let mut cross = Vec::with_capacity(block_len);
        for t in 0..block_len {
            let mut slot = Vec::with_capacity(n_cross);
            for idx in 0..n_cross {
                let eps: f64 = normal.inverse_cdf(rng.gen::<f64>().clamp(1e-16, 1.0 - 1e-16));
                latent[idx] = if t == 0 || rho == 0.0 {
                    eps
                } else {
                    rho * latent[idx] + (1.0 - rho * rho).sqrt() * eps
                };
                let (k, _) = cross_index_to_kj(idx);
                let u = normal.cdf(latent[idx]);
                slot.push(densities[k - 2].quantile(u));
            }
            cross.push(slot);
        }
        Self::new(users, cross, bound_m, power)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn block_len(&self) -> usize {
        self.cross.len()
    }

    pub fn bound_m(&self) -> f64 {
        self.bound_m
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// Coefficient `G_{kj}(t)` with the unit-diagonal convention; `t` is
    /// 1-based like the slot index everywhere else.
    pub fn coeff(&self, k: usize, j: usize, t: usize) -> f64 {
        debug_assert!(1 <= j && j <= k && k <= self.users);
        if j == k {
            return 1.0;
        }
        self.cross[t - 1][kj_to_cross_index(k, j)]
    }

    /// The single cross coefficient of the two-user model.
    pub fn g21(&self, t: usize) -> f64 {
        debug_assert_eq!(self.users, 2);
        self.cross[t - 1][0]
    }

    /// All of user 2's interference coefficients over time (two-user model).
    pub fn g21_block(&self) -> Vec<f64> {
        (1..=self.block_len()).map(|t| self.g21(t)).collect()
    }
}

fn kj_to_cross_index(k: usize, j: usize) -> usize {
    debug_assert!(j < k && k >= 2);
    (k - 1) * (k - 2) / 2 + (j - 1)
}

fn cross_index_to_kj(idx: usize) -> (usize, usize) {
    let mut k = 2;
    let mut base = 0;
    while base + (k - 1) <= idx {
        base += k - 1;
        k += 1;
    }
    (k, idx - base + 1)
}

/// Invertible per-time affine map taking general-model inputs to canonical
/// inputs, together with its inverse. The determinant is treated as CSIT
/// side information for the transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputTransform {
    /// Per slot: `(g11, g12, det)`.
    slots: Vec<(f64, f64, f64)>,
}

impl InputTransform {
    /// `(X1, X2) = (g11*x1~ + g12*x2~, (det/g11)*x2~)`.
    pub fn forward(&self, t: usize, x_tilde: (f64, f64)) -> (f64, f64) {
        let (g11, g12, det) = self.slots[t - 1];
        (
            g11 * x_tilde.0 + g12 * x_tilde.1,
            det / g11 * x_tilde.1,
        )
    }

    /// `(x1~, x2~) = (X1/g11 - (g12/det)*X2, (g11/det)*X2)`.
    pub fn inverse(&self, t: usize, x: (f64, f64)) -> (f64, f64) {
        let (g11, g12, det) = self.slots[t - 1];
        (x.0 / g11 - g12 / det * x.1, g11 / det * x.1)
    }

    pub fn block_len(&self) -> usize {
        self.slots.len()
    }
}

/// Reduces a general 2x2 channel to canonical form.
///
/// Returns the canonical channel with `G(t) = G21(t)/G11(t)`, power budget
/// `(2 M^2 + M^4) P~`, and the invertible input transform. Rejects channels
/// violating the coefficient or determinant bounds.
pub fn reduce_to_canonical(
    g: &GeneralChannel2x2,
) -> Result<(CanonicalChannel, InputTransform), ChannelError> {
    // Revalidate; `GeneralChannel2x2` values are checked at construction but
    // the reduction is the operation the bounds exist for.
    let g = GeneralChannel2x2::new(g.coefficients().to_vec(), g.bound_m(), g.power())?;
    let m = g.bound_m();
    let mut cross = Vec::with_capacity(g.block_len());
    let mut slots = Vec::with_capacity(g.block_len());
    for gt in g.coefficients() {
        let det = gt[0][0] * gt[1][1] - gt[0][1] * gt[1][0];
        cross.push(vec![gt[1][0] / gt[0][0]]);
        slots.push((gt[0][0], gt[0][1], det));
    }
    let power = (2.0 * m * m + m.powi(4)) * g.power();
    // The consolidated coefficient lands strictly inside (1/M^2, M^2).
    let canonical = CanonicalChannel::new(2, cross, m * m, power)?;
    Ok((canonical, InputTransform { slots }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matrix_violates_entry_bound() {
        let err =
            GeneralChannel2x2::new(vec![[[1.0, 0.0], [0.0, 1.0]]], 2.0, 1.0).unwrap_err();
        assert!(matches!(err, ChannelError::CoefficientBound { .. }));
    }

    #[test]
    fn reduction_of_unit_det_example() {
        let g = GeneralChannel2x2::new(vec![[[1.0, 1.0], [1.0, 2.0]]], 2.0, 1.0).unwrap();
        let (c, xf) = reduce_to_canonical(&g).unwrap();
        assert_eq!(c.g21(1), 1.0);
        assert_eq!(c.power(), 24.0);
        assert_eq!(c.bound_m(), 4.0);
        assert_eq!(xf.block_len(), 1);
    }

    #[test]
    fn degenerate_determinant_rejected() {
        // Entries in range, determinant 2*2 - 1.9*2 = 0.2 < 1/2.
        let err =
            GeneralChannel2x2::new(vec![[[2.0, 1.9], [2.0, 2.0]]], 2.0, 1.0).unwrap_err();
        assert!(matches!(err, ChannelError::DeterminantBound { .. }));
    }

    #[test]
    fn canonical_coefficient_in_squared_bound() {
        let g = GeneralChannel2x2::new(vec![[[0.6, 1.0], [1.9, 1.5]]], 2.0, 1.0).unwrap();
        let (c, _) = reduce_to_canonical(&g).unwrap();
        let v = c.g21(1).abs();
        assert!(v > 0.25 && v < 4.0);
        // Entries sitting exactly on the closed general bounds reduce to a
        // coefficient exactly at M^2; that boundary still reduces cleanly.
        let g = GeneralChannel2x2::new(vec![[[0.5, 1.0], [2.0, 1.5]]], 2.0, 1.0).unwrap();
        let (c, _) = reduce_to_canonical(&g).unwrap();
        assert_eq!(c.g21(1), 4.0);
    }

    #[test]
    fn cross_index_round_trip() {
        for k in 2..=6 {
            for j in 1..k {
                assert_eq!(cross_index_to_kj(kj_to_cross_index(k, j)), (k, j));
            }
        }
    }

    #[test]
    fn coeff_diagonal_is_one() {
        let c = CanonicalChannel::new(3, vec![vec![0.7, 1.2, 0.9]], 4.0, 100.0).unwrap();
        assert_eq!(c.coeff(1, 1, 1), 1.0);
        assert_eq!(c.coeff(3, 3, 1), 1.0);
        assert_eq!(c.coeff(3, 2, 1), 0.9);
        assert_eq!(c.coeff(3, 1, 1), 1.2);
        assert_eq!(c.coeff(2, 1, 1), 0.7);
    }
}
