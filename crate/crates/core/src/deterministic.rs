//! Discretized, noise-free integer channel and its power reductions.
//!
//! Inputs live in `{0, ..., ceil(sqrt(P))}`; user k's output is
//! `sum_{i<k} floor(G_ki(t) X_i(t)) + X_k(t)` in exact integer arithmetic.
//! The floor here truncates toward zero for negative arguments (it differs
//! from the mathematical floor there), and the modulo decomposition that
//! converts per-codeword power constraints to per-symbol ones depends on
//! that convention.

use crate::channel::CanonicalChannel;
use crate::density::ChannelDensity;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

/// `1 / (e ln 2)`, the peak of `x log2(1/x)`.
const INV_E_LN2: f64 = 1.0 / (std::f64::consts::E * std::f64::consts::LN_2);

/// Products closer than this to an integer are recomputed in exact rational
/// arithmetic so that floor-boundary ties are deterministic.
const FLOOR_TIE_EPS: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum DeterministicError {
    #[error("symbol {value} at (msg {msg}, user {user}, t {t}) outside {{0, ..., {cap}}}")]
    SymbolRange {
        msg: usize,
        user: usize,
        t: usize,
        value: i64,
        cap: i64,
    },
    #[error("mapping not deterministic: rows {a} and {b} share X1 but differ in X2")]
    MappingNotDeterministic { a: usize, b: usize },
    #[error("message index {0} out of range (codebook has {1})")]
    BadMessage(usize, usize),
    #[error("realization covers {got} slots, codebook needs {need}")]
    ShortRealization { got: usize, need: usize },
    #[error("power fraction p_t = {0} outside [0, 1]")]
    PowerFraction(f64),
    #[error("codebook row length {got} != blocklength {need}")]
    RowLength { got: usize, need: usize },
    #[error("user count mismatch: codebook has {cb}, channel has {ch}")]
    UserMismatch { cb: usize, ch: usize },
}

/// The paper-convention floor: largest integer <= x for x > 0, smallest
/// integer >= x for x < 0, and x itself when x is an integer. Equivalently,
/// truncation toward zero.
pub fn paper_floor(x: f64) -> i64 {
    debug_assert!(x.is_finite());
    debug_assert!(x.abs() < 9.0e18);
    x.trunc() as i64
}

/// Paper floor in exact rational arithmetic.
pub fn paper_floor_rational(x: &BigRational) -> BigInt {
    // `trunc` on a rational rounds toward zero, which is exactly the
    // paper's convention including the integer fixed point.
    x.trunc().to_integer()
}

/// `floor(g * x)` with the paper convention, escalating to exact rational
/// arithmetic when the product lands within `1e-6` of an integer boundary.
/// Every f64 is rational, so the escalation is always exact.
pub fn floored_product(g: f64, x: i64) -> i64 {
    let p = g * x as f64;
    if (p - p.round()).abs() < FLOOR_TIE_EPS {
        let exact = BigRational::from_float(g).expect("finite coefficient")
            * BigRational::from_integer(BigInt::from(x));
        paper_floor_rational(&exact)
            .to_i64()
            .expect("product within i64 range")
    } else {
        paper_floor(p)
    }
}

/// Message-indexed integer input rows under the per-symbol constraint.
///
/// `rows[msg][user - 1][t - 1]` is user `user`'s symbol at slot `t`. For two
/// users the X2 rows form an explicit deterministic mapping table over the
/// X1 rows; codebooks where one X1 row maps to two different X2 rows are
/// rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegerCodebook {
    users: usize,
    block_len: usize,
    power: f64,
    rows: Vec<Vec<Vec<i64>>>,
}

impl IntegerCodebook {
    /// Two-user codebook from parallel lists of X1 and X2 rows.
    pub fn two_user(
        x1_rows: Vec<Vec<i64>>,
        x2_rows: Vec<Vec<i64>>,
        power: f64,
    ) -> Result<Self, DeterministicError> {
        assert_eq!(x1_rows.len(), x2_rows.len(), "one X2 row per X1 row");
        let rows = x1_rows
            .into_iter()
            .zip(x2_rows)
            .map(|(x1, x2)| vec![x1, x2])
            .collect();
        Self::new(2, rows, power)
    }

    /// K-user codebook from per-message `[user][t]` rows.
    pub fn new(
        users: usize,
        rows: Vec<Vec<Vec<i64>>>,
        power: f64,
    ) -> Result<Self, DeterministicError> {
        assert!(users >= 2);
        assert!(!rows.is_empty(), "codebook must contain at least one message");
        let block_len = rows[0][0].len();
        let cap = symbol_cap(power);
        for (msg, per_user) in rows.iter().enumerate() {
            assert_eq!(per_user.len(), users, "one row per user");
            for (u, row) in per_user.iter().enumerate() {
                if row.len() != block_len {
                    return Err(DeterministicError::RowLength {
                        got: row.len(),
                        need: block_len,
                    });
                }
                for (ti, &v) in row.iter().enumerate() {
                    if v < 0 || v > cap {
                        return Err(DeterministicError::SymbolRange {
                            msg,
                            user: u + 1,
                            t: ti + 1,
                            value: v,
                            cap,
                        });
                    }
                }
            }
        }
        let cb = Self {
            users,
            block_len,
            power,
            rows,
        };
        if users == 2 {
            cb.check_mapping_deterministic()?;
        }
        Ok(cb)
    }

    fn check_mapping_deterministic(&self) -> Result<(), DeterministicError> {
        let mut seen: HashMap<&[i64], (usize, &[i64])> = HashMap::new();
        for (msg, per_user) in self.rows.iter().enumerate() {
            let x1 = per_user[0].as_slice();
            let x2 = per_user[1].as_slice();
            if let Some((first, prev_x2)) = seen.get(x1).copied() {
                if prev_x2 != x2 {
                    return Err(DeterministicError::MappingNotDeterministic { a: first, b: msg });
                }
            } else {
                seen.insert(x1, (msg, x2));
            }
        }
        Ok(())
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn symbol_cap(&self) -> i64 {
        symbol_cap(self.power)
    }

    pub fn num_messages(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, msg: usize, user: usize) -> &[i64] {
        &self.rows[msg][user - 1]
    }

    pub fn rows(&self) -> &[Vec<Vec<i64>>] {
        &self.rows
    }

    /// Distinct X1 rows in first-appearance order: the codewords, since X2
    /// is a function of X1.
    pub fn distinct_x1_rows(&self) -> Vec<&[i64]> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for per_user in &self.rows {
            let x1 = per_user[0].as_slice();
            if seen.insert(x1, ()).is_none() {
                out.push(x1);
            }
        }
        out
    }

    /// The explicit mapping table `X2 = L(X1)` of a two-user codebook.
    pub fn mapping_table(&self) -> HashMap<&[i64], &[i64]> {
        debug_assert_eq!(self.users, 2);
        let mut table = HashMap::new();
        for per_user in &self.rows {
            table
                .entry(per_user[0].as_slice())
                .or_insert(per_user[1].as_slice());
        }
        table
    }
}

/// Columnar serialization of [`IntegerCodebook`]: `rows[user][msg][t]` plus,
/// for two users, the explicit mapping table as `[x1_row, x2_row]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodebookFile {
    pub k: usize,
    pub n: usize,
    pub p: f64,
    pub rows: Vec<Vec<Vec<i64>>>,
    #[serde(default)]
    pub mapping: Vec<[Vec<i64>; 2]>,
}

impl From<&IntegerCodebook> for CodebookFile {
    fn from(cb: &IntegerCodebook) -> Self {
        let mut rows = vec![Vec::with_capacity(cb.num_messages()); cb.users()];
        for per_user in cb.rows() {
            for (u, row) in per_user.iter().enumerate() {
                rows[u].push(row.clone());
            }
        }
        let mapping = if cb.users() == 2 {
            let mut pairs: Vec<[Vec<i64>; 2]> = Vec::new();
            let mut seen: HashMap<&[i64], ()> = HashMap::new();
            for per_user in cb.rows() {
                if seen.insert(per_user[0].as_slice(), ()).is_none() {
                    pairs.push([per_user[0].clone(), per_user[1].clone()]);
                }
            }
            pairs
        } else {
            Vec::new()
        };
        CodebookFile {
            k: cb.users(),
            n: cb.block_len(),
            p: cb.power(),
            rows,
            mapping,
        }
    }
}

impl TryFrom<CodebookFile> for IntegerCodebook {
    type Error = DeterministicError;

    fn try_from(f: CodebookFile) -> Result<Self, Self::Error> {
        let msgs = f.rows.first().map(|r| r.len()).unwrap_or(0);
        let mut rows = vec![vec![Vec::new(); f.k]; msgs];
        for (u, per_msg) in f.rows.into_iter().enumerate() {
            for (m, row) in per_msg.into_iter().enumerate() {
                rows[m][u] = row;
            }
        }
        IntegerCodebook::new(f.k, rows, f.p)
    }
}

pub fn symbol_cap(power: f64) -> i64 {
    power.sqrt().ceil() as i64
}

/// Per-time integer outputs of the deterministic channel for one message.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicOutput {
    /// `outputs[user - 1][t - 1]`.
    pub outputs: Vec<Vec<i64>>,
    pub realization: CanonicalChannel,
}

impl DeterministicOutput {
    pub fn user(&self, k: usize) -> &[i64] {
        &self.outputs[k - 1]
    }
}

/// Exact deterministic-channel outputs for message `msg` under `channel`.
pub fn deterministic_output(
    cb: &IntegerCodebook,
    msg: usize,
    channel: &CanonicalChannel,
) -> Result<DeterministicOutput, DeterministicError> {
    if msg >= cb.num_messages() {
        return Err(DeterministicError::BadMessage(msg, cb.num_messages()));
    }
    if channel.block_len() < cb.block_len() {
        return Err(DeterministicError::ShortRealization {
            got: channel.block_len(),
            need: cb.block_len(),
        });
    }
    if channel.users() != cb.users() {
        return Err(DeterministicError::UserMismatch {
            cb: cb.users(),
            ch: channel.users(),
        });
    }
    let mut outputs = Vec::with_capacity(cb.users());
    for k in 1..=cb.users() {
        let mut row = Vec::with_capacity(cb.block_len());
        for t in 1..=cb.block_len() {
            let mut y = cb.row(msg, k)[t - 1];
            for i in 1..k {
                y += floored_product(channel.coeff(k, i, t), cb.row(msg, i)[t - 1]);
            }
            row.push(y);
        }
        outputs.push(row);
    }
    Ok(DeterministicOutput {
        outputs,
        realization: channel.clone(),
    })
}

/// The two-user interference image `Y2 = floor(g X1) + X2`, the inner loop
/// of aligned-set partitioning.
pub fn two_user_image(x1: &[i64], x2: &[i64], g21: &[f64]) -> Vec<i64> {
    debug_assert_eq!(x1.len(), x2.len());
    debug_assert_eq!(x1.len(), g21.len());
    x1.iter()
        .zip(x2)
        .zip(g21)
        .map(|((&a, &b), &g)| floored_product(g, a) + b)
        .collect()
}

/// Floored two-user codeword plus the mutual-information gaps the
/// integerization costs each user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegerizeReport {
    /// `(n/2) log2(2) = n/2` bits.
    pub user1_gap_bits: f64,
    /// `sum_t E[(1/2) log2((G(t)+1)^2 + 1)]` bits.
    pub user2_gap_bits: f64,
}

/// Floors a real two-user codeword to integers and reports the
/// per-user mutual-information gap bounds of the reduction. Expects the
/// per-codeword power constraint `sum_t (X1^2 + X2^2) / n <= P` to hold.
pub fn integerize(
    x1: &[f64],
    x2: &[f64],
    power: f64,
    d: &ChannelDensity,
) -> (Vec<i64>, Vec<i64>, IntegerizeReport) {
    assert_eq!(x1.len(), x2.len());
    let n = x1.len();
    debug_assert!(
        x1.iter().zip(x2).map(|(a, b)| a * a + b * b).sum::<f64>() / n as f64
            <= power * (1.0 + 1e-9)
    );
    let f1: Vec<i64> = x1.iter().map(|&v| paper_floor(v)).collect();
    let f2: Vec<i64> = x2.iter().map(|&v| paper_floor(v)).collect();
    let per_slot_gap2 = d.expect(|g| 0.5 * ((g + 1.0) * (g + 1.0) + 1.0).log2());
    let report = IntegerizeReport {
        user1_gap_bits: n as f64 / 2.0,
        user2_gap_bits: n as f64 * per_slot_gap2,
    };
    (f1, f2, report)
}

/// One slot of the modulo decomposition `X = Q*floor(X/Q) - Q*1(x<0) + (X mod Q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModIdentityTerm {
    pub x: i64,
    pub q_term: i64,
    pub sign_term: i64,
    pub remainder: i64,
    /// Whether the three displayed terms sum back to `x`. False exactly on
    /// negative multiples of Q, where the displayed identity is off by Q;
    /// the reconstruction `x = per_symbol + offset` holds regardless.
    pub identity_holds: bool,
}

/// Result of reducing one integer codeword to per-symbol power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModReduce {
    pub q: i64,
    /// `X(t) mod Q`, in `{0, ..., Q-1}` for all signs.
    pub per_symbol: Vec<i64>,
    /// `X(t) - per_symbol(t)`.
    pub offset: Vec<i64>,
    pub identity: Vec<ModIdentityTerm>,
}

/// Splits an integer codeword into a per-symbol part in `{0, ..., Q-1}` and
/// an offset part, with `per_symbol + offset == x` exactly at every slot.
pub fn mod_reduce(x: &[i64], power: f64) -> ModReduce {
    let q = symbol_cap(power);
    let mut per_symbol = Vec::with_capacity(x.len());
    let mut offset = Vec::with_capacity(x.len());
    let mut identity = Vec::with_capacity(x.len());
    for &v in x {
        let r = v.rem_euclid(q);
        per_symbol.push(r);
        offset.push(v - r);
        let q_term = q * paper_floor(v as f64 / q as f64);
        let sign_term = if v < 0 { -q } else { 0 };
        identity.push(ModIdentityTerm {
            x: v,
            q_term,
            sign_term,
            remainder: r,
            identity_holds: q_term + sign_term + r == v,
        });
    }
    ModReduce {
        q,
        per_symbol,
        offset,
        identity,
    }
}

/// Closed-form upper bound on the entropy of the quantization index
/// `floor((1/Q) floor(X))` of an input with per-time power fraction
/// `p_t = E[floor(X(t))^2] / (n P)`:
///
/// `(3 + 4 max(1, n p)) / (e ln 2) + 6 n p + 2 / (e ln 2)` bits.
pub fn offset_entropy_bound(p_t: f64, n: usize) -> Result<f64, DeterministicError> {
    if !(0.0..=1.0).contains(&p_t) {
        return Err(DeterministicError::PowerFraction(p_t));
    }
    let np = n as f64 * p_t;
    Ok((3.0 + 4.0 * np.max(1.0)) * INV_E_LN2 + 6.0 * np + 2.0 * INV_E_LN2)
}

/// The summed form `n (1 + 13/(e ln 2) + 6)` valid when `sum_t p(t) <= 1`.
pub fn offset_entropy_bound_summed(n: usize) -> f64 {
    n as f64 * (1.0 + 13.0 * INV_E_LN2 + 6.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::CanonicalChannel;

    #[test]
    fn paper_floor_cases() {
        assert_eq!(paper_floor(2.7), 2);
        assert_eq!(paper_floor(-0.3), 0);
        assert_eq!(paper_floor(-3.0), -3);
        assert_eq!(paper_floor(0.0), 0);
        assert_eq!(paper_floor(-2.7), -2);
    }

    #[test]
    fn deterministic_output_direct() {
        // n=1, X1=3, X2=5, G=0.7 -> Y2 = floor(2.1) + 5 = 7.
        let cb = IntegerCodebook::two_user(vec![vec![3]], vec![vec![5]], 100.0).unwrap();
        let ch = CanonicalChannel::two_user(vec![0.7], 4.0, 100.0).unwrap();
        let out = deterministic_output(&cb, 0, &ch).unwrap();
        assert_eq!(out.user(1), &[3]);
        assert_eq!(out.user(2), &[7]);
    }

    #[test]
    fn zero_input_kills_floored_term() {
        let cb = IntegerCodebook::two_user(vec![vec![0]], vec![vec![9]], 100.0).unwrap();
        for g in [0.26, 0.9, 3.7] {
            let ch = CanonicalChannel::two_user(vec![g], 4.0, 100.0).unwrap();
            let out = deterministic_output(&cb, 0, &ch).unwrap();
            assert_eq!(out.user(2), &[9]);
        }
    }

    #[test]
    fn mod_reduce_negative_example() {
        // X = -3, Q = 10: paper floor of -0.3 is 0, remainder 7, offset -10.
        let r = mod_reduce(&[-3], 100.0);
        assert_eq!(r.q, 10);
        assert_eq!(r.per_symbol, vec![7]);
        assert_eq!(r.offset, vec![-10]);
        let t = &r.identity[0];
        assert_eq!((t.q_term, t.sign_term, t.remainder), (0, -10, 7));
        assert!(t.identity_holds);
    }

    #[test]
    fn mod_reduce_positive_example() {
        let r = mod_reduce(&[23], 100.0);
        assert_eq!(r.per_symbol, vec![3]);
        assert_eq!(r.offset, vec![20]);
        assert!(r.identity[0].identity_holds);
    }

    #[test]
    fn mod_reduce_reconstructs_exhaustively() {
        for q_sq in [9.0, 49.0, 100.0] {
            for x in -100..=100 {
                let r = mod_reduce(&[x], q_sq);
                assert_eq!(r.per_symbol[0] + r.offset[0], x);
                assert!((0..r.q).contains(&r.per_symbol[0]));
            }
        }
    }

    #[test]
    fn integerize_gap_formulas() {
        let d = ChannelDensity::uniform(0.5, 1.5, 16.0).unwrap();
        let (f1, f2, rep) = integerize(&[1.2, -0.3, 2.9, 0.0], &[0.4, 1.1, -1.7, 2.0], 16.0, &d);
        assert_eq!(f1, vec![1, 0, 2, 0]);
        assert_eq!(f2, vec![0, 1, -1, 2]);
        assert!((rep.user1_gap_bits - 2.0).abs() < 1e-12);
    }

    #[test]
    fn integerize_gap_constant_channel() {
        // G == 1 deterministic: gap = (1/2) log2 5 per slot.
        let d = ChannelDensity::uniform(1.0 - 5e-13, 1.0 + 5e-13, 16.0).unwrap();
        let (_, _, rep) = integerize(&[1.0], &[1.0], 16.0, &d);
        assert!((rep.user2_gap_bits - 0.5 * 5f64.log2()).abs() < 1e-6);
    }

    #[test]
    fn offset_entropy_bound_paper_points() {
        let b = offset_entropy_bound(0.0, 1).unwrap();
        assert!((b - 9.0 * INV_E_LN2).abs() < 1e-12);
        assert!((b - 4.7767).abs() < 1e-3);
        let s = offset_entropy_bound_summed(10);
        assert!((s - 138.99).abs() < 0.05);
        assert!(offset_entropy_bound(1.5, 1).is_err());
        assert!(offset_entropy_bound(-0.1, 1).is_err());
    }

    #[test]
    fn mapping_determinism_enforced() {
        let err = IntegerCodebook::two_user(
            vec![vec![1], vec![1]],
            vec![vec![2], vec![3]],
            100.0,
        )
        .unwrap_err();
        assert!(matches!(err, DeterministicError::MappingNotDeterministic { .. }));
        // Duplicate rows with equal X2 are fine.
        IntegerCodebook::two_user(vec![vec![1], vec![1]], vec![vec![2], vec![2]], 100.0).unwrap();
    }

    #[test]
    fn symbol_range_enforced() {
        let err =
            IntegerCodebook::two_user(vec![vec![11]], vec![vec![0]], 100.0).unwrap_err();
        assert!(matches!(err, DeterministicError::SymbolRange { .. }));
        let err = IntegerCodebook::two_user(vec![vec![-1]], vec![vec![0]], 100.0).unwrap_err();
        assert!(matches!(err, DeterministicError::SymbolRange { .. }));
    }

    #[test]
    fn codebook_file_round_trip() {
        let cb = IntegerCodebook::two_user(
            vec![vec![0, 1], vec![2, 3], vec![5, 8]],
            vec![vec![1, 1], vec![0, 2], vec![4, 0]],
            100.0,
        )
        .unwrap();
        let file = CodebookFile::from(&cb);
        assert_eq!(file.k, 2);
        assert_eq!(file.mapping.len(), 3);
        let back = IntegerCodebook::try_from(file).unwrap();
        assert_eq!(back, cb);
    }
}
