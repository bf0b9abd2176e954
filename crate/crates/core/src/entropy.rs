//! Exact entropy accounting on small deterministic-channel instances.
//!
//! Conditioning on the continuous coefficient is made exact by cell
//! decomposition: the integer output map is piecewise constant in G with
//! breakpoints at rationals `k/x`, so expectations over G reduce to finite
//! sums over product cells weighted by closed-form interval masses. The
//! ledger records the entropy chain and the Jensen comparison against
//! aligned-set sizes; instances past the cell budget fall back to Monte
//! Carlo with a reported standard error.

use crate::aligned::AlignedError;
use crate::cells::decompose;
use crate::density::ChannelDensity;
use crate::deterministic::{floored_product, DeterministicError, IntegerCodebook};
use crate::fitting::{fit_dof_limit, FitError};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::hash::Hash;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EntropyError {
    #[error("pmf entry {0} is negative")]
    NegativeMass(f64),
    #[error("pmf sums to {0}, not 1 (tolerance 1e-12)")]
    NotNormalized(f64),
    #[error("pmf has {got} entries, codebook has {need} codewords")]
    PmfLength { got: usize, need: usize },
    #[error("need ledgers at >= 3 distinct powers, got {0}")]
    TooFewPowers(usize),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Aligned(#[from] AlignedError),
    #[error(transparent)]
    Deterministic(#[from] DeterministicError),
}

/// Shannon entropy in bits of a pmf given as probabilities.
pub fn entropy_bits<I: IntoIterator<Item = f64>>(probs: I) -> f64 {
    probs
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// Shannon conditional entropy `H(V | C)` in bits from a joint pmf over
/// `(value, cell)` pairs. Zero-probability entries contribute nothing;
/// negative mass and non-unit totals are rejected.
pub fn exact_conditional_entropy<V, C, I>(joint: I) -> Result<f64, EntropyError>
where
    V: Eq + Hash,
    C: Eq + Hash + Clone,
    I: IntoIterator<Item = ((V, C), f64)>,
{
    let mut cells: HashMap<C, f64> = HashMap::new();
    let mut merged: HashMap<(V, C), f64> = HashMap::new();
    let mut total = 0.0;
    for ((v, c), p) in joint {
        if p < 0.0 {
            return Err(EntropyError::NegativeMass(p));
        }
        total += p;
        *cells.entry(c.clone()).or_insert(0.0) += p;
        *merged.entry((v, c)).or_insert(0.0) += p;
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(EntropyError::NotNormalized(total));
    }
    let mut h = 0.0;
    for ((_, c), p) in &merged {
        if *p > 0.0 {
            h += p * (cells[c] / p).log2();
        }
    }
    Ok(h)
}

/// How a ledger was computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LedgerMethod {
    /// Cell decomposition; no sampling error.
    Exact,
    /// Monte Carlo over realizations with the given standard error on
    /// `H(Y2 | G)`.
    MonteCarlo { samples: usize, stderr: f64 },
}

/// Named entropy values, in bits, for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyLedger {
    pub h1_given_g: f64,
    pub h2_given_g: f64,
    pub h1_given_y2_g: f64,
    pub expected_log_set_size: f64,
    pub log_expected_set_size: f64,
    /// `(n/2) log2 P`.
    pub normalizer_bits: f64,
    /// `(H(Y1|G) - H(Y2|G)) / normalizer`.
    pub normalized_difference: f64,
    pub method: LedgerMethod,
}

/// Budgets for exact cell enumeration and its Monte Carlo fallback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyBudget {
    pub max_product_cells: u128,
    pub mc_samples: usize,
}

impl Default for EntropyBudget {
    fn default() -> Self {
        Self {
            max_product_cells: 2_000_000,
            mc_samples: 20_000,
        }
    }
}

/// The difference-of-entropies ledger for a two-user codebook, an input pmf
/// over its codewords, and an i.i.d. coefficient density.
pub fn difference_of_entropies<R: Rng + ?Sized>(
    cb: &IntegerCodebook,
    pmf: &[f64],
    d: &ChannelDensity,
    budget: &EntropyBudget,
    rng: &mut R,
) -> Result<EntropyLedger, EntropyError> {
    if cb.users() != 2 {
        return Err(EntropyError::Aligned(AlignedError::NotTwoUser(cb.users())));
    }
    let rows: Vec<Vec<i64>> = cb.distinct_x1_rows().iter().map(|r| r.to_vec()).collect();
    let mapping = cb.mapping_table();
    let x2_rows: Vec<Vec<i64>> = rows
        .iter()
        .map(|r| mapping[r.as_slice()].to_vec())
        .collect();
    ledger_for(&rows, &x2_rows, pmf, d, cb.power(), budget, rng)
}

/// Engine behind [`difference_of_entropies`] and the mapping search:
/// computes the ledger for explicit X1 and X2 rows.
pub fn ledger_for<R: Rng + ?Sized>(
    x1_rows: &[Vec<i64>],
    x2_rows: &[Vec<i64>],
    pmf: &[f64],
    d: &ChannelDensity,
    power: f64,
    budget: &EntropyBudget,
    rng: &mut R,
) -> Result<EntropyLedger, EntropyError> {
    let m = x1_rows.len();
    if pmf.len() != m {
        return Err(EntropyError::PmfLength {
            got: pmf.len(),
            need: m,
        });
    }
    let mut total = 0.0;
    for &p in pmf {
        if p < 0.0 {
            return Err(EntropyError::NegativeMass(p));
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(EntropyError::NotNormalized(total));
    }
    let n = x1_rows[0].len();

    // Per-slot cells with their masses and the per-row interference image.
    let mut slot_cells: Vec<Vec<(f64, Vec<i64>)>> = Vec::with_capacity(n);
    for t in 0..n {
        let mut symbols: Vec<i64> = x1_rows.iter().map(|r| r[t]).collect();
        symbols.sort_unstable();
        symbols.dedup();
        let cells = decompose(&symbols, d.support());
        let mut with_mass = Vec::with_capacity(cells.len());
        for cell in cells {
            let mass = d
                .interval_probability(cell.lo, cell.hi)
                .expect("ordered cell");
            let g = cell.midpoint();
            let y2: Vec<i64> = (0..m)
                .map(|r| floored_product(g, x1_rows[r][t]) + x2_rows[r][t])
                .collect();
            with_mass.push((mass, y2));
        }
        slot_cells.push(with_mass);
    }

    let product_cells: u128 = slot_cells
        .iter()
        .map(|c| c.len() as u128)
        .try_fold(1u128, |acc, len| acc.checked_mul(len))
        .unwrap_or(u128::MAX);

    let mut acc = Accumulator::new(m, n);
    let method;
    if product_cells <= budget.max_product_cells {
        let mut idx = vec![0usize; n];
        loop {
            let mut weight = 1.0;
            for t in 0..n {
                weight *= slot_cells[t][idx[t]].0;
            }
            if weight > 0.0 {
                acc.add_realization(weight, |t, r| slot_cells[t][idx[t]].1[r], pmf);
            }
            // Odometer increment over per-slot cell indices.
            let mut t = 0;
            loop {
                if t == n {
                    break;
                }
                idx[t] += 1;
                if idx[t] < slot_cells[t].len() {
                    break;
                }
                idx[t] = 0;
                t += 1;
            }
            if t == n {
                break;
            }
        }
        method = LedgerMethod::Exact;
    } else {
        let samples = budget.mc_samples;
        let w = 1.0 / samples as f64;
        let mut h2_samples = Vec::with_capacity(samples);
        let mut g = vec![0.0f64; n];
        let mut y2 = vec![vec![0i64; n]; m];
        for _ in 0..samples {
            for slot in g.iter_mut() {
                *slot = d.sample(rng);
            }
            for r in 0..m {
                for t in 0..n {
                    y2[r][t] = floored_product(g[t], x1_rows[r][t]) + x2_rows[r][t];
                }
            }
            let before = acc.h2;
            acc.add_realization(w, |t, r| y2[r][t], pmf);
            h2_samples.push((acc.h2 - before) / w);
        }
        let mean = acc.h2;
        let var = h2_samples
            .iter()
            .map(|h| (h - mean).powi(2))
            .sum::<f64>()
            / (samples.saturating_sub(1) as f64);
        method = LedgerMethod::MonteCarlo {
            samples,
            stderr: (var / samples as f64).sqrt(),
        };
    }

    let h1 = entropy_bits(pmf.iter().copied());
    let normalizer = n as f64 / 2.0 * power.log2();
    Ok(EntropyLedger {
        h1_given_g: h1,
        h2_given_g: acc.h2,
        h1_given_y2_g: acc.h1_given_y2,
        expected_log_set_size: acc.e_log_size,
        log_expected_set_size: acc.e_size.log2(),
        normalizer_bits: normalizer,
        normalized_difference: (h1 - acc.h2) / normalizer,
        method,
    })
}

/// Weighted accumulation of the per-realization entropy pieces.
struct Accumulator {
    m: usize,
    n: usize,
    h2: f64,
    h1_given_y2: f64,
    e_log_size: f64,
    e_size: f64,
    group_of: Vec<usize>,
    group_mass: Vec<f64>,
    group_size: Vec<usize>,
}

impl Accumulator {
    fn new(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            h2: 0.0,
            h1_given_y2: 0.0,
            e_log_size: 0.0,
            e_size: 0.0,
            group_of: vec![0; m],
            group_mass: Vec::with_capacity(m),
            group_size: Vec::with_capacity(m),
        }
    }

    /// Folds in one realization of weight `w`, with `image(t, r)` giving
    /// row r's interference symbol at slot t.
    fn add_realization<F: Fn(usize, usize) -> i64>(&mut self, w: f64, image: F, pmf: &[f64]) {
        self.group_mass.clear();
        self.group_size.clear();
        let mut reps: Vec<usize> = Vec::with_capacity(self.m);
        'rows: for r in 0..self.m {
            for (gi, &rep) in reps.iter().enumerate() {
                if (0..self.n).all(|t| image(t, rep) == image(t, r)) {
                    self.group_of[r] = gi;
                    self.group_mass[gi] += pmf[r];
                    self.group_size[gi] += 1;
                    continue 'rows;
                }
            }
            self.group_of[r] = reps.len();
            reps.push(r);
            self.group_mass.push(pmf[r]);
            self.group_size.push(1);
        }
        for &pg in &self.group_mass {
            if pg > 0.0 {
                self.h2 -= w * pg * pg.log2();
            }
        }
        for r in 0..self.m {
            let p = pmf[r];
            if p > 0.0 {
                let gi = self.group_of[r];
                self.h1_given_y2 += w * p * (self.group_mass[gi] / p).log2();
                self.e_log_size += w * p * (self.group_size[gi] as f64).log2();
                self.e_size += w * p * self.group_size[gi] as f64;
            }
        }
    }
}

/// Outcome of searching the mapping space for the entropy minimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingSearch {
    pub x2_rows: Vec<Vec<i64>>,
    pub h2_bits: f64,
    /// True when every mapping was enumerated, certifying the minimum.
    pub exhaustive: bool,
    pub candidates: u64,
}

/// Budgets for the mapping search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Enumerate exhaustively when the candidate count stays below this.
    pub exhaustive_limit: u128,
    pub anneal_iters: usize,
    pub entropy: EntropyBudget,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            exhaustive_limit: 1 << 20,
            anneal_iters: 20_000,
            entropy: EntropyBudget::default(),
        }
    }
}

/// Finds a deterministic mapping `X2 = L(X1)` minimizing `H(Y2 | G)` over
/// X2 symbols in `{0, ..., x2_cap}`, under the uniform pmf. Exhaustive and
/// certified below the budget; simulated annealing on the alignment-mass
/// surrogate above it.
pub fn minimize_over_mappings<R: Rng + ?Sized>(
    x1_rows: &[Vec<i64>],
    x2_cap: i64,
    d: &ChannelDensity,
    power: f64,
    budget: &SearchBudget,
    rng: &mut R,
) -> Result<MappingSearch, EntropyError> {
    assert!(!x1_rows.is_empty());
    let m = x1_rows.len();
    let n = x1_rows[0].len();
    let digits = m * n;
    let base = (x2_cap + 1) as u128;
    let uniform = vec![1.0 / m as f64; m];
    let total: u128 = (0..digits).try_fold(1u128, |acc, _| acc.checked_mul(base)).unwrap_or(u128::MAX);

    if total <= budget.exhaustive_limit {
        let mut digits_state = vec![0i64; digits];
        let mut best_rows: Option<Vec<Vec<i64>>> = None;
        let mut best_h2 = f64::INFINITY;
        let mut candidates = 0u64;
        loop {
            candidates += 1;
            let x2_rows: Vec<Vec<i64>> = (0..m)
                .map(|r| digits_state[r * n..(r + 1) * n].to_vec())
                .collect();
            let ledger = ledger_for(x1_rows, &x2_rows, &uniform, d, power, &budget.entropy, rng)?;
            if ledger.h2_given_g < best_h2 {
                best_h2 = ledger.h2_given_g;
                best_rows = Some(x2_rows);
            }
            let mut i = 0;
            loop {
                if i == digits {
                    break;
                }
                digits_state[i] += 1;
                if digits_state[i] <= x2_cap {
                    break;
                }
                digits_state[i] = 0;
                i += 1;
            }
            if i == digits {
                break;
            }
        }
        return Ok(MappingSearch {
            x2_rows: best_rows.expect("at least one candidate"),
            h2_bits: best_h2,
            exhaustive: true,
            candidates,
        });
    }

    // Annealing on the alignment-mass surrogate: the pairwise alignment
    // probabilities drive the expected set size, which drives the entropy.
    // Per (pair, slot), precompute the mass of each floor-difference value;
    // a candidate's slot factor is then a single lookup.
    let mut pair_hist: Vec<Vec<HashMap<i64, f64>>> = Vec::new();
    let mut pair_index: Vec<(usize, usize)> = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let mut per_slot = Vec::with_capacity(n);
            for t in 0..n {
                let mut hist: HashMap<i64, f64> = HashMap::new();
                for cell in decompose(&[x1_rows[i][t], x1_rows[j][t]], d.support()) {
                    let g = cell.midpoint();
                    let fd = floored_product(g, x1_rows[i][t]) - floored_product(g, x1_rows[j][t]);
                    *hist.entry(fd).or_insert(0.0) += d
                        .interval_probability(cell.lo, cell.hi)
                        .expect("ordered cell");
                }
                per_slot.push(hist);
            }
            pair_hist.push(per_slot);
            pair_index.push((i, j));
        }
    }
    let pair_mass = |x2: &[Vec<i64>], pi: usize| -> f64 {
        let (i, j) = pair_index[pi];
        let mut mass = 1.0;
        for t in 0..n {
            // Aligned at slot t iff floor(g x_i) - floor(g x_j) = x2_j - x2_i.
            let c = x2[j][t] - x2[i][t];
            match pair_hist[pi][t].get(&c) {
                Some(&p) if p > 0.0 => mass *= p,
                _ => return 0.0,
            }
        }
        mass
    };

    let mut x2: Vec<Vec<i64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.gen_range(0..=x2_cap)).collect())
        .collect();
    let mut mass: f64 = (0..pair_index.len()).map(|pi| pair_mass(&x2, pi)).sum();
    let mut best = (x2.clone(), mass);
    let t0 = (mass.abs()).max(0.5);
    let t_end = t0 * 1e-4;
    let cool = (t_end / t0).powf(1.0 / budget.anneal_iters.max(1) as f64);
    let mut temp = t0;
    for _ in 0..budget.anneal_iters {
        let r = rng.gen_range(0..m);
        let t = rng.gen_range(0..n);
        let old = x2[r][t];
        let new = rng.gen_range(0..=x2_cap);
        if new == old {
            temp *= cool;
            continue;
        }
        let affected: Vec<usize> = pair_index
            .iter()
            .enumerate()
            .filter(|(_, &(i, j))| i == r || j == r)
            .map(|(pi, _)| pi)
            .collect();
        let before: f64 = affected.iter().map(|&pi| pair_mass(&x2, pi)).sum();
        x2[r][t] = new;
        let after: f64 = affected.iter().map(|&pi| pair_mass(&x2, pi)).sum();
        let delta = after - before;
        if delta >= 0.0 || rng.gen::<f64>() < (delta / temp).exp() {
            mass += delta;
            if mass > best.1 {
                best = (x2.clone(), mass);
            }
        } else {
            x2[r][t] = old;
        }
        temp *= cool;
    }
    let ledger = ledger_for(x1_rows, &best.0, &uniform, d, power, &budget.entropy, rng)?;
    Ok(MappingSearch {
        x2_rows: best.0,
        h2_bits: ledger.h2_given_g,
        exhaustive: false,
        candidates: budget.anneal_iters as u64,
    })
}

/// One grid instance feeding the sum-DoF assembly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerPoint {
    pub power: f64,
    pub n: usize,
    pub alpha: f64,
    pub ledger: EntropyLedger,
}

/// The assembled bound report for a grid of ledgers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumDofReport {
    /// `1 + sum_k alpha_k`.
    pub theorem_value: f64,
    /// Fitted limit of `log E|S| / ((n/2) log P)`.
    pub fitted_limit: f64,
    pub harmonic_coefficient: f64,
    pub intercept: f64,
    /// Indices of ledgers whose normalized difference exceeds their alpha
    /// plus the tolerance.
    pub flagged: Vec<usize>,
}

/// Fits the normalized set-size growth over a `(P, n)` grid of ledgers and
/// reports it next to the `1 + sum alpha_k` value. Refuses to fit fewer
/// than 3 distinct powers.
pub fn assemble_sum_dof_bound(
    points: &[LedgerPoint],
    alphas: &[f64],
    tolerance: f64,
) -> Result<SumDofReport, EntropyError> {
    let mut powers: Vec<f64> = points.iter().map(|p| p.power).collect();
    powers.sort_by(|a, b| a.partial_cmp(b).expect("finite powers"));
    powers.dedup();
    if powers.len() < 3 {
        return Err(EntropyError::TooFewPowers(powers.len()));
    }
    let fit_points: Vec<(f64, usize, f64)> = points
        .iter()
        .map(|p| (p.power, p.n, p.ledger.log_expected_set_size))
        .collect();
    let fit = fit_dof_limit(&fit_points)?;
    let flagged = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.ledger.normalized_difference > p.alpha + tolerance)
        .map(|(i, _)| i)
        .collect();
    Ok(SumDofReport {
        theorem_value: 1.0 + alphas.iter().sum::<f64>(),
        fitted_limit: fit.alpha_hat,
        harmonic_coefficient: fit.harmonic_coefficient,
        intercept: fit.intercept,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn entropy_of_uniform_and_dyadic() {
        let j: Vec<((u32, u32), f64)> = (0..8).map(|v| ((v, 0), 0.125)).collect();
        assert!((exact_conditional_entropy(j).unwrap() - 3.0).abs() < 1e-12);
        let j = vec![((0u32, 0u32), 1.0)];
        assert_eq!(exact_conditional_entropy(j).unwrap(), 0.0);
        let j = vec![((0u32, 0u32), 0.5), ((1, 0), 0.25), ((2, 0), 0.25)];
        assert!((exact_conditional_entropy(j).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn conditional_entropy_rejects_bad_pmf() {
        let j = vec![((0u32, 0u32), -0.5), ((1, 0), 1.5)];
        assert!(matches!(
            exact_conditional_entropy(j),
            Err(EntropyError::NegativeMass(_))
        ));
        let j = vec![((0u32, 0u32), 0.7)];
        assert!(matches!(
            exact_conditional_entropy(j),
            Err(EntropyError::NotNormalized(_))
        ));
    }

    #[test]
    fn conditional_entropy_averages_cells() {
        // Two equally likely cells: uniform over 4 in one, deterministic in
        // the other -> H = 0.5*2 + 0.5*0 = 1 bit.
        let mut j = Vec::new();
        for v in 0..4u32 {
            j.push(((v, 0u32), 0.125));
        }
        j.push(((0, 1), 0.5));
        assert!((exact_conditional_entropy(j).unwrap() - 1.0).abs() < 1e-12);
    }

    fn zero_mapping_codebook(count: i64, power: f64) -> IntegerCodebook {
        let x1: Vec<Vec<i64>> = (0..count).map(|v| vec![v]).collect();
        let x2 = vec![vec![0]; count as usize];
        IntegerCodebook::two_user(x1, x2, power).unwrap()
    }

    #[test]
    fn ledger_chain_identity_holds_exactly() {
        let cb = zero_mapping_codebook(11, 100.0);
        let d = ChannelDensity::uniform(0.5, 1.5, 100.0).unwrap();
        let pmf = vec![1.0 / 11.0; 11];
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let ledger =
            difference_of_entropies(&cb, &pmf, &d, &EntropyBudget::default(), &mut rng).unwrap();
        assert_eq!(ledger.method, LedgerMethod::Exact);
        assert!((ledger.h1_given_g - 11f64.log2()).abs() < 1e-12);
        let chain = ledger.h2_given_g + ledger.h1_given_y2_g;
        assert!((ledger.h1_given_g - chain).abs() < 1e-9);
        assert!(ledger.h1_given_y2_g <= ledger.expected_log_set_size + 1e-12);
        assert!(ledger.expected_log_set_size <= ledger.log_expected_set_size + 1e-12);
    }

    #[test]
    fn ledger_monte_carlo_agrees_with_exact() {
        let cb = zero_mapping_codebook(11, 100.0);
        let d = ChannelDensity::uniform(0.5, 1.5, 100.0).unwrap();
        let pmf = vec![1.0 / 11.0; 11];
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let exact =
            difference_of_entropies(&cb, &pmf, &d, &EntropyBudget::default(), &mut rng).unwrap();
        let tiny = EntropyBudget {
            max_product_cells: 1,
            mc_samples: 60_000,
        };
        let mc = difference_of_entropies(&cb, &pmf, &d, &tiny, &mut rng).unwrap();
        let stderr = match mc.method {
            LedgerMethod::MonteCarlo { stderr, .. } => stderr,
            _ => panic!("expected Monte Carlo fallback"),
        };
        assert!(
            (mc.h2_given_g - exact.h2_given_g).abs() < 4.0 * stderr + 1e-3,
            "mc = {}, exact = {}, stderr = {stderr}",
            mc.h2_given_g,
            exact.h2_given_g
        );
    }

    #[test]
    fn singleton_codebook_difference_zero() {
        let cb = zero_mapping_codebook(1, 100.0);
        let d = ChannelDensity::uniform(0.5, 1.5, 100.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let ledger =
            difference_of_entropies(&cb, &[1.0], &d, &EntropyBudget::default(), &mut rng).unwrap();
        assert_eq!(ledger.h1_given_g, 0.0);
        assert_eq!(ledger.h2_given_g, 0.0);
    }

    #[test]
    fn zero_forcing_contrast_case() {
        // Channel essentially known: support is one breakpoint-free sliver,
        // and X2 cancels the floored interference exactly.
        let g0 = 0.5103;
        let d = ChannelDensity::new(
            crate::density::DensityFamily::Uniform,
            (g0, g0 + 1e-9),
            100.0,
            0.0,
            2.0,
        )
        .unwrap();
        let x1: Vec<Vec<i64>> = (0..=10).map(|v| vec![v]).collect();
        let x2: Vec<Vec<i64>> = (0..=10)
            .map(|v| vec![5 - floored_product(g0 + 5e-10, v)])
            .collect();
        let cb = IntegerCodebook::two_user(x1, x2, 100.0).unwrap();
        let pmf = vec![1.0 / 11.0; 11];
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let ledger =
            difference_of_entropies(&cb, &pmf, &d, &EntropyBudget::default(), &mut rng).unwrap();
        assert!(ledger.h2_given_g.abs() < 1e-9);
        assert!((ledger.h1_given_g - 11f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_mapping_search_certifies() {
        let d = ChannelDensity::uniform(0.9, 1.1, 100.0).unwrap();
        let x1 = vec![vec![0], vec![1], vec![2]];
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let budget = SearchBudget::default();
        let s = minimize_over_mappings(&x1, 2, &d, 100.0, &budget, &mut rng).unwrap();
        assert!(s.exhaustive);
        assert_eq!(s.candidates, 27);
        // Minimizer dominance: no specific mapping beats the certified min.
        let uniform = vec![1.0 / 3.0; 3];
        for probe in [vec![0, 0, 0], vec![2, 1, 0], vec![1, 2, 0], vec![2, 0, 1]] {
            let x2: Vec<Vec<i64>> = probe.into_iter().map(|v| vec![v]).collect();
            let l = ledger_for(&x1, &x2, &uniform, &d, 100.0, &budget.entropy, &mut rng).unwrap();
            assert!(s.h2_bits <= l.h2_given_g + 1e-12);
        }
    }

    #[test]
    fn single_row_minimizes_to_zero() {
        let d = ChannelDensity::uniform(0.5, 1.5, 100.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let s = minimize_over_mappings(
            &[vec![7]],
            10,
            &d,
            100.0,
            &SearchBudget::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(s.h2_bits, 0.0);
        assert!(s.exhaustive);
    }

    #[test]
    fn distant_rows_keep_positive_interference_entropy() {
        // Rows {0, Q}: the aligning interval has small mass, so the
        // minimized H(Y2|G) stays positive.
        let d = ChannelDensity::uniform(0.5, 1.5, 100.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let s = minimize_over_mappings(
            &[vec![0], vec![10]],
            10,
            &d,
            100.0,
            &SearchBudget::default(),
            &mut rng,
        )
        .unwrap();
        assert!(s.exhaustive);
        assert!(s.h2_bits > 0.0);
    }

    #[test]
    fn assemble_theorem_values() {
        let mk = |p: f64, n: usize| LedgerPoint {
            power: p,
            n,
            alpha: 0.0,
            ledger: EntropyLedger {
                h1_given_g: 1.0,
                h2_given_g: 1.0,
                h1_given_y2_g: 0.0,
                expected_log_set_size: 0.0,
                log_expected_set_size: crate::aligned::harmonic_expected_size_bound(1.0, n, p)
                    .log2(),
                normalizer_bits: n as f64 / 2.0 * p.log2(),
                normalized_difference: 0.0,
                method: LedgerMethod::Exact,
            },
        };
        let points = vec![mk(1e4, 1), mk(1e6, 1), mk(1e8, 1)];
        let r = assemble_sum_dof_bound(&points, &[0.0], 0.05).unwrap();
        assert_eq!(r.theorem_value, 1.0);
        assert!(r.flagged.is_empty());
        let r = assemble_sum_dof_bound(&points, &[0.5], 0.05).unwrap();
        assert!((r.theorem_value - 1.5).abs() < 1e-12);
        let r = assemble_sum_dof_bound(&points, &[0.0, 0.0], 0.05).unwrap();
        assert_eq!(r.theorem_value, 1.0);
        let short = vec![mk(1e4, 1), mk(1e6, 1)];
        assert!(matches!(
            assemble_sum_dof_bound(&short, &[0.0], 0.05),
            Err(EntropyError::TooFewPowers(2))
        ));
    }
}
