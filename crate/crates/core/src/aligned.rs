//! Aligned image sets: exact construction, probability bounds, and the
//! noise-free toy setting.
//!
//! For a fixed channel realization, two codewords are aligned at the
//! unintended receiver when they cast the same integer image there. The
//! partition into aligned sets, the per-pair alignment-probability bound,
//! and the harmonic-sum bound on the expected set size are the quantities
//! the rest of the workspace measures and checks.

use crate::cells::decompose;
use crate::channel::CanonicalChannel;
use crate::density::ChannelDensity;
use crate::deterministic::{deterministic_output, floored_product, two_user_image, IntegerCodebook};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AlignedError {
    #[error("operation requires a 2-user codebook, got {0} users")]
    NotTwoUser(usize),
    #[error("realization covers {got} slots, need {need}")]
    ShortRealization { got: usize, need: usize },
    #[error("codeword not present in the codebook mapping")]
    UnknownCodeword,
    #[error("codeword lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("instance too large: {codewords} codewords x {samples} samples > budget {budget}")]
    InstanceTooLarge {
        codewords: usize,
        samples: usize,
        budget: usize,
    },
    #[error("mapping is not total: no entry for the queried Y_(k-1) row")]
    MalformedMapping,
    #[error("user index {k} out of range for {users} users")]
    BadUser { k: usize, users: usize },
}

/// One equivalence class of codewords casting a common image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedImageSet {
    /// First member, in codebook order.
    pub representative: Vec<i64>,
    /// All X1 rows casting the common image, in codebook order.
    pub members: Vec<Vec<i64>>,
    /// The cross coefficients G(t) this partition was computed under.
    pub realization: Vec<f64>,
    /// The common image Y2 row.
    pub image: Vec<i64>,
}

/// Partitions a two-user codebook into aligned image sets under one
/// realization. Sets are keyed by exact integer image tuples; their union
/// is the codebook and they are pairwise disjoint.
pub fn partition_into_aligned_sets(
    cb: &IntegerCodebook,
    channel: &CanonicalChannel,
) -> Result<Vec<AlignedImageSet>, AlignedError> {
    if cb.users() != 2 {
        return Err(AlignedError::NotTwoUser(cb.users()));
    }
    if channel.block_len() < cb.block_len() {
        return Err(AlignedError::ShortRealization {
            got: channel.block_len(),
            need: cb.block_len(),
        });
    }
    let g: Vec<f64> = (1..=cb.block_len()).map(|t| channel.g21(t)).collect();
    let mapping = cb.mapping_table();
    let mut by_image: HashMap<Vec<i64>, Vec<Vec<i64>>> = HashMap::new();
    let mut order: Vec<Vec<i64>> = Vec::new();
    for x1 in cb.distinct_x1_rows() {
        let image = two_user_image(x1, mapping[x1], &g);
        let entry = by_image.entry(image.clone()).or_insert_with(|| {
            order.push(image);
            Vec::new()
        });
        entry.push(x1.to_vec());
    }
    Ok(order
        .into_iter()
        .map(|image| {
            let members = by_image.remove(&image).expect("image recorded");
            AlignedImageSet {
                representative: members[0].clone(),
                members,
                realization: g.clone(),
                image,
            }
        })
        .collect())
}

/// The admissible channel interval for one slot of a codeword pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotInterval {
    /// 1-based slot.
    pub t: usize,
    pub lo: f64,
    pub hi: f64,
    /// `2 / |x(t) - nu(t)|`, the width before clipping to the support.
    pub width: f64,
}

/// Product-form upper bound on the probability that two codewords align.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseBound {
    /// `min(1, f_max^n * prod_t 2/|x(t)-nu(t)|)` over differing slots.
    pub bound: f64,
    /// Admissible G(t) interval per differing slot, clipped to the support.
    pub intervals: Vec<SlotInterval>,
}

/// The interval-length bound on `P(x aligns with nu)` plus the admissible
/// per-slot intervals. Identical codewords get bound 1 and no intervals:
/// they align by construction.
pub fn pairwise_alignment_probability_bound(
    x: &[i64],
    nu: &[i64],
    mapping: &HashMap<&[i64], &[i64]>,
    d: &ChannelDensity,
) -> Result<PairwiseBound, AlignedError> {
    if x.len() != nu.len() {
        return Err(AlignedError::LengthMismatch(x.len(), nu.len()));
    }
    if x == nu {
        return Ok(PairwiseBound {
            bound: 1.0,
            intervals: Vec::new(),
        });
    }
    let x2_x = *mapping.get(x).ok_or(AlignedError::UnknownCodeword)?;
    let x2_nu = *mapping.get(nu).ok_or(AlignedError::UnknownCodeword)?;
    let n = x.len();
    let (lo_s, hi_s) = d.support();
    let mut bound = d.f_max().powi(n as i32);
    let mut intervals = Vec::new();
    for t in 0..n {
        let delta = x[t] - nu[t];
        if delta == 0 {
            continue;
        }
        bound *= 2.0 / delta.abs() as f64;
        // Alignment at slot t pins floor(G x) - floor(G nu) to the mapping
        // offset c, hence G*delta lies within (c-1, c+1).
        let c = (x2_nu[t] - x2_x[t]) as f64;
        let a = (c - 1.0) / delta as f64;
        let b = (c + 1.0) / delta as f64;
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        intervals.push(SlotInterval {
            t: t + 1,
            lo: a.max(lo_s),
            hi: b.min(hi_s).max(a.max(lo_s)),
            width: 2.0 / delta.abs() as f64,
        });
    }
    Ok(PairwiseBound {
        bound: bound.min(1.0),
        intervals,
    })
}

/// Exact alignment probability of a codeword pair under i.i.d. slots:
/// per slot, the aligning channel set is a finite union of intervals
/// delimited by floor breakpoints, integrated in closed form, then
/// multiplied across slots.
pub fn pairwise_alignment_probability_exact(
    x: &[i64],
    nu: &[i64],
    mapping: &HashMap<&[i64], &[i64]>,
    d: &ChannelDensity,
) -> Result<f64, AlignedError> {
    if x.len() != nu.len() {
        return Err(AlignedError::LengthMismatch(x.len(), nu.len()));
    }
    if x == nu {
        return Ok(1.0);
    }
    let x2_x = *mapping.get(x).ok_or(AlignedError::UnknownCodeword)?;
    let x2_nu = *mapping.get(nu).ok_or(AlignedError::UnknownCodeword)?;
    let mut prob = 1.0;
    for t in 0..x.len() {
        let c = x2_nu[t] - x2_x[t];
        if x[t] == nu[t] {
            if c != 0 {
                return Ok(0.0);
            }
            continue;
        }
        let mut p_t = 0.0;
        for cell in decompose(&[x[t], nu[t]], d.support()) {
            let g = cell.midpoint();
            if floored_product(g, x[t]) - floored_product(g, nu[t]) == c {
                p_t += d
                    .interval_probability(cell.lo, cell.hi)
                    .expect("cell is ordered");
            }
        }
        if p_t == 0.0 {
            return Ok(0.0);
        }
        prob *= p_t;
    }
    Ok(prob)
}

/// `H_q = sum_{k=1}^{q} 1/k`.
pub fn harmonic_number(q: u64) -> f64 {
    (1..=q).map(|k| 1.0 / k as f64).sum()
}

/// The exact finite-P harmonic-sum bound on the expected aligned-set size:
/// `1 + (2 f_max)^n * (1 + 2 H_Q)^n` with `Q = ceil(sqrt(P))`.
pub fn harmonic_expected_size_bound(f_max: f64, n: usize, power: f64) -> f64 {
    let q = power.sqrt().ceil() as u64;
    1.0 + (2.0 * f_max).powi(n as i32) * (1.0 + 2.0 * harmonic_number(q)).powi(n as i32)
}

/// One checked pair in an [`AlignmentBoundReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseCheck {
    pub i: usize,
    pub j: usize,
    pub bound: f64,
    pub exact: f64,
}

/// Empirical versus analytic expected aligned-set size, with the per-pair
/// probability bounds that drive the analytic side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentBoundReport {
    pub num_codewords: usize,
    pub samples: usize,
    /// Monte Carlo `E|S|` under a uniformly chosen codeword.
    pub empirical_mean_size: f64,
    /// The exact harmonic-sum bound (no asymptotic slack).
    pub analytic_bound: f64,
    pub pairwise: Vec<PairwiseCheck>,
    /// Per slot (1-based), the largest admissible-interval width over pairs.
    pub per_time_interval_widths: Vec<f64>,
    /// True when the empirical mean exceeded the analytic bound; such a run
    /// is a falsification candidate and callers dump it.
    pub violation: bool,
}

/// Monte Carlo estimate of the expected aligned-set size against the exact
/// harmonic-sum bound. Refuses instances where `codewords * samples`
/// exceeds the budget.
pub fn expected_set_size<R: Rng + ?Sized>(
    cb: &IntegerCodebook,
    d: &ChannelDensity,
    samples: usize,
    budget: usize,
    rng: &mut R,
) -> Result<AlignmentBoundReport, AlignedError> {
    if cb.users() != 2 {
        return Err(AlignedError::NotTwoUser(cb.users()));
    }
    let codewords = cb.distinct_x1_rows().len();
    if codewords.saturating_mul(samples) > budget {
        return Err(AlignedError::InstanceTooLarge {
            codewords,
            samples,
            budget,
        });
    }
    let n = cb.block_len();
    let rows = cb.distinct_x1_rows();
    let mapping = cb.mapping_table();

    let mut mean_size = 0.0;
    let mut g = vec![0.0f64; n];
    let mut counts: HashMap<Vec<i64>, usize> = HashMap::new();
    for _ in 0..samples {
        for slot in g.iter_mut() {
            *slot = d.sample(rng);
        }
        counts.clear();
        for x1 in &rows {
            *counts.entry(two_user_image(x1, mapping[*x1], &g)).or_insert(0) += 1;
        }
        // Size of the set containing a uniformly drawn codeword.
        let sum_sq: usize = counts.values().map(|c| c * c).sum();
        mean_size += sum_sq as f64 / codewords as f64;
    }
    mean_size /= samples as f64;

    let mut pairwise = Vec::new();
    let mut widths = vec![0.0f64; n];
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            let b = pairwise_alignment_probability_bound(rows[i], rows[j], &mapping, d)?;
            let exact = pairwise_alignment_probability_exact(rows[i], rows[j], &mapping, d)?;
            for iv in &b.intervals {
                widths[iv.t - 1] = widths[iv.t - 1].max(iv.width);
            }
            pairwise.push(PairwiseCheck {
                i,
                j,
                bound: b.bound,
                exact,
            });
        }
    }
    let analytic_bound = harmonic_expected_size_bound(d.f_max(), n, cb.power());
    Ok(AlignmentBoundReport {
        num_codewords: codewords,
        samples,
        empirical_mean_size: mean_size,
        analytic_bound,
        pairwise,
        per_time_interval_widths: widths,
        violation: mean_size > analytic_bound,
    })
}

/// Deterministic mapping from realized `Y_(k-1)` rows to the input rows
/// that cast them, fixed from a codebook and one realization of user
/// k-1's channel. When several input tuples cast the same row the first
/// message in codebook order wins.
#[derive(Debug, Clone)]
pub struct YMapping {
    k: usize,
    table: HashMap<Vec<i64>, Vec<Vec<i64>>>,
    collisions: usize,
}

impl YMapping {
    pub fn from_codebook(
        cb: &IntegerCodebook,
        channel: &CanonicalChannel,
        k: usize,
    ) -> Result<Self, AlignedError> {
        if k < 2 || k > cb.users() {
            return Err(AlignedError::BadUser {
                k,
                users: cb.users(),
            });
        }
        let mut table = HashMap::new();
        let mut collisions = 0;
        for msg in 0..cb.num_messages() {
            let out = deterministic_output(cb, msg, channel)
                .map_err(|_| AlignedError::ShortRealization {
                    got: channel.block_len(),
                    need: cb.block_len(),
                })?;
            let y = out.user(k - 1).to_vec();
            let inputs: Vec<Vec<i64>> = (1..=k).map(|u| cb.row(msg, u).to_vec()).collect();
            if table.contains_key(&y) {
                collisions += 1;
            } else {
                table.insert(y, inputs);
            }
        }
        Ok(Self {
            k,
            table,
            collisions,
        })
    }

    pub fn inputs(&self, y: &[i64]) -> Option<&[Vec<i64>]> {
        self.table.get(y).map(|v| v.as_slice())
    }

    pub fn collisions(&self) -> usize {
        self.collisions
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Outcome of the K-user alignment predicate for one row pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KUserAlignment {
    pub aligned: bool,
    /// First slot (1-based) where the user-k images differ, if any.
    pub violated_slot: Option<usize>,
    /// Per slot: the argmax coordinate `j*` and its symbol difference,
    /// when some coordinate differs.
    pub jstar: Vec<Option<(usize, i64)>>,
    /// Per slot: `2 / |x'_{j*}(t) - x_{j*}(t)|` when the argmax differs.
    pub interval_widths: Vec<Option<f64>>,
    /// `min(1, f_max^n * prod_t 2/|dx_{j*}(t)|)`.
    pub x_domain_bound: f64,
    /// The relaxed bound in the Y domain, with the `(-K, K)` slack and the
    /// realized `gbar` factor.
    pub y_domain_bound: f64,
    pub gbar: f64,
}

/// Tests whether two realized `Y_(k-1)` rows cast the same image at user k,
/// and evaluates the interval-width and relaxed Y-domain bounds for the
/// pair. `G_kk(t) = 1` by convention.
pub fn kuser_alignment_test(
    mapping: &YMapping,
    channel: &CanonicalChannel,
    y: &[i64],
    y_prime: &[i64],
    f_max_k: f64,
) -> Result<KUserAlignment, AlignedError> {
    if y.len() != y_prime.len() {
        return Err(AlignedError::LengthMismatch(y.len(), y_prime.len()));
    }
    let k = mapping.k();
    let n = y.len();
    if channel.block_len() < n {
        return Err(AlignedError::ShortRealization {
            got: channel.block_len(),
            need: n,
        });
    }
    let x = mapping.inputs(y).ok_or(AlignedError::MalformedMapping)?;
    let x_prime = mapping.inputs(y_prime).ok_or(AlignedError::MalformedMapping)?;

    let image = |rows: &[Vec<i64>], t: usize| -> i64 {
        (1..=k)
            .map(|j| floored_product(channel.coeff(k, j, t), rows[j - 1][t - 1]))
            .sum()
    };

    let mut aligned = true;
    let mut violated_slot = None;
    let mut jstar = Vec::with_capacity(n);
    let mut widths = Vec::with_capacity(n);
    let mut x_bound = f_max_k.powi(n as i32);
    let mut gbar = 1.0f64;
    let mut y_bound = f_max_k.powi(n as i32);
    let users_k = k as i64;
    for t in 1..=n {
        if aligned && image(x, t) != image(x_prime, t) {
            aligned = false;
            violated_slot = Some(t);
        }
        // argmax over j in [1 : k-1] of the symbol difference.
        let mut best: Option<(usize, i64)> = None;
        for j in 1..k {
            let dx = x_prime[j - 1][t - 1] - x[j - 1][t - 1];
            if best.map_or(true, |(_, b)| dx.abs() > b.abs()) {
                best = Some((j, dx));
            }
        }
        let best = best.filter(|&(_, dx)| dx != 0);
        if let Some((_, dx)) = best {
            let w = 2.0 / dx.abs() as f64;
            widths.push(Some(w));
            x_bound *= w;
            let gain_sum: f64 = (1..k).map(|j| channel.coeff(k - 1, j, t).abs()).sum();
            gbar *= 2.0 * gain_sum;
        } else {
            widths.push(None);
        }
        jstar.push(best);
        let dy = (y_prime[t - 1] - y[t - 1]).abs();
        if dy > users_k {
            y_bound *= 1.0 / (dy - users_k) as f64;
        }
    }
    gbar = gbar.max(1.0);
    Ok(KUserAlignment {
        aligned,
        violated_slot,
        jstar,
        interval_widths: widths,
        x_domain_bound: x_bound.min(1.0),
        y_domain_bound: (gbar * y_bound).min(1.0),
        gbar,
    })
}

/// Per-channel image counts of a noise-free single-slot codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub per_channel_counts: Vec<(f64, usize)>,
    /// Codewords sharing an image under one channel have pairwise-distinct
    /// images under every other channel in the set.
    pub cross_channel_separated: bool,
    pub max_count: usize,
    pub min_count: usize,
    pub sqrt_codebook: f64,
}

fn exact_image(g: &BigRational, x1: i64, x2: i64) -> BigRational {
    g * BigRational::from_integer(BigInt::from(x1)) + BigRational::from_integer(BigInt::from(x2))
}

/// Counts distinct noise-free images `G*x1 + x2` per channel, in exact
/// arithmetic, and verifies the single-slope separation across channels.
pub fn toy_distinct_images(codebook: &[(i64, i64)], channels: &[f64]) -> ToyReport {
    let gs: Vec<BigRational> = channels
        .iter()
        .map(|&g| BigRational::from_float(g).expect("finite channel"))
        .collect();
    let mut per_channel_counts = Vec::with_capacity(channels.len());
    let mut classes: Vec<Vec<Vec<usize>>> = Vec::with_capacity(channels.len());
    for (ci, g) in gs.iter().enumerate() {
        let mut by_image: HashMap<BigRational, Vec<usize>> = HashMap::new();
        for (idx, &(x1, x2)) in codebook.iter().enumerate() {
            by_image.entry(exact_image(g, x1, x2)).or_default().push(idx);
        }
        per_channel_counts.push((channels[ci], by_image.len()));
        classes.push(by_image.into_values().collect());
    }
    let mut separated = true;
    'outer: for (ci, chans) in classes.iter().enumerate() {
        for class in chans.iter().filter(|c| c.len() >= 2) {
            for (cj, g_other) in gs.iter().enumerate() {
                if cj == ci {
                    continue;
                }
                let mut seen = HashMap::new();
                for &idx in class {
                    let (x1, x2) = codebook[idx];
                    if seen.insert(exact_image(g_other, x1, x2), idx).is_some() {
                        separated = false;
                        break 'outer;
                    }
                }
            }
        }
    }
    let max_count = per_channel_counts.iter().map(|&(_, c)| c).max().unwrap_or(0);
    let min_count = per_channel_counts.iter().map(|&(_, c)| c).min().unwrap_or(0);
    ToyReport {
        per_channel_counts,
        cross_channel_separated: separated,
        max_count,
        min_count,
        sqrt_codebook: (codebook.len() as f64).sqrt(),
    }
}

/// Result of the exhaustive search for a mapping that keeps every channel
/// below `ceil(sqrt(N))` distinct images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySearch {
    /// A mapping `x2(x1)` defeating the pigeonhole target, if one exists.
    pub counterexample: Option<Vec<i64>>,
    pub nodes_explored: u64,
    /// `ceil(sqrt(N))`.
    pub target: usize,
}

/// Exhaustive (branch-and-prune, hence complete) search over all mappings
/// `x2 : x1 -> [x2_lo : x2_hi]` for one where every channel in the set sees
/// fewer than `ceil(sqrt(N))` distinct images. Returns `None` in
/// `counterexample` when no mapping defeats the target.
pub fn toy_pigeonhole_search(
    x1_values: &[i64],
    x2_range: (i64, i64),
    channels: &[f64],
) -> ToySearch {
    let n = x1_values.len();
    let target = (n as f64).sqrt().ceil() as usize;
    let (x2_lo, x2_hi) = x2_range;
    let options = (x2_hi - x2_lo + 1) as usize;
    // Exact image keys: for G = p/q (every f64 is such a rational),
    // G*x1 + x2 collides exactly iff p*x1 + q*x2 collides.
    let pq: Vec<(i128, i128)> = channels
        .iter()
        .map(|&g| {
            let r = BigRational::from_float(g).expect("finite channel");
            (
                r.numer().to_i128().expect("channel numerator fits i128"),
                r.denom().to_i128().expect("channel denominator fits i128"),
            )
        })
        .collect();
    let keys: Vec<Vec<Vec<i128>>> = pq
        .iter()
        .map(|&(p, q)| {
            x1_values
                .iter()
                .map(|&x1| {
                    (0..options)
                        .map(|o| p * x1 as i128 + q * (x2_lo + o as i64) as i128)
                        .collect()
                })
                .collect()
        })
        .collect();

    struct Search<'a> {
        keys: &'a [Vec<Vec<i128>>],
        n: usize,
        target: usize,
        options: usize,
        x2_lo: i64,
        nodes: u64,
        assignment: Vec<usize>,
        images: Vec<Vec<i128>>,
    }

    impl Search<'_> {
        fn run(&mut self, depth: usize) -> bool {
            if depth == self.n {
                return true;
            }
            'options: for o in 0..self.options {
                self.nodes += 1;
                let mut added: Vec<usize> = Vec::with_capacity(self.keys.len());
                for (c, per_channel) in self.keys.iter().enumerate() {
                    let key = per_channel[depth][o];
                    let new = !self.images[c].contains(&key);
                    if new && self.images[c].len() + 1 >= self.target {
                        // This channel already resolves >= target images;
                        // no completion of this branch can defeat it.
                        for &a in &added {
                            self.images[a].pop();
                        }
                        continue 'options;
                    }
                    if new {
                        self.images[c].push(key);
                        added.push(c);
                    }
                }
                self.assignment.push(o);
                if self.run(depth + 1) {
                    return true;
                }
                self.assignment.pop();
                for &c in &added {
                    self.images[c].pop();
                }
            }
            false
        }
    }

    let mut search = Search {
        keys: &keys,
        n,
        target,
        options,
        x2_lo,
        nodes: 0,
        assignment: Vec::with_capacity(n),
        images: vec![Vec::new(); channels.len()],
    };
    let found = search.run(0);
    ToySearch {
        counterexample: found.then(|| {
            search
                .assignment
                .iter()
                .map(|&o| search.x2_lo + o as i64)
                .collect()
        }),
        nodes_explored: search.nodes,
        target,
    }
}
