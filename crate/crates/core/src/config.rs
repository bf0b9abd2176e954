//! Experiment configuration: a single JSON file plus flag overrides.
//!
//! The schema is strict; unknown keys are a usage error, never silently
//! ignored. Everything a run needs to be reproduced travels inside the
//! config, and its hash is embedded in every artifact.

use crate::channel::{ChannelError, GeneralChannel2x2};
use crate::density::{ChannelDensity, DensityError};
use crate::deterministic::{symbol_cap, CodebookFile, DeterministicError, IntegerCodebook};
use crate::entropy::EntropyBudget;
use crate::report::{config_hash, Provenance};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config does not match the schema: {0}")]
    Schema(#[from] serde_json::Error),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Codebook(#[from] DeterministicError),
    #[error("subcommand requires the `{0}` config section")]
    MissingSection(&'static str),
}

fn default_users() -> usize {
    2
}

fn default_m() -> f64 {
    4.0
}

fn default_support() -> [f64; 2] {
    [0.5, 1.5]
}

fn default_tolerance() -> f64 {
    0.05
}

/// Channel density described in the experiment file. The atomic variant
/// exists so finite-state compound runs can be expressed and rejected: an
/// atomic law puts mass on a zero-measure set and has no bounded density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensitySpec {
    Uniform {
        #[serde(default)]
        alpha: f64,
        #[serde(default = "default_support")]
        support: [f64; 2],
    },
    TruncatedGaussian {
        #[serde(default)]
        alpha: f64,
        #[serde(default = "default_support")]
        support: [f64; 2],
        mean: f64,
        std_dev: f64,
    },
    QuantizedPosterior {
        #[serde(default)]
        alpha: f64,
        #[serde(default = "default_support")]
        support: [f64; 2],
        #[serde(default)]
        true_g: Option<f64>,
        #[serde(default)]
        feedback_bits: Option<u32>,
    },
    Atomic {
        points: Vec<f64>,
    },
}

impl DensitySpec {
    /// Instantiates the density at power `P`. For `alpha > 0` the peak is
    /// made to track `P^(alpha/2)`: the uniform family by shrinking its
    /// width, the gaussian by shrinking its scale, the quantized family by
    /// feedback bits. A random `true_g` is drawn from the prior when the
    /// quantized spec leaves it open.
    pub fn build<R: Rng + ?Sized>(
        &self,
        power: f64,
        rng: &mut R,
    ) -> Result<ChannelDensity, DensityError> {
        match self {
            DensitySpec::Uniform { alpha, support } => {
                if *alpha == 0.0 {
                    ChannelDensity::uniform(support[0], support[1], power)
                } else {
                    ChannelDensity::uniform_scaled(power, *alpha)
                }
            }
            DensitySpec::TruncatedGaussian {
                alpha,
                support,
                mean,
                std_dev,
            } => {
                let sigma = std_dev * power.powf(-alpha / 2.0);
                ChannelDensity::truncated_gaussian(*mean, sigma, support[0], support[1], power)
            }
            DensitySpec::QuantizedPosterior {
                alpha,
                support,
                true_g,
                feedback_bits,
            } => {
                let prior = ChannelDensity::uniform(support[0], support[1], power)?;
                let bits = feedback_bits
                    .unwrap_or_else(|| ((alpha / 2.0) * power.log2()).ceil().max(0.0) as u32);
                let g = true_g.unwrap_or_else(|| prior.sample(rng));
                prior.build_quantized_posterior(g, bits)
            }
            DensitySpec::Atomic { .. } => Err(DensityError::AtomicLaw),
        }
    }
}

/// Per-user CSIT marker for the experiment file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsitSpec {
    Perfect,
    Density,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Correlation {
    pub rho: f64,
}

impl Default for Correlation {
    fn default() -> Self {
        Self { rho: 0.0 }
    }
}

/// The (P, n, alpha) experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default = "Grid::default_p")]
    pub p: Vec<f64>,
    #[serde(default = "Grid::default_n")]
    pub n: Vec<usize>,
    #[serde(default = "Grid::default_alpha")]
    pub alpha: Vec<f64>,
}

impl Grid {
    fn default_p() -> Vec<f64> {
        vec![1e2, 1e3, 1e4]
    }

    fn default_n() -> Vec<usize> {
        vec![1, 2]
    }

    fn default_alpha() -> Vec<f64> {
        vec![0.0, 0.5, 1.0]
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            p: Self::default_p(),
            n: Self::default_n(),
            alpha: Self::default_alpha(),
        }
    }
}

/// Where the codebook comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum CodebookSource {
    /// Columnar codebook JSON on disk.
    File { path: String },
    /// Generated in-process.
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// X1 values spread over the symbol range, X2 = 0.
    Ramp { count: usize },
    /// Random distinct X1 rows with random X2 rows.
    Random { count: usize },
    /// X2 = (offset + mult * X1) mod (cap + 1).
    Affine { count: usize, mult: i64, offset: i64 },
}

impl CodebookSource {
    pub fn load<R: Rng + ?Sized>(
        &self,
        n: usize,
        power: f64,
        rng: &mut R,
    ) -> Result<IntegerCodebook, ConfigError> {
        match self {
            CodebookSource::File { path } => {
                let text = fs::read_to_string(path)?;
                let file: CodebookFile = serde_json::from_str(&text)?;
                Ok(IntegerCodebook::try_from(file)?)
            }
            CodebookSource::Generator(spec) => Ok(generate_codebook(spec, n, power, rng)?),
        }
    }
}

/// Builds a two-user codebook from a generator spec.
pub fn generate_codebook<R: Rng + ?Sized>(
    spec: &GeneratorSpec,
    n: usize,
    power: f64,
    rng: &mut R,
) -> Result<IntegerCodebook, DeterministicError> {
    let cap = symbol_cap(power);
    match spec {
        GeneratorSpec::Ramp { count } => {
            let count = (*count).max(1);
            let value = |r: usize| -> i64 {
                if count == 1 {
                    0
                } else {
                    ((r as f64) * cap as f64 / (count - 1) as f64).round() as i64
                }
            };
            let x1: Vec<Vec<i64>> = (0..count)
                .map(|r| (0..n).map(|t| value((r + t) % count)).collect())
                .collect();
            let x2 = vec![vec![0; n]; count];
            IntegerCodebook::two_user(x1, x2, power)
        }
        GeneratorSpec::Random { count } => {
            let mut x1: Vec<Vec<i64>> = Vec::with_capacity(*count);
            while x1.len() < *count {
                let row: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=cap)).collect();
                if !x1.contains(&row) {
                    x1.push(row);
                }
            }
            let x2: Vec<Vec<i64>> = (0..*count)
                .map(|_| (0..n).map(|_| rng.gen_range(0..=cap)).collect())
                .collect();
            IntegerCodebook::two_user(x1, x2, power)
        }
        GeneratorSpec::Affine {
            count,
            mult,
            offset,
        } => {
            let count = (*count).max(1);
            let value = |r: usize| -> i64 {
                if count == 1 {
                    0
                } else {
                    ((r as f64) * cap as f64 / (count - 1) as f64).round() as i64
                }
            };
            let x1: Vec<Vec<i64>> = (0..count)
                .map(|r| (0..n).map(|t| value((r + t) % count)).collect())
                .collect();
            let x2 = x1
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|v| (offset + mult * v).rem_euclid(cap + 1))
                        .collect()
                })
                .collect();
            IntegerCodebook::two_user(x1, x2, power)
        }
    }
}

/// Sample and search budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    /// Monte Carlo realizations per expected-set-size estimate.
    #[serde(default = "Budgets::default_mc_samples")]
    pub mc_samples: usize,
    /// Cap on `codewords * samples` for exhaustive partitioning.
    #[serde(default = "Budgets::default_partition_budget")]
    pub partition_budget: usize,
    /// Cap on product cells for exact entropy conditioning.
    #[serde(default = "Budgets::default_cell_budget")]
    pub cell_budget: u64,
    /// Fallback sample count when the cell budget is exceeded.
    #[serde(default = "Budgets::default_entropy_mc_samples")]
    pub entropy_mc_samples: usize,
    /// Simulated-annealing iterations for the mapping search.
    #[serde(default = "Budgets::default_anneal_iters")]
    pub anneal_iters: usize,
    /// Trials per scheme rate point.
    #[serde(default = "Budgets::default_trials")]
    pub trials: usize,
}

impl Budgets {
    fn default_mc_samples() -> usize {
        2_000
    }

    fn default_partition_budget() -> usize {
        5_000_000
    }

    fn default_cell_budget() -> u64 {
        2_000_000
    }

    fn default_entropy_mc_samples() -> usize {
        20_000
    }

    fn default_anneal_iters() -> usize {
        20_000
    }

    fn default_trials() -> usize {
        4_096
    }

    pub fn entropy_budget(&self) -> EntropyBudget {
        EntropyBudget {
            max_product_cells: self.cell_budget as u128,
            mc_samples: self.entropy_mc_samples,
        }
    }
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            mc_samples: Self::default_mc_samples(),
            partition_budget: Self::default_partition_budget(),
            cell_budget: Self::default_cell_budget(),
            entropy_mc_samples: Self::default_entropy_mc_samples(),
            anneal_iters: Self::default_anneal_iters(),
            trials: Self::default_trials(),
        }
    }
}

/// The noise-free single-slot toy instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToySpec {
    /// `(x1, x2)` codeword pairs.
    pub codebook: Vec<(i64, i64)>,
    pub channels: Vec<f64>,
    /// When set, also search all mappings `x2 : x1 -> [lo : hi]` for one
    /// defeating the sqrt pigeonhole target.
    #[serde(default)]
    pub x2_range: Option<[i64; 2]>,
}

/// A concrete general 2x2 channel for the canonical reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralChannelSpec {
    pub m: f64,
    pub p_tilde: f64,
    pub coefficients: Vec<[[f64; 2]; 2]>,
}

impl GeneralChannelSpec {
    pub fn build(&self) -> Result<GeneralChannel2x2, ChannelError> {
        GeneralChannel2x2::new(self.coefficients.clone(), self.m, self.p_tilde)
    }
}

/// The experiment file. See the repository README for a walkthrough of
/// every section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_users")]
    pub users: usize,
    #[serde(default = "default_m")]
    pub m: f64,
    #[serde(default)]
    pub seed: u64,
    pub density: DensitySpec,
    #[serde(default)]
    pub csit: Vec<CsitSpec>,
    #[serde(default)]
    pub correlation: Correlation,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub codebook: Option<CodebookSource>,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub toy: Option<ToySpec>,
    #[serde(default)]
    pub general_channel: Option<GeneralChannelSpec>,
    /// Slack added to alpha when flagging normalized differences.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Hash of the canonical serialized form, embedded in every artifact.
    pub fn hash_hex(&self) -> String {
        config_hash(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            config_hash: self.hash_hex(),
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"density": {"family": "uniform"}}"#).unwrap();
        assert_eq!(cfg.users, 2);
        assert_eq!(cfg.m, 4.0);
        assert_eq!(cfg.grid.p, vec![1e2, 1e3, 1e4]);
        assert_eq!(cfg.budgets.trials, 4096);
    }

    #[test]
    fn unknown_keys_are_schema_errors() {
        let r: Result<ExperimentConfig, _> =
            serde_json::from_str(r#"{"density": {"family": "uniform"}, "tyop": 1}"#);
        assert!(r.is_err());
    }

    #[test]
    fn atomic_family_is_rejected_at_build() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"density": {"family": "atomic", "points": [0.7, 1.3]}}"#,
        )
        .unwrap();
        let mut rng = stream_rng(0, 0);
        let err = cfg.density.build(100.0, &mut rng).unwrap_err();
        assert_eq!(err, DensityError::AtomicLaw);
    }

    #[test]
    fn hash_tracks_content() {
        let a: ExperimentConfig =
            serde_json::from_str(r#"{"density": {"family": "uniform"}, "seed": 1}"#).unwrap();
        let b: ExperimentConfig =
            serde_json::from_str(r#"{"density": {"family": "uniform"}, "seed": 2}"#).unwrap();
        assert_ne!(a.hash_hex(), b.hash_hex());
        assert_eq!(a.hash_hex(), a.hash_hex());
    }

    #[test]
    fn generators_respect_symbol_cap() {
        let mut rng = stream_rng(3, 0);
        for spec in [
            GeneratorSpec::Ramp { count: 7 },
            GeneratorSpec::Random { count: 7 },
            GeneratorSpec::Affine {
                count: 7,
                mult: 3,
                offset: 1,
            },
        ] {
            let cb = generate_codebook(&spec, 2, 100.0, &mut rng).unwrap();
            assert_eq!(cb.num_messages(), 7);
            assert_eq!(cb.block_len(), 2);
        }
    }

    #[test]
    fn scaled_families_track_power() {
        let mut rng = stream_rng(4, 0);
        for spec in [
            DensitySpec::Uniform {
                alpha: 0.5,
                support: [0.5, 1.5],
            },
            DensitySpec::TruncatedGaussian {
                alpha: 0.5,
                support: [0.5, 1.5],
                mean: 1.0,
                std_dev: 0.25,
            },
            DensitySpec::QuantizedPosterior {
                alpha: 0.5,
                support: [0.5, 1.5],
                true_g: None,
                feedback_bits: None,
            },
        ] {
            for p in [1e4, 1e6] {
                let d = spec.build(p, &mut rng).unwrap();
                let target = p.powf(0.25);
                assert!(
                    d.f_max() >= 0.5 * target && d.f_max() <= 4.0 * target,
                    "{spec:?} at P = {p}: f_max = {}, target = {target}",
                    d.f_max()
                );
            }
        }
    }
}
