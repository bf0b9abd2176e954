//! Numerical laboratory for aligned-image-set bounds on the K-user MISO
//! broadcast channel under finite-precision CSIT.
//!
//! The converse side builds the discretized noise-free channel, partitions
//! codebooks into aligned image sets, and checks the interval-probability
//! and harmonic-sum bounds exactly on small instances. The achievability
//! side simulates zero forcing with quantized feedback and two-slot blind
//! interference alignment, and fits DoF slopes from finite-P rate curves.

pub mod aligned;
pub mod cells;
pub mod channel;
pub mod config;
pub mod density;
pub mod deterministic;
pub mod entropy;
pub mod fitting;
pub mod report;
pub mod rng;
pub mod schemes;

pub use aligned::{
    expected_set_size, harmonic_expected_size_bound, harmonic_number, kuser_alignment_test,
    pairwise_alignment_probability_bound, pairwise_alignment_probability_exact,
    partition_into_aligned_sets, toy_distinct_images, toy_pigeonhole_search, AlignedError,
    AlignedImageSet, AlignmentBoundReport, KUserAlignment, PairwiseBound, ToyReport, ToySearch,
    YMapping,
};
pub use channel::{
    reduce_to_canonical, CanonicalChannel, ChannelError, GeneralChannel2x2, InputTransform,
};
pub use config::{
    CodebookSource, ConfigError, CsitSpec, DensitySpec, ExperimentConfig, GeneratorSpec, Grid,
    ToySpec,
};
pub use density::{ChannelDensity, CsitState, DensityError, DensityFamily, UserCsit};
pub use deterministic::{
    deterministic_output, integerize, mod_reduce, offset_entropy_bound,
    offset_entropy_bound_summed, paper_floor, DeterministicError, DeterministicOutput,
    IntegerCodebook, ModReduce,
};
pub use entropy::{
    assemble_sum_dof_bound, difference_of_entropies, entropy_bits, exact_conditional_entropy,
    minimize_over_mappings, EntropyBudget, EntropyError, EntropyLedger, LedgerMethod,
    LedgerPoint, MappingSearch, SearchBudget, SumDofReport,
};
pub use fitting::{fit_dof_limit, linear_fit, DofLimitFit, FitError, LinearFit};
pub use report::{CsvSink, ExperimentResult, NamedSeries, Provenance};
pub use rng::stream_rng;
pub use schemes::{
    blind_ia_pn, power_grid, residual_exponent_fit, slope_fit, zf_quantized_feedback, DofEstimate,
    RatePoint, SchemeTag, SchemesError,
};
