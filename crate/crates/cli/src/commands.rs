//! Subcommand implementations.
//!
//! Grid cells fan out over the worker pool with one RNG stream per cell,
//! then results are written in grid order through a single collector, so
//! identical config + seed reproduces byte-identical artifacts regardless
//! of thread count.

use aisets_core::config::GeneratorSpec;
use aisets_core::entropy::LedgerPoint;
use aisets_core::*;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::path::{Path, PathBuf};

pub enum RunStatus {
    Ok,
    Falsified { dump: PathBuf },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(std::io::Error),
    Run(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
            CliError::Run(m) => write!(f, "{m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<DensityError> for CliError {
    fn from(e: DensityError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ChannelError> for CliError {
    fn from(e: ChannelError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<AlignedError> for CliError {
    fn from(e: AlignedError) -> Self {
        CliError::Run(e.to_string())
    }
}

impl From<EntropyError> for CliError {
    fn from(e: EntropyError) -> Self {
        CliError::Run(e.to_string())
    }
}

impl From<SchemesError> for CliError {
    fn from(e: SchemesError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn dump_falsification<T: Serialize>(
    out: &Path,
    provenance: &Provenance,
    instance: &T,
) -> Result<PathBuf, CliError> {
    let path = out.join("falsification.json");
    report::write_json(&path, provenance, instance)?;
    Ok(path)
}

/// Rebuilds the density spec with a grid alpha in place of the configured
/// one; the family and shape parameters stay as configured.
fn spec_with_alpha(spec: &DensitySpec, alpha: f64) -> DensitySpec {
    match spec.clone() {
        DensitySpec::Uniform { support, .. } => DensitySpec::Uniform { alpha, support },
        DensitySpec::TruncatedGaussian {
            support,
            mean,
            std_dev,
            ..
        } => DensitySpec::TruncatedGaussian {
            alpha,
            support,
            mean,
            std_dev,
        },
        DensitySpec::QuantizedPosterior {
            support, true_g, ..
        } => DensitySpec::QuantizedPosterior {
            alpha,
            support,
            true_g,
            feedback_bits: None,
        },
        other @ DensitySpec::Atomic { .. } => other,
    }
}

fn family_name(spec: &DensitySpec) -> &'static str {
    match spec {
        DensitySpec::Uniform { .. } => "uniform",
        DensitySpec::TruncatedGaussian { .. } => "truncated-gaussian",
        DensitySpec::QuantizedPosterior { .. } => "quantized-posterior",
        DensitySpec::Atomic { .. } => "atomic",
    }
}

fn codebook_source(config: &ExperimentConfig) -> CodebookSource {
    config
        .codebook
        .clone()
        .unwrap_or(CodebookSource::Generator(GeneratorSpec::Ramp { count: 12 }))
}

pub fn canonical_reduce(config: &ExperimentConfig, out: &Path) -> Result<RunStatus, CliError> {
    let spec = config
        .general_channel
        .as_ref()
        .ok_or_else(|| CliError::Usage("canonical-reduce needs the `general_channel` section".into()))?;
    let general = spec.build()?;
    let (canonical, transform) = reduce_to_canonical(&general)?;

    // Round-trip residual over seeded random inputs.
    let mut rng = stream_rng(config.seed, 0);
    let mut max_residual = 0.0f64;
    let scale = (spec.p_tilde / 2.0).sqrt();
    for t in 1..=canonical.block_len() {
        for _ in 0..64 {
            use rand::Rng;
            let x_tilde = (rng.gen_range(-scale..=scale), rng.gen_range(-scale..=scale));
            let back = transform.inverse(t, transform.forward(t, x_tilde));
            max_residual = max_residual
                .max((back.0 - x_tilde.0).abs())
                .max((back.1 - x_tilde.1).abs());
        }
    }

    #[derive(Serialize)]
    struct Reduction {
        users: usize,
        bound_m: f64,
        power: f64,
        g21: Vec<f64>,
        round_trip_residual: f64,
    }
    let body = Reduction {
        users: canonical.users(),
        bound_m: canonical.bound_m(),
        power: canonical.power(),
        g21: canonical.g21_block(),
        round_trip_residual: max_residual,
    };
    report::write_json(&out.join("canonical_reduce.json"), &config.provenance(), &body)?;
    println!(
        "canonical form over {} slot(s); P = {}, max round-trip residual {:.2e}",
        canonical.block_len(),
        canonical.power(),
        max_residual
    );
    Ok(RunStatus::Ok)
}

pub fn enumerate_sets(config: &ExperimentConfig, out: &Path) -> Result<RunStatus, CliError> {
    let power = config.grid.p.first().copied().unwrap_or(1e2);
    let n = config.grid.n.first().copied().unwrap_or(1);
    let mut rng = stream_rng(config.seed, 0);
    let density = config.density.build(power, &mut rng)?;
    let cb = codebook_source(config).load(n, power, &mut rng)?;
    let prov = config.provenance();

    // Deterministic-channel outputs of the first sampled realization.
    let channel = CanonicalChannel::sample(
        2,
        n,
        std::slice::from_ref(&density),
        config.correlation.rho,
        config.m,
        power,
        &mut rng,
    )?;
    let mut det_csv = CsvSink::create(
        &out.join("deterministic_outputs.csv"),
        &prov,
        &["msg", "t", "k", "value"],
    )?;
    for msg in 0..cb.num_messages() {
        let o = deterministic_output(&cb, msg, &channel)
            .map_err(|e| CliError::Run(e.to_string()))?;
        for k in 1..=cb.users() {
            for t in 1..=cb.block_len() {
                det_csv.row([
                    msg.to_string(),
                    t.to_string(),
                    k.to_string(),
                    o.user(k)[t - 1].to_string(),
                ])?;
            }
        }
    }
    det_csv.finish()?;

    // Partitions across sampled realizations.
    let samples = config.budgets.mc_samples.min(200);
    let mut sets_csv = CsvSink::create(
        &out.join("aligned_sets.csv"),
        &prov,
        &["sample", "set", "size", "image"],
    )?;
    for s in 0..samples {
        let mut srng = stream_rng(config.seed, 1 + s as u64);
        let ch = CanonicalChannel::sample(
            2,
            n,
            std::slice::from_ref(&density),
            config.correlation.rho,
            config.m,
            power,
            &mut srng,
        )?;
        let sets = partition_into_aligned_sets(&cb, &ch)?;
        for (i, set) in sets.iter().enumerate() {
            sets_csv.row([
                s.to_string(),
                i.to_string(),
                set.members.len().to_string(),
                set.image
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(";"),
            ])?;
        }
    }
    sets_csv.finish()?;

    let mut rng2 = stream_rng(config.seed, 1_000_000);
    let report = expected_set_size(
        &cb,
        &density,
        config.budgets.mc_samples,
        config.budgets.partition_budget,
        &mut rng2,
    )?;
    report::write_json(&out.join("alignment_report.json"), &prov, &report)?;
    println!(
        "{} codewords, empirical E|S| = {:.4}, analytic bound = {:.4}",
        report.num_codewords, report.empirical_mean_size, report.analytic_bound
    );
    if report.violation {
        let dump = dump_falsification(out, &prov, &report)?;
        return Ok(RunStatus::Falsified { dump });
    }
    Ok(RunStatus::Ok)
}

#[derive(Serialize)]
struct BoundCell {
    power: f64,
    n: usize,
    alpha: f64,
    family: String,
    empirical: f64,
    analytic: f64,
    max_pair_excess: f64,
    violated: bool,
}

pub fn bound_check(config: &ExperimentConfig, out: &Path) -> Result<RunStatus, CliError> {
    let prov = config.provenance();
    let mut cells = Vec::new();
    for &power in &config.grid.p {
        for &n in &config.grid.n {
            for &alpha in &config.grid.alpha {
                cells.push((power, n, alpha));
            }
        }
    }
    let source = codebook_source(config);
    let results: Vec<Result<BoundCell, CliError>> = cells
        .par_iter()
        .enumerate()
        .map(|(idx, &(power, n, alpha))| {
            let mut rng = stream_rng(config.seed, idx as u64);
            let spec = spec_with_alpha(&config.density, alpha);
            let d = spec.build(power, &mut rng)?;
            let cb = source.load(n, power, &mut rng)?;
            let rows = cb.distinct_x1_rows();
            let mapping = cb.mapping_table();
            let mut max_pair_excess = 0.0f64;
            for i in 0..rows.len() {
                for j in (i + 1)..rows.len() {
                    let b =
                        pairwise_alignment_probability_bound(rows[i], rows[j], &mapping, &d)?;
                    let exact =
                        pairwise_alignment_probability_exact(rows[i], rows[j], &mapping, &d)?;
                    max_pair_excess = max_pair_excess.max(exact - b.bound);
                }
            }
            let report = expected_set_size(
                &cb,
                &d,
                config.budgets.mc_samples,
                config.budgets.partition_budget,
                &mut rng,
            )?;
            Ok(BoundCell {
                power,
                n,
                alpha,
                family: family_name(&spec).to_string(),
                empirical: report.empirical_mean_size,
                analytic: report.analytic_bound,
                max_pair_excess,
                violated: report.violation || max_pair_excess > 1e-12,
            })
        })
        .collect();

    let mut csv = CsvSink::create(
        &out.join("bound_check.csv"),
        &prov,
        &["P", "n", "alpha", "family", "empirical_E_S", "analytic_bound"],
    )?;
    let mut falsified: Option<BoundCell> = None;
    for r in results {
        let cell = r?;
        csv.row([
            cell.power.to_string(),
            cell.n.to_string(),
            cell.alpha.to_string(),
            cell.family.clone(),
            cell.empirical.to_string(),
            cell.analytic.to_string(),
        ])?;
        if cell.violated && falsified.is_none() {
            falsified = Some(cell);
        }
    }
    csv.finish()?;
    if let Some(cell) = falsified {
        let dump = dump_falsification(out, &prov, &cell)?;
        return Ok(RunStatus::Falsified { dump });
    }
    println!("bound check clean over {} grid cells", cells.len());
    Ok(RunStatus::Ok)
}

#[derive(Serialize)]
struct EntropyCell {
    power: f64,
    n: usize,
    alpha: f64,
    ledger: EntropyLedger,
    chain_gap: f64,
    jensen_ok: bool,
}

pub fn entropy_grid(config: &ExperimentConfig, out: &Path) -> Result<RunStatus, CliError> {
    let prov = config.provenance();
    let mut cells = Vec::new();
    for &power in &config.grid.p {
        for &n in &config.grid.n {
            for &alpha in &config.grid.alpha {
                cells.push((power, n, alpha));
            }
        }
    }
    let source = codebook_source(config);
    let results: Vec<Result<EntropyCell, CliError>> = cells
        .par_iter()
        .enumerate()
        .map(|(idx, &(power, n, alpha))| {
            let mut rng = stream_rng(config.seed, idx as u64);
            let spec = spec_with_alpha(&config.density, alpha);
            let d = spec.build(power, &mut rng)?;
            let cb = source.load(n, power, &mut rng)?;
            let m = cb.distinct_x1_rows().len();
            let pmf = vec![1.0 / m as f64; m];
            let ledger = difference_of_entropies(
                &cb,
                &pmf,
                &d,
                &config.budgets.entropy_budget(),
                &mut rng,
            )?;
            let chain_gap =
                (ledger.h1_given_g - (ledger.h2_given_g + ledger.h1_given_y2_g)).abs();
            let jensen_ok = ledger.h1_given_y2_g <= ledger.expected_log_set_size + 1e-9
                && ledger.expected_log_set_size <= ledger.log_expected_set_size + 1e-9;
            Ok(EntropyCell {
                power,
                n,
                alpha,
                ledger,
                chain_gap,
                jensen_ok,
            })
        })
        .collect();

    let mut csv = CsvSink::create(
        &out.join("entropy_grid.csv"),
        &prov,
        &[
            "P",
            "n",
            "alpha",
            "H1",
            "H2",
            "diff",
            "normalized_diff",
            "theorem_value",
        ],
    )?;
    let mut points = Vec::new();
    let mut falsified: Option<EntropyCell> = None;
    for r in results {
        let cell = r?;
        let theorem_value = 1.0 + cell.alpha;
        csv.row([
            cell.power.to_string(),
            cell.n.to_string(),
            cell.alpha.to_string(),
            cell.ledger.h1_given_g.to_string(),
            cell.ledger.h2_given_g.to_string(),
            (cell.ledger.h1_given_g - cell.ledger.h2_given_g).to_string(),
            cell.ledger.normalized_difference.to_string(),
            theorem_value.to_string(),
        ])?;
        report::write_json(
            &out.join(format!(
                "ledgers/ledger_P{}_n{}_a{}.json",
                cell.power, cell.n, cell.alpha
            )),
            &prov,
            &cell.ledger,
        )?;
        let exact = cell.ledger.method == LedgerMethod::Exact;
        if exact && (cell.chain_gap > 1e-9 || !cell.jensen_ok) && falsified.is_none() {
            falsified = Some(cell);
            continue;
        }
        points.push(LedgerPoint {
            power: cell.power,
            n: cell.n,
            alpha: cell.alpha,
            ledger: cell.ledger,
        });
    }
    csv.finish()?;
    if let Some(cell) = falsified {
        let dump = dump_falsification(out, &prov, &cell)?;
        return Ok(RunStatus::Falsified { dump });
    }
    match assemble_sum_dof_bound(&points, &[config.grid.alpha[0]], config.tolerance) {
        Ok(summary) => {
            report::write_json(&out.join("sum_dof_summary.json"), &prov, &summary)?;
            println!(
                "entropy grid over {} cells; fitted limit {:.4}, theorem value {:.4}",
                points.len(),
                summary.fitted_limit,
                summary.theorem_value
            );
        }
        Err(EntropyError::TooFewPowers(_)) => {
            println!(
                "entropy grid over {} cells; too few powers for a limit fit",
                points.len()
            );
        }
        Err(e) => return Err(e.into()),
    }
    Ok(RunStatus::Ok)
}

#[derive(Serialize)]
struct SchemeSummary {
    scheme: String,
    alpha: Option<f64>,
    sum_slope: f64,
    sum_slope_stderr: f64,
    per_user_slopes: Vec<f64>,
    residual_exponent: Option<f64>,
}

pub fn scheme_zf(config: &ExperimentConfig, out: &Path) -> Result<RunStatus, CliError> {
    let prov = config.provenance();
    let mut csv = CsvSink::create(
        &out.join("scheme_zf.csv"),
        &prov,
        &["scheme", "alpha", "P", "B", "R1", "R2", "sum", "residual_power"],
    )?;
    let mut summaries = Vec::new();
    for (ai, &alpha) in config.grid.alpha.iter().enumerate() {
        let points: Vec<Result<RatePoint, CliError>> = config
            .grid
            .p
            .par_iter()
            .enumerate()
            .map(|(pi, &power)| {
                let mut rng = stream_rng(config.seed, (ai * 1000 + pi) as u64);
                let d = config.density.build(power, &mut rng)?;
                Ok(zf_quantized_feedback(
                    power,
                    alpha,
                    &d,
                    config.budgets.trials,
                    &mut rng,
                )?)
            })
            .collect();
        let mut sum_points = Vec::new();
        let mut r1_points = Vec::new();
        let mut r2_points = Vec::new();
        let mut resid_points = Vec::new();
        for p in points {
            let p = p?;
            csv.row([
                "zf".to_string(),
                alpha.to_string(),
                p.power.to_string(),
                p.feedback_bits.to_string(),
                p.rates[0].to_string(),
                p.rates[1].to_string(),
                p.sum_rate().to_string(),
                p.residual_power.to_string(),
            ])?;
            sum_points.push((p.power, p.sum_rate()));
            r1_points.push((p.power, p.rates[0]));
            r2_points.push((p.power, p.rates[1]));
            resid_points.push((p.power, p.residual_power));
        }
        let sum = slope_fit(&sum_points)?;
        summaries.push(SchemeSummary {
            scheme: "zf".into(),
            alpha: Some(alpha),
            sum_slope: sum.slope,
            sum_slope_stderr: sum.stderr,
            per_user_slopes: vec![
                slope_fit(&r1_points)?.slope,
                slope_fit(&r2_points)?.slope,
            ],
            residual_exponent: Some(residual_exponent_fit(&resid_points)?.slope),
        });
    }
    csv.finish()?;
    report::write_json(&out.join("scheme_zf_summary.json"), &prov, &summaries)?;
    for s in &summaries {
        println!(
            "zf alpha={}: sum slope {:.3}, residual exponent {:.3}",
            s.alpha.unwrap(),
            s.sum_slope,
            s.residual_exponent.unwrap()
        );
    }
    Ok(RunStatus::Ok)
}

pub fn scheme_bia(config: &ExperimentConfig, out: &Path) -> Result<RunStatus, CliError> {
    let prov = config.provenance();
    let mut csv = CsvSink::create(
        &out.join("scheme_bia.csv"),
        &prov,
        &["scheme", "alpha", "P", "B", "R1", "R2", "sum", "residual_power"],
    )?;
    let points: Vec<Result<RatePoint, CliError>> = config
        .grid
        .p
        .par_iter()
        .enumerate()
        .map(|(pi, &power)| {
            let mut rng = stream_rng(config.seed, pi as u64);
            Ok(blind_ia_pn(power, config.budgets.trials, &mut rng)?)
        })
        .collect();
    let mut sum_points = Vec::new();
    let mut r1_points = Vec::new();
    let mut r2_points = Vec::new();
    for p in points {
        let p = p?;
        csv.row([
            "bia".to_string(),
            String::new(),
            p.power.to_string(),
            "0".to_string(),
            p.rates[0].to_string(),
            p.rates[1].to_string(),
            p.sum_rate().to_string(),
            "0".to_string(),
        ])?;
        sum_points.push((p.power, p.sum_rate()));
        r1_points.push((p.power, p.rates[0]));
        r2_points.push((p.power, p.rates[1]));
    }
    csv.finish()?;
    let sum = slope_fit(&sum_points)?;
    let summary = SchemeSummary {
        scheme: "bia".into(),
        alpha: None,
        sum_slope: sum.slope,
        sum_slope_stderr: sum.stderr,
        per_user_slopes: vec![slope_fit(&r1_points)?.slope, slope_fit(&r2_points)?.slope],
        residual_exponent: None,
    };
    report::write_json(&out.join("scheme_bia_summary.json"), &prov, &summary)?;
    println!(
        "bia: sum slope {:.3} (d1 {:.3}, d2 {:.3})",
        summary.sum_slope, summary.per_user_slopes[0], summary.per_user_slopes[1]
    );
    Ok(RunStatus::Ok)
}

pub fn toy(config: &ExperimentConfig, out: &Path) -> Result<RunStatus, CliError> {
    let spec = config
        .toy
        .as_ref()
        .ok_or_else(|| CliError::Usage("toy needs the `toy` config section".into()))?;
    let prov = config.provenance();
    let report = toy_distinct_images(&spec.codebook, &spec.channels);
    for (g, count) in &report.per_channel_counts {
        println!("G={g}: {count} image(s)");
    }
    println!(
        "max {} / min {} distinct images; sqrt(|codebook|) = {:.3}",
        report.max_count, report.min_count, report.sqrt_codebook
    );
    report::write_json(&out.join("toy_report.json"), &prov, &report)?;
    if !report.cross_channel_separated {
        let dump = dump_falsification(out, &prov, &report)?;
        return Ok(RunStatus::Falsified { dump });
    }
    if let Some([lo, hi]) = spec.x2_range {
        let x1: Vec<i64> = spec.codebook.iter().map(|&(x1, _)| x1).collect();
        let search = toy_pigeonhole_search(&x1, (lo, hi), &spec.channels);
        report::write_json(&out.join("toy_search.json"), &prov, &search)?;
        match &search.counterexample {
            Some(_) => {
                println!(
                    "search: found a mapping below the sqrt target after {} nodes",
                    search.nodes_explored
                );
                let dump = dump_falsification(out, &prov, &search)?;
                return Ok(RunStatus::Falsified { dump });
            }
            None => println!(
                "search: all mappings reach >= {} images on some channel ({} nodes)",
                search.target, search.nodes_explored
            ),
        }
    }
    Ok(RunStatus::Ok)
}
