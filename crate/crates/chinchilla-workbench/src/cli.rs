//! Command-line surface.
//!
//! Five subcommands: `params-compare`, `fit`, `ratio`, `sweep`, `report`.
//! Outputs land under `--out` with stable filenames; every command is
//! deterministic given its flags, and `report` rebuilds plots and summaries
//! from the cached CSVs without refitting.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical failure.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::arch_params::{compare_table, param_count, ArchSpec, ParamInterpretation};
use crate::error::{Error, Result};
use crate::fit_engine::{bootstrap, fit, BootstrapOptions, FitConfig, FitResult, RunDataset};
use crate::io_ingest::svg::{write_svg_plot, PlotSeries, PlotStyle};
use crate::io_ingest::{
    bootstrap_records, embedded_arch_table, load_arch_table, load_runs, read_results_csv,
    remap_params, sweep_records, write_results_csv, BootstrapRecord, FitRecord,
    ParamsCompareRecord, RatioCurveRecord, SweepRecord,
};
use crate::perturb::{default_sweep, Perturbation, SweepGrid, SweepKind};
use crate::scaling_model::{
    log_spaced, ratio_curve, ratio_slope_per_decade, ComputeModel, ScalingLawParams,
};
use crate::sensitivity::run_sweep;

#[derive(Debug, Parser)]
#[command(
    name = "chinchilla-workbench",
    version,
    about = "Parameter accounting, scaling-law fitting, and perturbation sweeps for training-run data"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InterpretationArg {
    Reported,
    Standard,
    Bestfit,
}

impl From<InterpretationArg> for ParamInterpretation {
    fn from(arg: InterpretationArg) -> Self {
        match arg {
            InterpretationArg::Reported => ParamInterpretation::Reported,
            InterpretationArg::Standard => ParamInterpretation::StandardFormula,
            InterpretationArg::Bestfit => ParamInterpretation::BestFitFormula,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Multiplicative,
    Additive,
    Systematic,
    Lognormal,
}

impl From<KindArg> for SweepKind {
    fn from(arg: KindArg) -> Self {
        match arg {
            KindArg::Multiplicative => SweepKind::Multiplicative,
            KindArg::Additive => SweepKind::Additive,
            KindArg::Systematic => SweepKind::SystematicBias,
            KindArg::Lognormal => SweepKind::LogNormalNoise,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compare the standard and best-fit counting formulas against a table's
    /// reported sizes.
    ParamsCompare {
        /// Architecture table: a CSV path, or `embedded` for the built-in 50 rows.
        #[arg(long, default_value = "embedded")]
        arch: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the scaling law to a run table and bootstrap its uncertainty.
    Fit {
        /// Run table CSV (`reported_params,training_tokens,loss[,run_id]`).
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, default_value = "embedded")]
        arch: String,
        /// Which notion of model size enters the fit.
        #[arg(long, value_enum, default_value_t = InterpretationArg::Reported)]
        interpretation: InterpretationArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Bootstrap resamples; 0 skips the bootstrap.
        #[arg(long, default_value_t = 4000)]
        bootstrap: usize,
        /// Confidence level for percentile intervals.
        #[arg(long, default_value_t = 0.80)]
        ci: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit, then derive the compute-optimal tokens-per-parameter curve.
    Ratio {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, default_value = "embedded")]
        arch: String,
        #[arg(long, value_enum, default_value_t = InterpretationArg::Reported)]
        interpretation: InterpretationArg,
        #[arg(long, default_value_t = 1e18)]
        compute_min: f64,
        #[arg(long, default_value_t = 1e26)]
        compute_max: f64,
        #[arg(long, default_value_t = 50)]
        compute_points: usize,
        /// FLOPs per parameter per token in the budget model.
        #[arg(long, default_value_t = 6.0)]
        flops_per_param_token: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Perturb model sizes over a grid, refit at every point, and record the
    /// fitted parameters and ratio curves.
    Sweep {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, default_value = "embedded")]
        arch: String,
        #[arg(long, value_enum, default_value_t = InterpretationArg::Reported)]
        interpretation: InterpretationArg,
        /// Perturbation family.
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Custom comma-separated grid values (factors, offsets, slopes, or sigmas).
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Bootstrap resamples per sweep point; 0 skips bootstraps.
        #[arg(long, default_value_t = 4000)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0.80)]
        ci: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate plots and summaries from the CSVs in an output directory,
    /// without refitting.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses process arguments and runs; returns the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Same as [`run`] with explicit arguments (testing hook).
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are successes; bad flags are input errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            if code == 3 {
                eprintln!("numerical failure: {e}");
            } else {
                eprintln!("error: {e}");
            }
            code
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite { .. }
        | Error::AllStartsFailed { .. }
        | Error::DegenerateExponents
        | Error::DegenerateComputeGrid => 3,
        _ => 2,
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::ParamsCompare { arch, out } => cmd_params_compare(&arch, &out),
        Command::Fit { runs, arch, interpretation, seed, bootstrap, ci, out } => {
            cmd_fit(&runs, &arch, interpretation.into(), seed, bootstrap, ci, &out)
        }
        Command::Ratio {
            runs,
            arch,
            interpretation,
            compute_min,
            compute_max,
            compute_points,
            flops_per_param_token,
            out,
        } => cmd_ratio(
            &runs,
            &arch,
            interpretation.into(),
            compute_min,
            compute_max,
            compute_points,
            flops_per_param_token,
            &out,
        ),
        Command::Sweep { runs, arch, interpretation, kind, grid, seed, bootstrap, ci, out } => {
            cmd_sweep(&runs, &arch, interpretation.into(), kind.into(), grid.as_deref(), seed, bootstrap, ci, &out)
        }
        Command::Report { out } => cmd_report(&out),
    }
}

fn load_arch_arg(arch: &str) -> Result<Vec<ArchSpec>> {
    if arch == "embedded" {
        Ok(embedded_arch_table().to_vec())
    } else {
        load_arch_table(Path::new(arch))
    }
}

fn prepare_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

/// Loads runs and rewrites their sizes under the chosen interpretation.
fn load_interpreted_runs(
    runs: &Path,
    arch: &str,
    interpretation: ParamInterpretation,
) -> Result<RunDataset> {
    let dataset = load_runs(runs)?;
    if interpretation == ParamInterpretation::Reported {
        return Ok(dataset);
    }
    let table = load_arch_arg(arch)?;
    remap_params(&dataset, interpretation, &table)
}

fn compare_summary_line(label: &str, rows: usize, mismatches: usize, mean: f64, max: f64, min: f64) -> String {
    format!(
        "{label}: {}/{rows} rows match ({mismatches}/{rows} mismatch), \
         mean |rel err| {mean:.3}%, max {max:.3}%, min {min:.3}%",
        rows - mismatches
    )
}

fn cmd_params_compare(arch: &str, out: &Path) -> Result<()> {
    let table = load_arch_arg(arch)?;
    prepare_out_dir(out)?;
    let mut records = Vec::new();
    for interpretation in
        [ParamInterpretation::StandardFormula, ParamInterpretation::BestFitFormula]
    {
        let report = compare_table(&table, interpretation)?;
        for (i, (spec, err)) in table.iter().zip(&report.relative_errors).enumerate() {
            records.push(ParamsCompareRecord {
                interpretation: interpretation.label().to_string(),
                row: i + 1,
                d_model: spec.d_model,
                ffw_size: spec.ffw_size,
                kv_size: spec.kv_size,
                n_heads: spec.n_heads,
                n_layers: spec.n_layers,
                n_vocab: spec.n_vocab,
                reported_params: spec.reported_params,
                computed_params: param_count(spec, interpretation)?,
                relative_error_pct: *err,
                mismatch: err.abs() > crate::arch_params::MISMATCH_THRESHOLD_PCT,
            });
        }
        let label = match interpretation {
            ParamInterpretation::StandardFormula => "standard formula",
            ParamInterpretation::BestFitFormula => "best-fit formula",
            ParamInterpretation::Reported => unreachable!(),
        };
        println!(
            "{}",
            compare_summary_line(
                label,
                report.row_count(),
                report.mismatch_count,
                report.mean_rel_error,
                report.max_rel_error,
                report.min_rel_error
            )
        );
    }
    write_results_csv(&records, &out.join("params_compare.csv"))?;
    Ok(())
}

fn print_fit(label: &str, result: &FitResult) {
    let p = &result.params;
    println!(
        "{label}: E = {:.4}, A = {:.3}, alpha = {:.4}, B = {:.3}, beta = {:.4} \
         (objective {:.3e}, converged {})",
        p.irreducible_loss,
        p.param_prefactor,
        p.param_exponent,
        p.data_prefactor,
        p.data_exponent,
        result.objective,
        result.converged
    );
}

fn cmd_fit(
    runs: &Path,
    arch: &str,
    interpretation: ParamInterpretation,
    seed: u64,
    n_resamples: usize,
    ci: f64,
    out: &Path,
) -> Result<()> {
    let dataset = load_interpreted_runs(runs, arch, interpretation)?;
    prepare_out_dir(out)?;
    let config = FitConfig::default();
    let result = fit(&dataset, &config)?;
    print_fit(interpretation.label(), &result);
    write_results_csv(&[FitRecord::new(interpretation.label(), &result)], &out.join("fit.csv"))?;

    if n_resamples > 0 {
        let opts = BootstrapOptions { n_resamples, seed, confidence_level: ci };
        let warm = config.refit_near(&result.log_params);
        let bs = bootstrap(&dataset, &warm, &opts)?;
        for record in bootstrap_records(&result, &bs) {
            println!(
                "  {}: {} +- {} [{}, {}]",
                record.parameter, record.estimate, record.standard_error, record.ci_lower, record.ci_upper
            );
        }
        if bs.flagged {
            println!("  note: bootstrap flagged ({} of {} resamples dropped)", bs.n_dropped, bs.n_resamples);
        }
        write_results_csv(&bootstrap_records(&result, &bs), &out.join("bootstrap.csv"))?;
    }
    Ok(())
}

fn ratio_svg_from_records(records: &[RatioCurveRecord], path: &Path) -> Result<()> {
    let points: Vec<(f64, f64)> = records.iter().map(|r| (r.compute_flops, r.tokens_per_param)).collect();
    let series = vec![PlotSeries::new("compute-optimal ratio", points)];
    let style = PlotStyle {
        title: "Compute-optimal tokens per parameter".into(),
        x_label: "compute [FLOPs]".into(),
        y_label: "tokens per parameter".into(),
        log_x: true,
        log_y: true,
        ..Default::default()
    };
    write_svg_plot(&series, &style, path)
}

/// OLS slope of ratio records against log10 compute.
fn slope_from_records(records: &[RatioCurveRecord]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.compute_flops > 0.0 && r.tokens_per_param.is_finite())
        .map(|r| (r.compute_flops.log10(), r.tokens_per_param))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[allow(clippy::too_many_arguments)]
fn cmd_ratio(
    runs: &Path,
    arch: &str,
    interpretation: ParamInterpretation,
    compute_min: f64,
    compute_max: f64,
    compute_points: usize,
    flops_per_param_token: f64,
    out: &Path,
) -> Result<()> {
    if !(compute_min > 0.0) || !(compute_max > compute_min) || compute_points < 2 {
        return Err(Error::InvalidFitConfig {
            reason: "need 0 < compute-min < compute-max and at least 2 compute points".into(),
        });
    }
    let dataset = load_interpreted_runs(runs, arch, interpretation)?;
    prepare_out_dir(out)?;
    let result = fit(&dataset, &FitConfig::default())?;
    print_fit(interpretation.label(), &result);

    let cm = ComputeModel { flops_per_param_token };
    let grid = log_spaced(compute_min, compute_max, compute_points);
    let curve = ratio_curve(&result.params, &cm, &grid)?;
    let slope = ratio_slope_per_decade(&result.params, &cm, &grid)?;
    println!("slope per decade: {slope:.4}");

    let records: Vec<RatioCurveRecord> = curve
        .iter()
        .map(|&(c, r)| RatioCurveRecord { compute_flops: c, tokens_per_param: r })
        .collect();
    write_results_csv(&records, &out.join("ratio.csv"))?;
    ratio_svg_from_records(&records, &out.join("ratio.svg"))?;
    Ok(())
}

fn parse_custom_grid(kind: SweepKind, grid: &str, seed: u64) -> Result<SweepGrid> {
    let mut points = Vec::new();
    for (i, raw) in grid.split(',').enumerate() {
        let value: f64 = raw.trim().parse().map_err(|_| Error::InvalidPerturbation {
            reason: format!("grid entry {} is not numeric: {raw:?}", i + 1),
        })?;
        points.push(match kind {
            SweepKind::Multiplicative => Perturbation::Multiplicative { factor: value },
            SweepKind::Additive => Perturbation::Additive { offset: value },
            SweepKind::SystematicBias => Perturbation::SystematicBias { slope: value },
            SweepKind::LogNormalNoise => Perturbation::LogNormalNoise { sigma: value, seed },
        });
    }
    SweepGrid::new(points)
}

/// Rebuilds the two sweep panels from record rows. Curve points come from the
/// closed form on the recorded fitted parameters, so `report` reproduces the
/// sweep's own plots byte for byte.
fn sweep_svgs_from_records(records: &[SweepRecord], kind_label: &str, out: &Path) -> Result<()> {
    let log_x = records.iter().all(|r| r.value > 0.0);

    let accessors: [(&str, fn(&SweepRecord) -> f64); 5] = [
        ("E (irreducible loss)", |r| r.irreducible_loss),
        ("A (param prefactor)", |r| r.param_prefactor),
        ("alpha (param exponent)", |r| r.param_exponent),
        ("B (data prefactor)", |r| r.data_prefactor),
        ("beta (data exponent)", |r| r.data_exponent),
    ];
    let param_series: Vec<PlotSeries> = accessors
        .iter()
        .map(|(label, get)| {
            PlotSeries::new(*label, records.iter().map(|r| (r.value, get(r))).collect())
        })
        .collect();
    let params_style = PlotStyle {
        title: format!("Fitted parameters vs {kind_label} perturbation"),
        x_label: format!("{kind_label} value"),
        y_label: "fitted value".into(),
        log_x,
        log_y: true,
        ..Default::default()
    };
    write_svg_plot(&param_series, &params_style, &out.join(format!("sweep_{kind_label}_params.svg")))?;

    let compute_grid = crate::scaling_model::default_compute_grid();
    let cm = ComputeModel::default();
    let ratio_series: Vec<PlotSeries> = records
        .iter()
        .map(|r| {
            let params = ScalingLawParams {
                irreducible_loss: r.irreducible_loss,
                param_prefactor: r.param_prefactor,
                param_exponent: r.param_exponent,
                data_prefactor: r.data_prefactor,
                data_exponent: r.data_exponent,
            };
            let points: Vec<(f64, f64)> = compute_grid
                .iter()
                .map(|&c| {
                    let ratio = crate::scaling_model::tokens_per_param(&params, c, &cm)
                        .unwrap_or(f64::NAN);
                    (c, ratio)
                })
                .collect();
            PlotSeries::new(format!("{kind_label} = {}", r.value), points)
        })
        .collect();
    let ratio_style = PlotStyle {
        title: format!("Tokens per parameter under {kind_label} perturbation"),
        x_label: "compute [FLOPs]".into(),
        y_label: "tokens per parameter".into(),
        log_x: true,
        log_y: true,
        ..Default::default()
    };
    write_svg_plot(&ratio_series, &ratio_style, &out.join(format!("sweep_{kind_label}_ratio.svg")))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    runs: &Path,
    arch: &str,
    interpretation: ParamInterpretation,
    kind: SweepKind,
    grid: Option<&str>,
    seed: u64,
    n_resamples: usize,
    ci: f64,
    out: &Path,
) -> Result<()> {
    let dataset = load_interpreted_runs(runs, arch, interpretation)?;
    prepare_out_dir(out)?;
    let grid = match grid {
        Some(spec) => parse_custom_grid(kind, spec, seed)?,
        None => default_sweep(kind).with_noise_seed(seed),
    };
    let bootstrap_opts = (n_resamples > 0)
        .then_some(BootstrapOptions { n_resamples, seed, confidence_level: ci });
    let config = FitConfig::default();
    let sweep = run_sweep(&dataset, &grid, &config, bootstrap_opts.as_ref())?;

    print_fit("baseline", &sweep.baseline);
    for point in &sweep.points {
        match &point.fit {
            Some(f) => println!(
                "  {} = {:>12.6}: alpha = {:.4}, A = {:.3}, E = {:.4}, slope/decade = {:.4}{}",
                kind.label(),
                point.value,
                f.params.param_exponent,
                f.params.param_prefactor,
                f.params.irreducible_loss,
                point.ratio_slope_per_decade,
                if point.nan_flag { " [NaN]" } else { "" }
            ),
            None => println!(
                "  {} = {:>12.6}: failed ({})",
                kind.label(),
                point.value,
                point.error.as_deref().unwrap_or("unknown")
            ),
        }
    }

    let records = sweep_records(&sweep);
    write_results_csv(&records, &out.join(format!("sweep_{}.csv", kind.label())))?;
    sweep_svgs_from_records(&records, kind.label(), out)?;
    Ok(())
}

fn cmd_report(out: &Path) -> Result<()> {
    if !out.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("output directory {} does not exist", out.display()),
        )));
    }
    let mut produced_any = false;

    let params_compare = out.join("params_compare.csv");
    if params_compare.is_file() {
        let records: Vec<ParamsCompareRecord> = read_results_csv(&params_compare)?;
        for label in ["standard", "bestfit"] {
            let rows: Vec<&ParamsCompareRecord> =
                records.iter().filter(|r| r.interpretation == label).collect();
            if rows.is_empty() {
                continue;
            }
            let mismatches = rows.iter().filter(|r| r.mismatch).count();
            let mags: Vec<f64> = rows.iter().map(|r| r.relative_error_pct.abs()).collect();
            let mean = mags.iter().sum::<f64>() / mags.len() as f64;
            let max = mags.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
            let pretty = if label == "standard" { "standard formula" } else { "best-fit formula" };
            println!("{}", compare_summary_line(pretty, rows.len(), mismatches, mean, max, min));
        }
        produced_any = true;
    }

    let fit_csv = out.join("fit.csv");
    if fit_csv.is_file() {
        let records: Vec<FitRecord> = read_results_csv(&fit_csv)?;
        for r in &records {
            println!(
                "{}: E = {:.4}, A = {:.3}, alpha = {:.4}, B = {:.3}, beta = {:.4}",
                r.interpretation, r.irreducible_loss, r.param_prefactor, r.param_exponent,
                r.data_prefactor, r.data_exponent
            );
        }
        produced_any = true;
    }

    let bootstrap_csv = out.join("bootstrap.csv");
    if bootstrap_csv.is_file() {
        let records: Vec<BootstrapRecord> = read_results_csv(&bootstrap_csv)?;
        for r in &records {
            println!(
                "  {}: {} +- {} [{}, {}]",
                r.parameter, r.estimate, r.standard_error, r.ci_lower, r.ci_upper
            );
        }
        produced_any = true;
    }

    let ratio_csv = out.join("ratio.csv");
    if ratio_csv.is_file() {
        let records: Vec<RatioCurveRecord> = read_results_csv(&ratio_csv)?;
        ratio_svg_from_records(&records, &out.join("ratio.svg"))?;
        if let Some(slope) = slope_from_records(&records) {
            println!("slope per decade: {slope:.4}");
        }
        produced_any = true;
    }

    for kind in [
        SweepKind::Multiplicative,
        SweepKind::Additive,
        SweepKind::SystematicBias,
        SweepKind::LogNormalNoise,
    ] {
        let sweep_csv = out.join(format!("sweep_{}.csv", kind.label()));
        if sweep_csv.is_file() {
            let records: Vec<SweepRecord> = read_results_csv(&sweep_csv)?;
            if records.is_empty() {
                continue;
            }
            sweep_svgs_from_records(&records, kind.label(), out)?;
            let flagged = records.iter().filter(|r| r.nan_flag).count();
            println!(
                "sweep {}: {} points, {} flagged non-finite",
                kind.label(),
                records.len(),
                flagged
            );
            produced_any = true;
        }
    }

    if !produced_any {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no result CSVs found under {}", out.display()),
        )));
    }
    Ok(())
}
