//! Acceptance suite: one test per shipping criterion, named by number.
//! Every tolerance is pinned here as a named constant.
//!
//! Criterion 10 exercises externally supplied loss data and is skipped (with
//! a printed notice) when no such file is present; see the README's data
//! section for the expected schema and provenance.

mod common;

use std::path::PathBuf;
use std::process::Command;

use chinchilla_workbench::arch_params::{
    bestfit_param_count, compare_table, standard_param_count, ParamInterpretation,
};
use chinchilla_workbench::fit_engine::{
    bootstrap, fit, BootstrapOptions, FitConfig, RunDataset, TrainingRun,
};
use chinchilla_workbench::io_ingest::{embedded_arch_table, load_runs, remap_params};
use chinchilla_workbench::perturb::{default_sweep, Perturbation, SweepGrid, SweepKind};
use chinchilla_workbench::scaling_model::{
    default_compute_grid, eval_loss, log_spaced, ratio_slope_per_decade, tokens_per_param,
    ComputeModel, ScalingLawParams,
};
use chinchilla_workbench::sensitivity::{
    fit_power_law_trend, multiplicative_ratio_shift, run_sweep, systematic_ratio_exponent,
};

use common::{brute_force_tokens_per_param, fixture_path, fixture_truth, load_fixture};

#[test]
fn fixture_matches_its_generator() {
    // The shipped fixture must lie exactly on the law it claims to come from.
    let truth = fixture_truth();
    for run in load_fixture().runs() {
        let predicted = eval_loss(&truth, run.n_params, run.d_tokens).unwrap();
        assert!(
            (predicted - run.loss).abs() < 1e-12,
            "fixture row ({}, {}) drifted: {} vs {}",
            run.n_params,
            run.d_tokens,
            run.loss,
            predicted
        );
    }
}

// Criterion 1: table-wide error statistics.
const MEAN_REL_ERR_STANDARD: f64 = 7.388;
const MEAN_REL_ERR_TOL: f64 = 0.01;
const MAX_REL_ERR_STANDARD: f64 = 15.2;
const MIN_REL_ERR_STANDARD: f64 = 3.6;
const EXTREMA_TOL: f64 = 0.1;
const MAX_REL_ERR_BESTFIT: f64 = 8.7;
// Criterion 3: ratio closed form vs brute force.
const RATIO_TWENTY_TO_ONE: f64 = 19.9;
const RATIO_TOL: f64 = 0.1;
const BRUTE_FORCE_REL_TOL: f64 = 0.005;
// Criterion 4: recovery of generator parameters.
const RECOVERY_REL_TOL: f64 = 0.01;
// Criterion 5: multiplicative sweep fidelity.
const MULT_ALPHA_REL_TOL: f64 = 0.02;
const MULT_PREFACTOR_REL_TOL: f64 = 0.10;
const MULT_RATIO_SHIFT_REL_TOL: f64 = 0.15;
// Criterion 6: systematic-bias sweep.
const SYSTEMATIC_EXPONENT: f64 = -1.0;
const SYSTEMATIC_EXPONENT_TOL: f64 = 0.05;
const SYSTEMATIC_R_SQUARED_MIN: f64 = 0.99;
const SYSTEMATIC_RATIO_EXPONENT_ABS_TOL: f64 = 0.05;
// Criterion 9: noise widening.
const NOISE_RESAMPLES: usize = 200;
const NOISE_SE_WIDENING_MIN: f64 = 3.0;
// Criterion 10: externally supplied data.
const DATA_RATIO_LO: f64 = 15.0;
const DATA_RATIO_HI: f64 = 30.0;
const DATA_SLOPES: [(ParamInterpretation, f64); 3] = [
    (ParamInterpretation::StandardFormula, -0.572),
    (ParamInterpretation::BestFitFormula, -1.049),
    (ParamInterpretation::Reported, -1.248),
];
const DATA_SLOPE_ABS_TOL: f64 = 0.4;
const DATA_E_FIRST: (f64, f64) = (1.45, 1.70);
const DATA_E_LAST: (f64, f64) = (1.75, 2.05);
const DATA_ALPHA_FIRST: f64 = 0.199;
const DATA_ALPHA_LAST: f64 = 0.481;
const DATA_ALPHA_ABS_TOL: f64 = 0.06;
const DATA_RESAMPLES: usize = 4000;

fn rel_err(actual: f64, expected: f64) -> f64 {
    (actual - expected).abs() / expected.abs()
}

#[test]
fn acceptance_01_parameter_count_reproduction() {
    let table = embedded_arch_table();
    let standard = compare_table(table, ParamInterpretation::StandardFormula).unwrap();
    assert_eq!(standard.mismatch_count, 50, "standard formula must mismatch every row");
    assert!(
        (standard.mean_rel_error - MEAN_REL_ERR_STANDARD).abs() <= MEAN_REL_ERR_TOL,
        "mean {}",
        standard.mean_rel_error
    );
    assert!(
        (standard.max_rel_error - MAX_REL_ERR_STANDARD).abs() <= EXTREMA_TOL,
        "max {}",
        standard.max_rel_error
    );
    assert!(
        (standard.min_rel_error - MIN_REL_ERR_STANDARD).abs() <= EXTREMA_TOL,
        "min {}",
        standard.min_rel_error
    );

    let bestfit = compare_table(table, ParamInterpretation::BestFitFormula).unwrap();
    assert_eq!(bestfit.mismatch_count, 6, "best-fit formula must mismatch exactly 6 rows");
    assert!(
        (bestfit.max_rel_error - MAX_REL_ERR_BESTFIT).abs() <= EXTREMA_TOL,
        "best-fit max {}",
        bestfit.max_rel_error
    );
    println!(
        "acceptance 1 PASS: standard 50/50 mismatch (mean {:.4}%, max {:.4}%, min {:.4}%); \
         best-fit 6/50 mismatch (max {:.4}%)",
        standard.mean_rel_error, standard.max_rel_error, standard.min_rel_error,
        bestfit.max_rel_error
    );
}

#[test]
fn acceptance_02_row_level_spot_checks() {
    let table = embedded_arch_table();
    let first = &table[0];
    let last = &table[49];
    assert_eq!(standard_param_count(first).unwrap(), 41_635_840);
    assert_eq!(bestfit_param_count(first).unwrap(), 43_732_992);
    assert_eq!(standard_param_count(last).unwrap(), 14_949_621_760);
    assert_eq!(bestfit_param_count(last).unwrap(), 16_181_698_560);
    println!("acceptance 2 PASS: row 1 and row 50 counts exact under both formulas");
}

#[test]
fn acceptance_03_twenty_to_one_closed_form() {
    let p = ScalingLawParams::new(1.8, 500.0, 0.35, 2.85 * 500.0, 0.35).unwrap();
    let cm = ComputeModel::default();
    let expected = ratio_expected();
    for &budget in &default_compute_grid() {
        let ratio = tokens_per_param(&p, budget, &cm).unwrap();
        assert!(
            (ratio - RATIO_TWENTY_TO_ONE).abs() <= RATIO_TOL,
            "ratio {ratio} at budget {budget:e}"
        );
        assert!((ratio - expected).abs() < 1e-9, "closed form drifted: {ratio} vs {expected}");
    }
    for budget in [1e18, 1e21, 1e23, 1e26] {
        let closed = tokens_per_param(&p, budget, &cm).unwrap();
        let brute = brute_force_tokens_per_param(&p, budget, &cm);
        assert!(
            rel_err(closed, brute) < BRUTE_FORCE_REL_TOL,
            "closed {closed} vs brute {brute} at {budget:e}"
        );
    }
    println!("acceptance 3 PASS: ratio {expected:.4} at every budget, brute force agrees");
}

// 2.85^(1/0.35), written the way the derivation states it.
fn ratio_expected() -> f64 {
    2.85f64.powf(1.0 / 0.35)
}

#[test]
fn acceptance_04_fit_recovery() {
    let truth = ScalingLawParams::new(1.8, 500.0, 0.35, 1500.0, 0.35).unwrap();
    let mut runs = Vec::new();
    for &n in &log_spaced(1e7, 1e10, 6) {
        for &d in &log_spaced(1e9, 1e12, 6) {
            runs.push(TrainingRun::new(n, d, eval_loss(&truth, n, d).unwrap()));
        }
    }
    let dataset = RunDataset::new(runs).unwrap();
    let result = fit(&dataset, &FitConfig::default()).unwrap();
    let got = result.params;
    let pairs = [
        ("E", got.irreducible_loss, truth.irreducible_loss),
        ("A", got.param_prefactor, truth.param_prefactor),
        ("alpha", got.param_exponent, truth.param_exponent),
        ("B", got.data_prefactor, truth.data_prefactor),
        ("beta", got.data_exponent, truth.data_exponent),
    ];
    for (name, actual, expected) in pairs {
        assert!(
            rel_err(actual, expected) < RECOVERY_REL_TOL,
            "{name}: {actual} vs {expected}"
        );
    }
    println!(
        "acceptance 4 PASS: all five parameters within 1% (objective {:.2e})",
        result.objective
    );
}

#[test]
fn acceptance_05_multiplicative_prediction() {
    let dataset = load_fixture();
    let config = FitConfig::default();
    let grid = SweepGrid::new(
        log_spaced(0.1, 10.0, 11)
            .into_iter()
            .map(|factor| Perturbation::Multiplicative { factor })
            .collect(),
    )
    .unwrap();
    let sweep = run_sweep(&dataset, &grid, &config, None).unwrap();
    let base = sweep.baseline.params;
    let cm = ComputeModel::default();
    let budgets = default_compute_grid();
    let base_curve: Vec<f64> =
        budgets.iter().map(|&c| tokens_per_param(&base, c, &cm).unwrap()).collect();

    for point in &sweep.points {
        let factor = point.value;
        let fitted = point.fit.as_ref().expect("multiplicative point fits").params;
        assert!(
            rel_err(fitted.param_exponent, base.param_exponent) < MULT_ALPHA_REL_TOL,
            "alpha at c_m = {factor}: {}",
            fitted.param_exponent
        );
        let predicted_prefactor = base.param_prefactor * factor.powf(base.param_exponent);
        assert!(
            rel_err(fitted.param_prefactor, predicted_prefactor) < MULT_PREFACTOR_REL_TOL,
            "A at c_m = {factor}: {} vs {predicted_prefactor}",
            fitted.param_prefactor
        );
        let predicted_shift = multiplicative_ratio_shift(&base, factor);
        for ((_, perturbed_ratio), base_ratio) in point.ratio_curve.iter().zip(&base_curve) {
            let shift = perturbed_ratio / base_ratio;
            assert!(
                rel_err(shift, predicted_shift) < MULT_RATIO_SHIFT_REL_TOL,
                "ratio shift at c_m = {factor}: {shift} vs {predicted_shift}"
            );
        }
    }
    println!("acceptance 5 PASS: alpha stable, prefactor and ratio shift track c_m^alpha");
}

#[test]
fn acceptance_06_systematic_bias_prediction() {
    let dataset = load_fixture();
    let sweep =
        run_sweep(&dataset, &default_sweep(SweepKind::SystematicBias), &FitConfig::default(), None)
            .unwrap();
    let base = sweep.baseline.params;

    let slopes: Vec<f64> = sweep.points.iter().map(|p| p.value).collect();
    let alphas: Vec<f64> = sweep
        .points
        .iter()
        .map(|p| p.fit.as_ref().expect("systematic point fits").params.param_exponent)
        .collect();
    let trend = fit_power_law_trend(&slopes, &alphas).unwrap();
    assert!(
        (trend.exponent - SYSTEMATIC_EXPONENT).abs() <= SYSTEMATIC_EXPONENT_TOL,
        "trend exponent {}",
        trend.exponent
    );
    assert!(trend.r_squared > SYSTEMATIC_R_SQUARED_MIN, "r^2 {}", trend.r_squared);

    for point in &sweep.points {
        let fitted = point.fit.as_ref().unwrap().params;
        let fitted_exponent = (fitted.param_exponent - fitted.data_exponent)
            / (fitted.param_exponent + fitted.data_exponent);
        let predicted = systematic_ratio_exponent(&base, point.value);
        assert!(
            (fitted_exponent - predicted).abs() <= SYSTEMATIC_RATIO_EXPONENT_ABS_TOL,
            "ratio exponent at s = {}: {fitted_exponent} vs {predicted}",
            point.value
        );
    }
    println!(
        "acceptance 6 PASS: alpha ~ s^{:.4} with r^2 = {:.6}; ratio exponents match",
        trend.exponent, trend.r_squared
    );
}

#[test]
fn acceptance_07_additive_direction() {
    let dataset = load_fixture();
    let sweep = run_sweep(&dataset, &default_sweep(SweepKind::Additive), &FitConfig::default(), None)
        .unwrap();
    let base_alpha = sweep.baseline.params.param_exponent;

    let mut previous = f64::NEG_INFINITY;
    for point in &sweep.points {
        let alpha = point.fit.as_ref().expect("additive point fits").params.param_exponent;
        assert!(
            alpha > previous,
            "alpha not strictly increasing at c_a = {}: {alpha} after {previous}",
            point.value
        );
        if point.value < 0.0 {
            assert!(alpha < base_alpha, "alpha {alpha} at negative c_a {}", point.value);
        }
        if point.value > 0.0 {
            assert!(alpha > base_alpha, "alpha {alpha} at positive c_a {}", point.value);
        }
        previous = alpha;
    }
    println!("acceptance 7 PASS: alpha strictly increasing across the additive grid");
}

#[test]
fn acceptance_08_identity_no_ops() {
    let dataset = load_fixture();
    let config = FitConfig::default();
    let identities = [
        Perturbation::Multiplicative { factor: 1.0 },
        Perturbation::Additive { offset: 0.0 },
        Perturbation::SystematicBias { slope: 1.0 },
        Perturbation::LogNormalNoise { sigma: 0.0, seed: 12345 },
    ];
    for identity in identities {
        let grid = SweepGrid::new(vec![identity]).unwrap();
        let sweep = run_sweep(&dataset, &grid, &config, None).unwrap();
        let point_fit = sweep.points[0].fit.as_ref().expect("identity point fits");
        assert_eq!(point_fit, &sweep.baseline, "{identity:?} must be a bit-exact no-op");
    }
    println!("acceptance 8 PASS: all four identity perturbations reproduce the baseline fit");
}

#[test]
fn acceptance_09_noise_widening() {
    let dataset = load_fixture();
    let config = FitConfig::default();
    let noise_grid = default_sweep(SweepKind::LogNormalNoise);

    // NaN flags may appear only in the top half of the sigma grid (sigma > 1).
    let sweep = run_sweep(&dataset, &noise_grid, &config, None).unwrap();
    let sigma_one_index = 4;
    assert_eq!(sweep.points[sigma_one_index].value, 1.0, "grid layout changed");
    for (i, point) in sweep.points.iter().enumerate() {
        if point.nan_flag {
            assert!(
                i > sigma_one_index,
                "NaN flag at sigma = {} (index {i}), below the top of the grid",
                point.value
            );
        }
    }

    // Bootstrap widening between sigma = 0.01 and sigma = 1 (same noise seed).
    let opts =
        BootstrapOptions { n_resamples: NOISE_RESAMPLES, seed: 11, confidence_level: 0.80 };
    let mut ses = Vec::new();
    for idx in [0, sigma_one_index] {
        let grid = SweepGrid::new(vec![noise_grid.points()[idx]]).unwrap();
        let sweep = run_sweep(&dataset, &grid, &config, Some(&opts)).unwrap();
        let bs = sweep.points[0].bootstrap.as_ref().expect("bootstrap ran");
        ses.push(bs.standard_errors.param_exponent);
    }
    assert!(
        ses[1] >= NOISE_SE_WIDENING_MIN * ses[0],
        "SE(alpha) at sigma=1 is {} vs {} at sigma=0.01",
        ses[1],
        ses[0]
    );
    println!(
        "acceptance 9 PASS: SE(alpha) widened {:.1}x from sigma 0.01 to 1; flags only at high sigma",
        ses[1] / ses[0]
    );
}

/// Path of the externally supplied loss table, if the user provided one.
fn external_runs_path() -> Option<PathBuf> {
    if let Ok(custom) = std::env::var("CHINCHILLA_RUNS_CSV") {
        let path = PathBuf::from(custom);
        return path.is_file().then_some(path);
    }
    let default = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/chinchilla_runs.csv");
    default.is_file().then_some(default)
}

#[test]
fn acceptance_10_chinchilla_data() {
    let Some(path) = external_runs_path() else {
        println!(
            "acceptance 10 SKIP: no loss data found (set CHINCHILLA_RUNS_CSV or place \
             data/chinchilla_runs.csv; see README)"
        );
        return;
    };
    let raw = load_runs(&path).unwrap();
    let table = embedded_arch_table();
    let config = FitConfig::default();
    let cm = ComputeModel::default();
    let opts =
        BootstrapOptions { n_resamples: DATA_RESAMPLES, seed: 0, confidence_level: 0.80 };

    // (a) ratio in [15, 30] at 1e21..1e24 for all three interpretations;
    // (b) slope ordering standard > best-fit > reported within +-0.4 of the
    //     published values; (d) pairwise alpha differences under 2 SEs.
    let mut alphas = Vec::new();
    let mut ses = Vec::new();
    for (interpretation, published_slope) in DATA_SLOPES {
        let dataset = remap_params(&raw, interpretation, table).unwrap();
        let result = fit(&dataset, &config).unwrap();
        for budget in [1e21, 1e22, 1e23, 1e24] {
            let ratio = tokens_per_param(&result.params, budget, &cm).unwrap();
            assert!(
                (DATA_RATIO_LO..=DATA_RATIO_HI).contains(&ratio),
                "{interpretation:?}: ratio {ratio} at {budget:e}"
            );
        }
        let slope =
            ratio_slope_per_decade(&result.params, &cm, &default_compute_grid()).unwrap();
        assert!(
            (slope - published_slope).abs() <= DATA_SLOPE_ABS_TOL,
            "{interpretation:?}: slope {slope} vs {published_slope}"
        );
        let bs = bootstrap(&dataset, &config.refit_near(&result.log_params), &opts).unwrap();
        println!(
            "  {interpretation:?}: alpha {:.4} +- {:.4}, slope {slope:.3}",
            result.params.param_exponent, bs.standard_errors.param_exponent
        );
        alphas.push((interpretation, result.params.param_exponent, slope));
        ses.push(bs.standard_errors.param_exponent);
    }
    let slope_of = |i: ParamInterpretation| alphas.iter().find(|a| a.0 == i).unwrap().2;
    assert!(
        slope_of(ParamInterpretation::StandardFormula)
            > slope_of(ParamInterpretation::BestFitFormula)
            && slope_of(ParamInterpretation::BestFitFormula)
                > slope_of(ParamInterpretation::Reported),
        "slope ordering violated"
    );
    for i in 0..alphas.len() {
        for j in (i + 1)..alphas.len() {
            let gap = (alphas[i].1 - alphas[j].1).abs();
            let limit = 2.0 * ses[i].max(ses[j]);
            assert!(
                gap < limit,
                "{:?} vs {:?}: alpha gap {gap} exceeds 2 SE = {limit}",
                alphas[i].0, alphas[j].0
            );
        }
    }

    // (c) additive sweep endpoints on standard-formula sizes.
    let dataset = remap_params(&raw, ParamInterpretation::StandardFormula, table).unwrap();
    let sweep = run_sweep(&dataset, &default_sweep(SweepKind::Additive), &config, None).unwrap();
    let first = sweep.points.first().unwrap().fit.as_ref().expect("first additive point fits");
    let last = sweep.points.last().unwrap().fit.as_ref().expect("last additive point fits");
    let e_first = first.params.irreducible_loss;
    let e_last = last.params.irreducible_loss;
    assert!(
        (DATA_E_FIRST.0..=DATA_E_FIRST.1).contains(&e_first),
        "E at most negative offset: {e_first}"
    );
    assert!(
        (DATA_E_LAST.0..=DATA_E_LAST.1).contains(&e_last),
        "E at most positive offset: {e_last}"
    );
    let a_first = first.params.param_exponent;
    let a_last = last.params.param_exponent;
    assert!(
        (a_first - DATA_ALPHA_FIRST).abs() <= DATA_ALPHA_ABS_TOL,
        "alpha at most negative offset: {a_first}"
    );
    assert!(
        (a_last - DATA_ALPHA_LAST).abs() <= DATA_ALPHA_ABS_TOL,
        "alpha at most positive offset: {a_last}"
    );
    println!(
        "acceptance 10 PASS: ratios in range, slope ordering holds, additive endpoints \
         E {e_first:.3}->{e_last:.3}, alpha {a_first:.3}->{a_last:.3}"
    );
}

fn workbench_command() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chinchilla-workbench"))
}

fn run_cli(args: &[&str]) {
    let output = workbench_command().args(args).output().expect("command runs");
    assert!(
        output.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&output.stderr)
    );
}

fn dir_files_sorted(dir: &std::path::Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    files
}

fn assert_dirs_byte_identical(a: &std::path::Path, b: &std::path::Path) {
    let files_a = dir_files_sorted(a);
    let files_b = dir_files_sorted(b);
    let names =
        |files: &[PathBuf]| -> Vec<String> {
            files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect()
        };
    assert_eq!(names(&files_a), names(&files_b), "different file sets");
    for (fa, fb) in files_a.iter().zip(&files_b) {
        let bytes_a = std::fs::read(fa).unwrap();
        let bytes_b = std::fs::read(fb).unwrap();
        assert_eq!(bytes_a, bytes_b, "{} differs between runs", fa.display());
    }
}

#[test]
fn acceptance_11_cli_determinism() {
    let scratch = tempfile::tempdir().unwrap();
    let fixture = fixture_path();
    let fixture = fixture.to_str().unwrap();

    let out_a = scratch.path().join("a");
    let out_b = scratch.path().join("b");
    for out in [&out_a, &out_b] {
        let out = out.to_str().unwrap();
        run_cli(&["params-compare", "--arch", "embedded", "--out", out]);
        run_cli(&[
            "fit", "--runs", fixture, "--bootstrap", "8", "--seed", "3", "--out", out,
        ]);
        run_cli(&[
            "ratio", "--runs", fixture, "--compute-points", "20", "--out", out,
        ]);
        run_cli(&[
            "sweep", "--runs", fixture, "--kind", "multiplicative", "--grid", "0.5,1,2",
            "--bootstrap", "4", "--seed", "3", "--out", out,
        ]);
        run_cli(&[
            "sweep", "--runs", fixture, "--kind", "lognormal", "--grid", "0.1,1",
            "--bootstrap", "0", "--seed", "9", "--out", out,
        ]);
    }
    assert_dirs_byte_identical(&out_a, &out_b);

    // `report` regenerates plots from the CSVs alone, reproducibly.
    run_cli(&["report", "--out", out_a.to_str().unwrap()]);
    run_cli(&["report", "--out", out_b.to_str().unwrap()]);
    assert_dirs_byte_identical(&out_a, &out_b);
    println!("acceptance 11 PASS: byte-identical outputs across repeated runs of every subcommand");
}
