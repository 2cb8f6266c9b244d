//! Statistical properties of the sweep machinery that go beyond the
//! per-criterion acceptance checks.

mod common;

use chinchilla_workbench::arch_params::ParamInterpretation;
use chinchilla_workbench::fit_engine::{
    bootstrap, fit, BootstrapOptions, FitConfig, RunDataset, TrainingRun,
};
use chinchilla_workbench::io_ingest::{embedded_arch_table, remap_params};
use chinchilla_workbench::perturb::{Perturbation, SweepGrid};
use chinchilla_workbench::scaling_model::{
    eval_loss, log_spaced, tokens_per_param, ComputeModel, ScalingLawParams,
};
use chinchilla_workbench::sensitivity::run_sweep;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use common::{brute_force_tokens_per_param, fixture_truth, load_fixture};

/// Bootstrap uncertainty of every parameter grows with the noise scale,
/// allowing one inversion between adjacent grid points.
#[test]
fn noise_widens_every_parameter_se() {
    let dataset = load_fixture();
    let config = FitConfig::default();
    let sigmas = [0.01, 0.1, 1.0, 3.1622776601683795];
    let opts = BootstrapOptions { n_resamples: 60, seed: 21, confidence_level: 0.80 };

    let grid = SweepGrid::new(
        sigmas.iter().map(|&sigma| Perturbation::LogNormalNoise { sigma, seed: 0 }).collect(),
    )
    .unwrap();
    let sweep = run_sweep(&dataset, &grid, &config, Some(&opts)).unwrap();
    let ses: Vec<[f64; 5]> = sweep
        .points
        .iter()
        .map(|p| p.bootstrap.as_ref().expect("bootstrap ran").standard_errors.as_array())
        .collect();

    for param in 0..5 {
        let series: Vec<f64> = ses.iter().map(|se| se[param]).collect();
        let inversions =
            series.windows(2).filter(|w| w[1] < w[0]).count();
        assert!(
            inversions <= 1,
            "parameter {param}: SEs {series:?} invert more than once"
        );
        // The spread must widen somewhere along the sweep, even where a
        // degenerate top-of-grid fit pins a parameter at a boundary.
        let peak = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(
            peak > series[0],
            "parameter {param}: SEs {series:?} never widen"
        );
    }
}

/// Fitting the same losses under the three size interpretations moves the
/// exponent by less than two bootstrap standard errors (estimator overlap).
#[test]
fn interpretations_agree_within_two_standard_errors() {
    let table = embedded_arch_table();
    let subset: Vec<_> = table.iter().step_by(3).collect();
    let tokens = log_spaced(5e9, 5e11, 4);
    let truth = fixture_truth();

    // Losses generated from the standard-formula sizes with mild noise; runs
    // keyed by the table's reported sizes, as a real loss table would be.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut runs = Vec::new();
    for arch in &subset {
        let standard =
            chinchilla_workbench::arch_params::standard_param_count(arch).unwrap() as f64;
        for &d in &tokens {
            let z: f64 = StandardNormal.sample(&mut rng);
            let loss = eval_loss(&truth, standard, d).unwrap() * (0.01 * z).exp();
            runs.push(TrainingRun::new(arch.reported_params as f64, d, loss));
        }
    }
    let reported_keyed = RunDataset::new(runs).unwrap();

    let config = FitConfig::default();
    let opts = BootstrapOptions { n_resamples: 150, seed: 4, confidence_level: 0.80 };
    let mut alphas = Vec::new();
    let mut ses = Vec::new();
    for interpretation in [
        ParamInterpretation::Reported,
        ParamInterpretation::StandardFormula,
        ParamInterpretation::BestFitFormula,
    ] {
        let dataset = remap_params(&reported_keyed, interpretation, table).unwrap();
        let result = fit(&dataset, &config).unwrap();
        let bs = bootstrap(&dataset, &config.refit_near(&result.log_params), &opts).unwrap();
        alphas.push(result.params.param_exponent);
        ses.push(bs.standard_errors.param_exponent);
    }
    for i in 0..3 {
        for j in (i + 1)..3 {
            let gap = (alphas[i] - alphas[j]).abs();
            let limit = 2.0 * ses[i].max(ses[j]);
            assert!(
                gap < limit,
                "interpretations {i} vs {j}: alpha gap {gap} exceeds 2 SE {limit} \
                 (alphas {alphas:?}, ses {ses:?})"
            );
        }
    }
}

/// The closed-form ratio agrees with a brute-force constrained minimizer for
/// arbitrary valid parameters and budgets.
#[test]
fn tokens_per_param_matches_brute_force_for_random_laws() {
    let cm = ComputeModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut uniform = |lo: f64, hi: f64| {
        let z: f64 = rand::Rng::random::<f64>(&mut rng);
        lo + z * (hi - lo)
    };
    for _ in 0..40 {
        let alpha = uniform(0.2, 0.6);
        let beta = uniform(0.2, 0.6);
        let a = uniform(100.0, 1000.0);
        let b = a * uniform(1.0, 5.0);
        let e = uniform(0.5, 2.5);
        let compute = 10f64.powf(uniform(18.0, 26.0));
        let p = ScalingLawParams::new(e, a, alpha, b, beta).unwrap();
        let closed = tokens_per_param(&p, compute, &cm).unwrap();
        let brute = brute_force_tokens_per_param(&p, compute, &cm);
        assert!(
            (closed - brute).abs() / brute < 0.005,
            "closed {closed} vs brute {brute} for {p:?} at {compute:e}"
        );
    }
}
