//! Generate noiseless runs from a known law, fit the five parameters back out
//! of them with the full default initialization lattice, and report recovery.
//!
//! ```bash
//! cargo run --release --example fit_synthetic
//! ```

use chinchilla_workbench::fit_engine::{fit, FitConfig, RunDataset, TrainingRun};
use chinchilla_workbench::scaling_model::{eval_loss, log_spaced, ScalingLawParams};

fn main() {
    let truth = ScalingLawParams::new(1.8, 500.0, 0.35, 1500.0, 0.35).unwrap();

    // 6x6 grid: model sizes 1e7..1e10, token counts 1e9..1e12.
    let mut runs = Vec::new();
    for &n in &log_spaced(1e7, 1e10, 6) {
        for &d in &log_spaced(1e9, 1e12, 6) {
            runs.push(TrainingRun::new(n, d, eval_loss(&truth, n, d).unwrap()));
        }
    }
    let dataset = RunDataset::new(runs).unwrap();

    let config = FitConfig::default();
    println!(
        "fitting {} runs from {} optimizer starts (Huber delta = {:.0e})...",
        dataset.len(),
        config.start_count(),
        config.huber_delta
    );
    let started = std::time::Instant::now();
    let result = fit(&dataset, &config).unwrap();
    println!(
        "done in {:.2?}; objective {:.3e}, converged: {}\n",
        started.elapsed(),
        result.objective,
        result.converged
    );

    let rows = [
        ("E  (irreducible loss)", truth.irreducible_loss, result.params.irreducible_loss),
        ("A  (param prefactor)", truth.param_prefactor, result.params.param_prefactor),
        ("alpha (param exponent)", truth.param_exponent, result.params.param_exponent),
        ("B  (data prefactor)", truth.data_prefactor, result.params.data_prefactor),
        ("beta  (data exponent)", truth.data_exponent, result.params.data_exponent),
    ];
    println!("{:<24} {:>12} {:>16} {:>12}", "parameter", "truth", "fitted", "rel err");
    for (name, want, got) in rows {
        println!("{name:<24} {want:>12.4} {got:>16.8} {:>12.2e}", (got - want).abs() / want);
    }
}
