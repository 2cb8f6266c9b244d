//! Shared helpers for integration tests: the shipped fixture and independent
//! oracles that never touch the closed forms they check.

use std::path::PathBuf;

use chinchilla_workbench::fit_engine::RunDataset;
use chinchilla_workbench::io_ingest::load_runs;
use chinchilla_workbench::scaling_model::{eval_loss, ComputeModel, ScalingLawParams};

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic_runs.csv")
}

/// The shipped 36-run fixture: six model sizes from the embedded table's
/// reported column, six token counts, losses exactly on [`fixture_truth`].
pub fn load_fixture() -> RunDataset {
    load_runs(&fixture_path()).expect("fixture loads")
}

/// Parameters the fixture was generated from.
pub fn fixture_truth() -> ScalingLawParams {
    ScalingLawParams::new(1.8, 500.0, 0.35, 1500.0, 0.35).unwrap()
}

/// Tokens-per-parameter by brute force: minimizes the predicted loss along
/// the budget constraint on a dense log grid in model size, no calculus.
/// Grid: 20001 points over [1e2, 1e21] (ratio quantization error < 0.25%).
pub fn brute_force_tokens_per_param(
    p: &ScalingLawParams,
    compute: f64,
    cm: &ComputeModel,
) -> f64 {
    let (lo, hi, n) = (1e2f64, 1e21f64, 20_001usize);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut best_loss = f64::INFINITY;
    let mut best_n = lo;
    for i in 0..n {
        let model_size = (llo + (i as f64) * (lhi - llo) / ((n - 1) as f64)).exp();
        let tokens = compute / (cm.flops_per_param_token * model_size);
        let loss = eval_loss(p, model_size, tokens).unwrap();
        if loss < best_loss {
            best_loss = loss;
            best_n = model_size;
        }
    }
    compute / (cm.flops_per_param_token * best_n * best_n)
}
