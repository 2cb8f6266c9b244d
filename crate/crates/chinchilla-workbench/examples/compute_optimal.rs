//! Derive the compute-optimal allocation and the tokens-per-parameter ratio
//! from a scaling law, and cross-check the closed form against a brute-force
//! minimizer along the budget constraint.
//!
//! ```bash
//! cargo run --release --example compute_optimal
//! ```

use chinchilla_workbench::scaling_model::{
    eval_loss, optimal_allocation, ratio_prefactor, ratio_slope_per_decade, tokens_per_param,
    ComputeModel, ScalingLawParams,
};

fn main() {
    // B = 2.85*A with matching exponents puts the ratio near 20 tokens per
    // parameter at every budget.
    let law = ScalingLawParams::new(1.8, 500.0, 0.35, 2.85 * 500.0, 0.35).unwrap();
    let cm = ComputeModel::default();

    println!("law: L(N, D) = E + A/N^alpha + B/D^beta with");
    println!(
        "  E = {}, A = {}, alpha = {}, B = {}, beta = {}\n",
        law.irreducible_loss, law.param_prefactor, law.param_exponent, law.data_prefactor,
        law.data_exponent
    );
    println!(
        "budget-independent ratio prefactor (B/A)^(1/alpha) = {:.4}\n",
        ratio_prefactor(&law, &cm).unwrap()
    );

    println!("{:>10} {:>14} {:>14} {:>8} {:>14}", "C [FLOPs]", "N_opt", "D_opt", "D/N", "brute D/N");
    for budget in [1e18, 1e20, 1e22, 1e24, 1e26] {
        let alloc = optimal_allocation(&law, budget, &cm).unwrap();
        let brute = brute_force_ratio(&law, budget, &cm);
        println!(
            "{:>10.0e} {:>14.4e} {:>14.4e} {:>8.3} {:>14.3}",
            budget, alloc.n_opt, alloc.d_opt, alloc.ratio, brute
        );
    }

    let grid: Vec<f64> = (0..50).map(|i| 1e18 * 10f64.powf(8.0 * i as f64 / 49.0)).collect();
    println!(
        "\nslope of the ratio per decade of compute: {:+.4e} (flat when alpha = beta)",
        ratio_slope_per_decade(&law, &cm, &grid).unwrap()
    );

    // Tilted exponents make the ratio drift with the budget.
    let tilted = ScalingLawParams { param_exponent: 0.7, ..law };
    println!(
        "with alpha = 0.7, beta = 0.35 the ratio scales as C^(1/3): {:.2} at 1e21 vs {:.2} at 1e24",
        tokens_per_param(&tilted, 1e21, &cm).unwrap(),
        tokens_per_param(&tilted, 1e24, &cm).unwrap()
    );
}

/// Dense grid search over model sizes at a fixed budget; no calculus.
fn brute_force_ratio(law: &ScalingLawParams, budget: f64, cm: &ComputeModel) -> f64 {
    let (lo, hi, n) = (1e4f64, 1e16f64, 100_001usize);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut best = (f64::INFINITY, lo);
    for i in 0..n {
        let size = (llo + i as f64 * (lhi - llo) / (n - 1) as f64).exp();
        let tokens = budget / (cm.flops_per_param_token * size);
        let loss = eval_loss(law, size, tokens).unwrap();
        if loss < best.0 {
            best = (loss, size);
        }
    }
    budget / (cm.flops_per_param_token * best.1 * best.1)
}
