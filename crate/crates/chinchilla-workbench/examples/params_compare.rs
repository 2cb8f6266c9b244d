//! Count transformer parameters for the embedded 50-model table under the
//! standard formula (attention coefficient 4) and the best-fit formula
//! (coefficient 5), and measure how each disagrees with the reported sizes.
//!
//! ```bash
//! cargo run --release --example params_compare
//! ```

use chinchilla_workbench::arch_params::{
    bestfit_param_count, compare_table, standard_param_count, ParamInterpretation,
};
use chinchilla_workbench::io_ingest::embedded_arch_table;

fn main() {
    let table = embedded_arch_table();

    println!("first rows of the embedded table, counts in millions:");
    println!("{:>8} {:>8} {:>9} {:>10} {:>9}", "d_model", "layers", "reported", "standard", "bestfit");
    for arch in table.iter().take(5) {
        println!(
            "{:>8} {:>8} {:>9} {:>10} {:>9}",
            arch.d_model,
            arch.n_layers,
            arch.reported_params / 1_000_000,
            (standard_param_count(arch).unwrap() + 500_000) / 1_000_000,
            (bestfit_param_count(arch).unwrap() + 500_000) / 1_000_000,
        );
    }
    println!("  ... ({} rows total)\n", table.len());

    for (name, interpretation) in [
        ("standard formula (attn coefficient 4)", ParamInterpretation::StandardFormula),
        ("best-fit formula (attn coefficient 5)", ParamInterpretation::BestFitFormula),
    ] {
        let report = compare_table(table, interpretation).unwrap();
        println!("{name}:");
        println!(
            "  {}/{} rows agree with the reported size ({} mismatches)",
            report.row_count() - report.mismatch_count,
            report.row_count(),
            report.mismatch_count
        );
        println!(
            "  |relative error|: mean {:.3}%, min {:.3}%, max {:.3}%",
            report.mean_rel_error, report.min_rel_error, report.max_rel_error
        );
    }
}
