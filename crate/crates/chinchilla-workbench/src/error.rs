//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("architecture field `{field}` must be strictly positive")]
    InvalidArchField { field: &'static str },

    #[error("parameter count overflows 64-bit integer arithmetic")]
    CountOverflow,

    #[error("architecture table is empty")]
    EmptyArchTable,

    #[error("reported parameter count must be positive, got {value}")]
    NonPositiveReported { value: f64 },

    #[error("{what} must be positive and finite, got {value}")]
    NonPositiveInput { what: &'static str, value: f64 },

    #[error("scaling-law exponents sum to zero; compute-optimal allocation is undefined")]
    DegenerateExponents,

    #[error("compute grid needs at least 2 distinct budgets")]
    DegenerateComputeGrid,

    #[error("power-law trend needs at least 3 points, got {n}")]
    TooFewTrendPoints { n: usize },

    #[error("power-law trend inputs must all be positive (offending index {index})")]
    NonPositiveTrendPoint { index: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error(
        "dataset is underdetermined for fitting: {runs} runs, {distinct_params} distinct \
         parameter counts, {distinct_tokens} distinct token counts (need >=5 runs and >=3 of each)"
    )]
    Underdetermined {
        runs: usize,
        distinct_params: usize,
        distinct_tokens: usize,
    },

    #[error("invalid fit configuration: {reason}")]
    InvalidFitConfig { reason: String },

    #[error("objective received a non-finite value ({what})")]
    NonFinite { what: &'static str },

    #[error("no optimizer start produced a finite optimum; best diagnostics: {diagnostics}")]
    AllStartsFailed { diagnostics: String },

    #[error("bootstrap needs n_resamples >= 1")]
    NoResamples,

    #[error("invalid perturbation: {reason}")]
    InvalidPerturbation { reason: String },

    #[error("perturbed count at index {index} is not positive ({value})")]
    NonPositivePerturbedCount { index: usize, value: f64 },

    #[error("sweep grid must be nonempty and hold a single perturbation variant")]
    InvalidSweepGrid,

    #[error("row {row}: {message}")]
    CsvRow { row: usize, message: String },

    #[error("missing column `{name}` in {path}")]
    MissingColumn { name: String, path: String },

    #[error("duplicate architecture key {millions}M after rounding reported counts to millions")]
    DuplicateArchKey { millions: u64 },

    #[error("runs with no architecture-table match (reported millions): {orphans:?}")]
    UnmatchedRuns { orphans: Vec<u64> },

    #[error("refusing to write an empty record set to {path}")]
    EmptyRecords { path: PathBuf },

    #[error("SVG plot needs at least one series")]
    EmptyPlot,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
