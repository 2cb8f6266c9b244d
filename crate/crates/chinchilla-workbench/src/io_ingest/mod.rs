//! Loading, validation, remapping, and persistence of tabular data.
//!
//! Two CSV schemas enter the system:
//!
//! * runs: `reported_params,training_tokens,loss` with optional `run_id`;
//!   raw units, decimal point, UTF-8, LF or CRLF
//! * architecture tables:
//!   `d_model,ffw_size,kv_size,n_heads,n_layers,n_vocab,reported_params_millions`
//!
//! The 50-row architecture table ships embedded. Result tables are written
//! with LF line endings and shortest-round-trip float formatting, so equal
//! inputs produce byte-identical files.

pub mod svg;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::arch_params::{bestfit_param_count, standard_param_count, ArchSpec, ParamInterpretation};
use crate::error::{Error, Result};
use crate::fit_engine::{BootstrapResult, FitResult, RunDataset, TrainingRun};
use crate::sensitivity::{SweepPointResult, SweepResult};

const EMBEDDED_TABLE_CSV: &str = include_str!("../../data/chinchilla_table_a9.csv");

/// The architecture table copied from the public Chinchilla appendix:
/// 50 rows, vocabulary 32168 throughout, sizes reported in millions.
pub fn embedded_arch_table() -> &'static [ArchSpec] {
    static TABLE: OnceLock<Vec<ArchSpec>> = OnceLock::new();
    TABLE.get_or_init(|| {
        parse_arch_table(EMBEDDED_TABLE_CSV.as_bytes(), "embedded table")
            .expect("embedded table is well-formed")
    })
}

fn header_index(headers: &csv::StringRecord, name: &str, path: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
        name: name.to_string(),
        path: path.to_string(),
    })
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, row: usize, name: &str) -> Result<T> {
    let raw = record.get(idx).ok_or_else(|| Error::CsvRow {
        row,
        message: format!("missing `{name}` field"),
    })?;
    raw.trim().parse().map_err(|_| Error::CsvRow {
        row,
        message: format!("`{name}` is not numeric: {raw:?}"),
    })
}

fn parse_arch_table<R: std::io::Read>(reader: R, path: &str) -> Result<Vec<ArchSpec>> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let cols: Vec<usize> = [
        "d_model",
        "ffw_size",
        "kv_size",
        "n_heads",
        "n_layers",
        "n_vocab",
        "reported_params_millions",
    ]
    .iter()
    .map(|name| header_index(&headers, name, path))
    .collect::<Result<_>>()?;

    let mut table = Vec::new();
    for (i, record) in csv_reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::CsvRow { row, message: e.to_string() })?;
        let field = |k: usize| parse_field::<u64>(&record, cols[k], row, headers.get(cols[k]).unwrap());
        let millions: u64 = field(6)?;
        let arch = ArchSpec {
            d_model: field(0)?,
            ffw_size: field(1)?,
            kv_size: field(2)?,
            n_heads: field(3)?,
            n_layers: field(4)?,
            n_vocab: field(5)?,
            reported_params: millions
                .checked_mul(1_000_000)
                .ok_or(Error::CsvRow { row, message: "reported millions overflow".into() })?,
        };
        arch.validate().map_err(|e| Error::CsvRow { row, message: e.to_string() })?;
        table.push(arch);
    }
    if table.is_empty() {
        return Err(Error::EmptyArchTable);
    }
    Ok(table)
}

/// Loads and validates an architecture table from a CSV file.
pub fn load_arch_table(path: &Path) -> Result<Vec<ArchSpec>> {
    let file = std::fs::File::open(path)?;
    parse_arch_table(file, &path.display().to_string())
}

/// Loads a run table. Row order is preserved; every cell must parse to a
/// positive finite value, and failures name the offending data row.
pub fn load_runs(path: &Path) -> Result<RunDataset> {
    let file = std::fs::File::open(path)?;
    let mut csv_reader = csv::Reader::from_reader(file);
    let headers = csv_reader.headers()?.clone();
    let path_str = path.display().to_string();
    let n_col = header_index(&headers, "reported_params", &path_str)?;
    let d_col = header_index(&headers, "training_tokens", &path_str)?;
    let l_col = header_index(&headers, "loss", &path_str)?;
    let id_col = headers.iter().position(|h| h == "run_id");

    let mut runs = Vec::new();
    for (i, record) in csv_reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::CsvRow { row, message: e.to_string() })?;
        let run = TrainingRun {
            n_params: parse_field(&record, n_col, row, "reported_params")?,
            d_tokens: parse_field(&record, d_col, row, "training_tokens")?,
            loss: parse_field(&record, l_col, row, "loss")?,
            run_id: id_col.and_then(|c| record.get(c)).map(str::to_string),
        };
        for (value, what) in
            [(run.n_params, "reported_params"), (run.d_tokens, "training_tokens"), (run.loss, "loss")]
        {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::CsvRow {
                    row,
                    message: format!("`{what}` must be positive and finite, got {value}"),
                });
            }
        }
        runs.push(run);
    }
    RunDataset::new(runs)
}

/// Joins run sizes to the architecture table and rewrites them under any of
/// the three interpretations.
///
/// The join key is the reported count rounded to the nearest million (the
/// table's printed precision). A count that already equals a computed count
/// of the target interpretation bit-exactly maps to itself, which makes
/// remapping idempotent.
#[derive(Debug, Clone)]
pub struct InterpretationMap {
    /// reported millions -> (standard, best-fit) counts in raw units.
    by_reported_millions: BTreeMap<u64, (u64, u64)>,
    /// Bit patterns of every standard-formula count.
    standard_bits: HashSet<u64>,
    /// Bit patterns of every best-fit count.
    bestfit_bits: HashSet<u64>,
}

impl InterpretationMap {
    pub fn from_table(table: &[ArchSpec]) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::EmptyArchTable);
        }
        let mut by_reported_millions = BTreeMap::new();
        let mut standard_bits = HashSet::new();
        let mut bestfit_bits = HashSet::new();
        for arch in table {
            let millions = arch.reported_millions();
            let standard = standard_param_count(arch)?;
            let bestfit = bestfit_param_count(arch)?;
            if by_reported_millions.insert(millions, (standard, bestfit)).is_some() {
                return Err(Error::DuplicateArchKey { millions });
            }
            standard_bits.insert((standard as f64).to_bits());
            bestfit_bits.insert((bestfit as f64).to_bits());
        }
        Ok(InterpretationMap { by_reported_millions, standard_bits, bestfit_bits })
    }

    /// Millions key for a raw count.
    pub fn key_of(count: f64) -> u64 {
        (count / 1e6).round() as u64
    }

    /// The count a run should carry under `interpretation`, or `None` when
    /// the table has no row for it.
    pub fn resolve(&self, count: f64, interpretation: ParamInterpretation) -> Option<f64> {
        let already = match interpretation {
            ParamInterpretation::Reported => return Some(count),
            ParamInterpretation::StandardFormula => &self.standard_bits,
            ParamInterpretation::BestFitFormula => &self.bestfit_bits,
        };
        if already.contains(&count.to_bits()) {
            return Some(count);
        }
        let (standard, bestfit) = self.by_reported_millions.get(&Self::key_of(count))?;
        Some(match interpretation {
            ParamInterpretation::Reported => unreachable!(),
            ParamInterpretation::StandardFormula => *standard as f64,
            ParamInterpretation::BestFitFormula => *bestfit as f64,
        })
    }
}

/// Rewrites every run's parameter count under the chosen interpretation.
/// Runs whose count matches no table row make the whole call fail, listing
/// the orphan counts in millions.
pub fn remap_params(
    dataset: &RunDataset,
    interpretation: ParamInterpretation,
    table: &[ArchSpec],
) -> Result<RunDataset> {
    if interpretation == ParamInterpretation::Reported {
        return Ok(dataset.clone());
    }
    let map = InterpretationMap::from_table(table)?;
    let mut orphans = Vec::new();
    let mut rows = Vec::with_capacity(dataset.len());
    for run in dataset.runs() {
        match map.resolve(run.n_params, interpretation) {
            Some(n_params) => rows.push(TrainingRun { n_params, ..run.clone() }),
            None => orphans.push(InterpretationMap::key_of(run.n_params)),
        }
    }
    if !orphans.is_empty() {
        orphans.sort_unstable();
        orphans.dedup();
        return Err(Error::UnmatchedRuns { orphans });
    }
    RunDataset::new(rows)
}

/// Writes any serializable record list as CSV with deterministic bytes.
pub fn write_results_csv<S: Serialize>(records: &[S], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyRecords { path: path.to_path_buf() });
    }
    let mut writer = csv::Writer::from_path(path)?;
    for record in records {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a record list written by [`write_results_csv`].
pub fn read_results_csv<D: DeserializeOwned>(path: &Path) -> Result<Vec<D>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, record) in reader.deserialize().enumerate() {
        out.push(record.map_err(|e| Error::CsvRow { row: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Record schemas for the result files the command surface emits.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsCompareRecord {
    pub interpretation: String,
    pub row: usize,
    pub d_model: u64,
    pub ffw_size: u64,
    pub kv_size: u64,
    pub n_heads: u64,
    pub n_layers: u64,
    pub n_vocab: u64,
    pub reported_params: u64,
    pub computed_params: u64,
    pub relative_error_pct: f64,
    pub mismatch: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub interpretation: String,
    pub irreducible_loss: f64,
    pub param_prefactor: f64,
    pub param_exponent: f64,
    pub data_prefactor: f64,
    pub data_exponent: f64,
    pub objective: f64,
    pub converged: bool,
}

impl FitRecord {
    pub fn new(interpretation: &str, fit: &FitResult) -> Self {
        let p = &fit.params;
        FitRecord {
            interpretation: interpretation.to_string(),
            irreducible_loss: p.irreducible_loss,
            param_prefactor: p.param_prefactor,
            param_exponent: p.param_exponent,
            data_prefactor: p.data_prefactor,
            data_exponent: p.data_exponent,
            objective: fit.objective,
            converged: fit.converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRecord {
    pub parameter: String,
    pub estimate: f64,
    pub standard_error: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub confidence_level: f64,
    pub n_resamples: usize,
    pub n_dropped: usize,
    pub seed: u64,
    pub flagged: bool,
}

/// One row per scaling-law parameter.
pub fn bootstrap_records(fit: &FitResult, bs: &BootstrapResult) -> Vec<BootstrapRecord> {
    let names = ["irreducible_loss", "param_prefactor", "param_exponent", "data_prefactor", "data_exponent"];
    let estimates = [
        fit.params.irreducible_loss,
        fit.params.param_prefactor,
        fit.params.param_exponent,
        fit.params.data_prefactor,
        fit.params.data_exponent,
    ];
    let ses = bs.standard_errors.as_array();
    let lows = bs.lower.as_array();
    let highs = bs.upper.as_array();
    names
        .iter()
        .enumerate()
        .map(|(i, name)| BootstrapRecord {
            parameter: name.to_string(),
            estimate: estimates[i],
            standard_error: ses[i],
            ci_lower: lows[i],
            ci_upper: highs[i],
            confidence_level: bs.confidence_level,
            n_resamples: bs.n_resamples,
            n_dropped: bs.n_dropped,
            seed: bs.seed,
            flagged: bs.flagged,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCurveRecord {
    pub compute_flops: f64,
    pub tokens_per_param: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub kind: String,
    pub value: f64,
    pub irreducible_loss: f64,
    pub param_prefactor: f64,
    pub param_exponent: f64,
    pub data_prefactor: f64,
    pub data_exponent: f64,
    pub se_irreducible_loss: f64,
    pub se_param_prefactor: f64,
    pub se_param_exponent: f64,
    pub se_data_prefactor: f64,
    pub se_data_exponent: f64,
    pub ratio_at_1e19: f64,
    pub ratio_at_1e21: f64,
    pub ratio_at_1e23: f64,
    pub slope_per_decade: f64,
    pub nan_flag: bool,
}

impl SweepRecord {
    pub fn new(kind: &str, point: &SweepPointResult) -> Self {
        let nan = f64::NAN;
        let p = point.fit.as_ref().map(|f| f.params);
        let ses = point
            .bootstrap
            .as_ref()
            .map(|b| b.standard_errors.as_array())
            .unwrap_or([nan; 5]);
        SweepRecord {
            kind: kind.to_string(),
            value: point.value,
            irreducible_loss: p.map_or(nan, |p| p.irreducible_loss),
            param_prefactor: p.map_or(nan, |p| p.param_prefactor),
            param_exponent: p.map_or(nan, |p| p.param_exponent),
            data_prefactor: p.map_or(nan, |p| p.data_prefactor),
            data_exponent: p.map_or(nan, |p| p.data_exponent),
            se_irreducible_loss: ses[0],
            se_param_prefactor: ses[1],
            se_param_exponent: ses[2],
            se_data_prefactor: ses[3],
            se_data_exponent: ses[4],
            ratio_at_1e19: point.reference_ratios[0],
            ratio_at_1e21: point.reference_ratios[1],
            ratio_at_1e23: point.reference_ratios[2],
            slope_per_decade: point.ratio_slope_per_decade,
            nan_flag: point.nan_flag,
        }
    }
}

/// One CSV row per sweep point.
pub fn sweep_records(sweep: &SweepResult) -> Vec<SweepRecord> {
    sweep.points.iter().map(|p| SweepRecord::new(sweep.kind.label(), p)).collect()
}

/// Groups sweep ratio curves for plotting: one series per grid value.
pub fn sweep_ratio_series(sweep: &SweepResult) -> Vec<svg::PlotSeries> {
    sweep
        .points
        .iter()
        .filter(|p| !p.ratio_curve.is_empty())
        .map(|p| svg::PlotSeries::new(format!("{} = {}", sweep.kind.label(), p.value), p.ratio_curve.clone()))
        .collect()
}
