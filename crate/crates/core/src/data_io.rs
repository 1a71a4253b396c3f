//! Return-data ingestion (Kenneth-French-style monthly CSVs) and report
//! serialization.
//!
//! The loader expects a pre-trimmed rectangular CSV with a header row
//! (RFC 4180, UTF-8). FF monthly files ship as percent values with prose
//! headers and footers; strip those first, e.g.
//! `sed -n '/^,/,/^$/p' raw.csv > trimmed.csv` or slice the block in a
//! spreadsheet, then load with the default percent unit.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::backtest::BacktestResult;
use crate::error::{Error, Result};
use crate::moments::ReturnsMatrix;
use crate::oracle::SimReport;
use crate::solver::SolveResult;

/// Serialize an `Array1<f64>` as a plain JSON number array.
pub mod serde_arr {
    use ndarray::Array1;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(arr: &Array1<f64>, s: S) -> Result<S::Ok, S::Error> {
        arr.as_slice().expect("standard layout").serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array1<f64>, D::Error> {
        Vec::<f64>::deserialize(d).map(Array1::from)
    }
}

pub const SCHEMA_VERSION: u32 = 1;

/// FF missing-data markers.
const SENTINELS: [f64; 2] = [-99.99, -999.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    /// Cell values are percentages (FF convention); divided by 100 on load.
    Percent,
    Fraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    Reject,
    DropRow,
}

/// Where the risk-free series comes from, if returns need converting to
/// excess returns. The optimizer always assumes its input is already excess
/// of the risk-free rate.
#[derive(Debug, Clone, PartialEq)]
pub enum RiskFree {
    None,
    /// A column of the main CSV (consumed, not treated as an asset).
    Column(String),
    /// A separate CSV whose period labels align 1:1 with the returns.
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub unit: Unit,
    pub riskfree: RiskFree,
    /// Name or zero-based index of the date column.
    pub date_column: Option<String>,
    pub missing_policy: MissingPolicy,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            unit: Unit::Percent,
            riskfree: RiskFree::None,
            date_column: None,
            missing_policy: MissingPolicy::Reject,
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        row: 0,
        col: String::new(),
        message: source.to_string(),
    }
}

fn resolve_column(headers: &[String], wanted: &str, path: &Path) -> Result<usize> {
    if let Ok(idx) = wanted.parse::<usize>() {
        if idx < headers.len() {
            return Ok(idx);
        }
        return Err(Error::Parse {
            path: path.display().to_string(),
            row: 0,
            col: wanted.to_string(),
            message: format!("column index out of range (header has {})", headers.len()),
        });
    }
    headers
        .iter()
        .position(|h| h == wanted)
        .ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            row: 0,
            col: wanted.to_string(),
            message: "column not found in header".into(),
        })
}

struct RawTable {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(RawTable { headers, rows })
}

fn parse_cell(path: &Path, row: usize, col: &str, cell: &str) -> Result<f64> {
    let value: f64 = cell.parse().map_err(|_| Error::Parse {
        path: path.display().to_string(),
        row,
        col: col.to_string(),
        message: format!("cannot parse {cell:?} as a number"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            row,
            col: col.to_string(),
            message: format!("non-finite value {cell:?}"),
        });
    }
    Ok(value)
}

fn load_riskfree_file(path: &Path, unit: Unit) -> Result<(Option<Vec<String>>, Vec<f64>)> {
    let table = read_table(path)?;
    if table.headers.is_empty() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            row: 0,
            col: String::new(),
            message: "empty header".into(),
        });
    }
    let value_col = table.headers.len() - 1;
    let labelled = table.headers.len() >= 2;
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        if labelled {
            labels.push(row[0].clone());
        }
        let mut v = parse_cell(path, i + 1, &table.headers[value_col], &row[value_col])?;
        if unit == Unit::Percent {
            v /= 100.0;
        }
        values.push(v);
    }
    Ok((labelled.then_some(labels), values))
}

/// Loads a rectangular returns CSV. Percent values are divided by 100, a
/// risk-free series (column or file) is subtracted per period from every
/// asset, and FF missing-data sentinels (-99.99, -999) are rejected or
/// dropped per the configured policy.
pub fn load_returns_csv(path: &Path, opts: &LoadOptions) -> Result<ReturnsMatrix> {
    let table = read_table(path)?;
    let date_idx = match &opts.date_column {
        Some(c) => Some(resolve_column(&table.headers, c, path)?),
        None => None,
    };
    let rf_idx = match &opts.riskfree {
        RiskFree::Column(c) => Some(resolve_column(&table.headers, c, path)?),
        _ => None,
    };
    if date_idx.is_some() && date_idx == rf_idx {
        return Err(Error::InvalidArgument(
            "date column and risk-free column coincide".into(),
        ));
    }
    let asset_cols: Vec<usize> = (0..table.headers.len())
        .filter(|i| Some(*i) != date_idx && Some(*i) != rf_idx)
        .collect();
    if asset_cols.is_empty() {
        return Err(Error::Dimension("no asset columns left".into()));
    }

    let mut dates: Option<Vec<String>> = date_idx.map(|_| Vec::new());
    let mut rf_inline: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut keep: Vec<bool> = Vec::new();

    for (i, row) in table.rows.iter().enumerate() {
        let row_no = i + 1;
        if row.len() != table.headers.len() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                row: row_no,
                col: String::new(),
                message: format!(
                    "row has {} fields, header has {}",
                    row.len(),
                    table.headers.len()
                ),
            });
        }
        let mut parsed = Vec::with_capacity(asset_cols.len());
        let mut missing = false;
        for &c in &asset_cols {
            let raw = parse_cell(path, row_no, &table.headers[c], &row[c])?;
            if SENTINELS.contains(&raw) {
                match opts.missing_policy {
                    MissingPolicy::Reject => {
                        return Err(Error::MissingData {
                            path: path.display().to_string(),
                            row: row_no,
                            col: table.headers[c].clone(),
                            value: raw,
                        });
                    }
                    MissingPolicy::DropRow => missing = true,
                }
            }
            parsed.push(match opts.unit {
                Unit::Percent => raw / 100.0,
                Unit::Fraction => raw,
            });
        }
        if let Some(idx) = rf_idx {
            let raw = parse_cell(path, row_no, &table.headers[idx], &row[idx])?;
            rf_inline.push(match opts.unit {
                Unit::Percent => raw / 100.0,
                Unit::Fraction => raw,
            });
        }
        if let (Some(ds), Some(idx)) = (&mut dates, date_idx) {
            ds.push(row[idx].clone());
        }
        rows.push(parsed);
        keep.push(!missing);
    }

    // risk-free subtraction happens before rows are dropped so alignment is
    // checked against the file as it was read
    let rf_series: Option<Vec<f64>> = match &opts.riskfree {
        RiskFree::None => None,
        RiskFree::Column(_) => Some(rf_inline),
        RiskFree::File(rf_path) => {
            let (rf_labels, rf_values) = load_riskfree_file(rf_path, opts.unit)?;
            if rf_values.len() != rows.len() {
                return Err(Error::Alignment(format!(
                    "risk-free series has {} periods, returns have {}",
                    rf_values.len(),
                    rows.len()
                )));
            }
            if let (Some(labels), Some(ds)) = (&rf_labels, &dates) {
                if labels != ds {
                    let k = labels.iter().zip(ds).position(|(a, b)| a != b).unwrap_or(0);
                    return Err(Error::Alignment(format!(
                        "period label mismatch at row {}: {:?} vs {:?}",
                        k + 1,
                        labels[k],
                        ds[k]
                    )));
                }
            }
            Some(rf_values)
        }
    };
    if let Some(rf) = &rf_series {
        for (row, &r) in rows.iter_mut().zip(rf) {
            for v in row.iter_mut() {
                *v -= r;
            }
        }
    }

    let kept: Vec<usize> = (0..rows.len()).filter(|&i| keep[i]).collect();
    let n = asset_cols.len();
    let mut values = Array2::zeros((kept.len(), n));
    for (out, &i) in kept.iter().enumerate() {
        for j in 0..n {
            values[[out, j]] = rows[i][j];
        }
    }
    let dates = dates.map(|ds| kept.iter().map(|&i| ds[i].clone()).collect());
    let names: Vec<String> = asset_cols
        .iter()
        .map(|&c| table.headers[c].clone())
        .collect();
    ReturnsMatrix::with_labels(values, dates, Some(names))
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    report: &'a T,
}

/// JSON text of a report with the top-level `schema_version` field.
/// Field order follows struct declaration order; floats use the shortest
/// representation that round-trips bit-exactly.
pub fn report_to_json_string<T: Serialize>(report: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Versioned {
        schema_version: SCHEMA_VERSION,
        report,
    })
    .map_err(|e| Error::Json {
        path: "<memory>".into(),
        source: e,
    })?;
    s.push('\n');
    Ok(s)
}

pub fn write_json_report<T: Serialize>(report: &T, path: &Path) -> Result<()> {
    let body = report_to_json_string(report)?;
    fs::write(path, body).map_err(|e| io_err(path, e))
}

/// Reads back a JSON report, checking the schema version.
pub fn read_json_report<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let body = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&body).map_err(|e| Error::Json {
        path: path.display().to_string(),
        source: e,
    })?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => return Err(Error::SchemaVersion(v as u32)),
        None => return Err(Error::SchemaVersion(0)),
    }
    T::deserialize(value).map_err(|e| Error::Json {
        path: path.display().to_string(),
        source: e,
    })
}

struct CsvBuf {
    writer: csv::Writer<Vec<u8>>,
}

impl CsvBuf {
    fn new() -> Self {
        Self {
            writer: csv::WriterBuilder::new()
                .flexible(true)
                .from_writer(Vec::new()),
        }
    }

    fn row<S: AsRef<[u8]>>(&mut self, record: &[S]) -> Result<()> {
        self.writer.write_record(record).map_err(|e| Error::Parse {
            path: "<memory>".into(),
            row: 0,
            col: String::new(),
            message: e.to_string(),
        })
    }

    fn finish(self) -> Result<String> {
        let bytes = self.writer.into_inner().map_err(|e| Error::Parse {
            path: "<memory>".into(),
            row: 0,
            col: String::new(),
            message: e.to_string(),
        })?;
        String::from_utf8(bytes).map_err(|e| Error::Parse {
            path: "<memory>".into(),
            row: 0,
            col: String::new(),
            message: e.to_string(),
        })
    }
}

fn fnum(x: f64) -> String {
    format!("{x}")
}

fn enum_tag<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value)
        .unwrap_or_default()
        .trim_matches('"')
        .to_string()
}

/// Per-asset rows (index, raw solution, weight) followed by a summary block.
pub fn solve_csv_string(result: &SolveResult) -> Result<String> {
    let mut head = CsvBuf::new();
    head.row(&["asset", "v_star", "weight"])?;
    let weights = result.portfolio.weights();
    for i in 0..result.v_star.len() {
        head.row(&[i.to_string(), fnum(result.v_star[i]), fnum(weights[i])])?;
    }
    let mut w = CsvBuf::new();
    w.row(&["metric", "value"])?;
    w.row(&["iterations".to_string(), result.iterations.to_string()])?;
    w.row(&["converged".to_string(), result.converged.to_string()])?;
    w.row(&[
        "fixed_point_residual".to_string(),
        fnum(result.fixed_point_residual),
    ])?;
    w.row(&[
        "certificate".to_string(),
        enum_tag(&result.certificate.kind),
    ])?;
    w.row(&[
        "gradient_margin".to_string(),
        result
            .certificate
            .gradient_margin
            .map(fnum)
            .unwrap_or_default(),
    ])?;
    w.row(&[
        "sharpe".to_string(),
        result.sharpe.map(fnum).unwrap_or_default(),
    ])?;
    Ok(format!("{}\n{}", head.finish()?, w.finish()?))
}

pub fn write_solve_csv(result: &SolveResult, path: &Path) -> Result<()> {
    let body = solve_csv_string(result)?;
    fs::write(path, body).map_err(|e| io_err(path, e))
}

/// One row per out-of-sample period (date, return, support size) followed by
/// a summary block.
pub fn backtest_csv_string(result: &BacktestResult) -> Result<String> {
    let mut head = CsvBuf::new();
    head.row(&["date", "return", "support_size"])?;
    for (i, r) in result.portfolio_returns.iter().enumerate() {
        let date = match &result.dates {
            Some(d) => d[i].clone(),
            None => (i + 1).to_string(),
        };
        head.row(&[
            date,
            fnum(*r),
            result.weights_by_period[i].support_size().to_string(),
        ])?;
    }
    let mut w = CsvBuf::new();
    w.row(&["metric", "value"])?;
    w.row(&[
        "test_sharpe".to_string(),
        result.test_sharpe.map(fnum).unwrap_or_default(),
    ])?;
    w.row(&[
        "cumulative_wealth".to_string(),
        fnum(result.cumulative_wealth),
    ])?;
    for (nu, wealth) in &result.wealth_by_cost_rate {
        w.row(&[format!("wealth_at_cost_rate_{nu}"), fnum(*wealth)])?;
    }
    w.row(&["sparsity_mean".to_string(), fnum(result.sparsity_mean)])?;
    w.row(&["sparsity_std".to_string(), fnum(result.sparsity_std)])?;
    w.row(&[
        "certificates_global_by_cardinality".to_string(),
        result.certificates.global_by_cardinality.to_string(),
    ])?;
    w.row(&[
        "certificates_global_by_gradient".to_string(),
        result.certificates.global_by_gradient.to_string(),
    ])?;
    w.row(&[
        "certificates_local_only".to_string(),
        result.certificates.local_only.to_string(),
    ])?;
    w.row(&[
        "certificates_zero_portfolio".to_string(),
        result.certificates.zero_portfolio.to_string(),
    ])?;
    Ok(format!("{}\n{}", head.finish()?, w.finish()?))
}

pub fn write_backtest_csv(result: &BacktestResult, path: &Path) -> Result<()> {
    let body = backtest_csv_string(result)?;
    fs::write(path, body).map_err(|e| io_err(path, e))
}

/// Plot-ready (cost rate, final wealth) pairs for cost-sensitivity figures.
pub fn cost_curve_csv_string(pairs: &[(f64, f64)]) -> Result<String> {
    let mut w = CsvBuf::new();
    w.row(&["cost_rate", "final_wealth"])?;
    for (nu, wealth) in pairs {
        w.row(&[fnum(*nu), fnum(*wealth)])?;
    }
    w.finish()
}

pub fn write_cost_curve_csv(pairs: &[(f64, f64)], path: &Path) -> Result<()> {
    let body = cost_curve_csv_string(pairs)?;
    fs::write(path, body).map_err(|e| io_err(path, e))
}

/// Aggregate block, plus one row per (trial, init) when records were kept.
pub fn sim_csv_string(report: &SimReport) -> Result<String> {
    let mut w = CsvBuf::new();
    w.row(&["metric", "value"])?;
    w.row(&["trials".to_string(), report.trials.to_string()])?;
    w.row(&[
        "success_count".to_string(),
        report.success_count.to_string(),
    ])?;
    w.row(&[
        "success_fraction".to_string(),
        fnum(report.success_fraction),
    ])?;
    for (i, c) in report.per_init_success.iter().enumerate() {
        w.row(&[format!("success_count_init_{i}"), c.to_string()])?;
    }
    w.row(&[
        "decrease_violations".to_string(),
        report.decrease_violations.to_string(),
    ])?;
    w.row(&[
        "boundedness_violations".to_string(),
        report.boundedness_violations.to_string(),
    ])?;
    let head = w;
    let mut w = CsvBuf::new();
    if let Some(records) = &report.records {
        w.row(&[
            "trial",
            "oracle_objective",
            "trial_success",
            "init",
            "v_error",
            "f_error",
            "objective",
            "certificate",
        ])?;
        for trial in records {
            for run in &trial.inits {
                w.row(&[
                    trial.trial.to_string(),
                    fnum(trial.oracle_objective),
                    trial.success.to_string(),
                    enum_tag(&run.init),
                    fnum(run.v_error),
                    fnum(run.f_error),
                    fnum(run.objective),
                    enum_tag(&run.certificate.kind),
                ])?;
            }
        }
    } else {
        return head.finish();
    }
    Ok(format!("{}\n{}", head.finish()?, w.finish()?))
}

pub fn write_sim_csv(report: &SimReport, path: &Path) -> Result<()> {
    let body = sim_csv_string(report)?;
    fs::write(path, body).map_err(|e| io_err(path, e))
}

/// Writes raw text with path-contextualized errors (JSON to stdout paths).
pub fn write_text(body: &str, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| io_err(path, e))
}
