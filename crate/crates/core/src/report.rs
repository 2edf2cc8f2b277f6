//! CSV and JSON output.
//!
//! Every CSV table has a fixed header and prints numbers with six decimals,
//! and every table can be read back through [`read_csv`].

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimateReport, Method};
use crate::harness::{BonBiasRow, CalibrationRow, ReplicationSummary, TrivialStepReport};
use crate::stats::VarianceBreakdown;
use crate::task_model::GradingRegime;

/// A row type with a fixed CSV layout.
pub trait CsvTable: Sized {
    const HEADER: &'static [&'static str];

    fn to_fields(&self) -> Vec<String>;

    /// Parses one data row; `row` is 1-based and used in error messages.
    fn from_fields(row: usize, fields: &Fields<'_>) -> Result<Self>;
}

/// Six decimals, without a negative sign on zero.
pub fn fmt_f64(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn fmt_bool(b: bool) -> String {
    b.to_string()
}

fn fmt_opt_bool(b: Option<bool>) -> String {
    b.map(fmt_bool).unwrap_or_default()
}

/// Borrowed view of one CSV record with typed accessors.
pub struct Fields<'a> {
    record: &'a csv::StringRecord,
    header: &'static [&'static str],
}

impl Fields<'_> {
    fn raw(&self, i: usize) -> &str {
        self.record.get(i).unwrap_or("").trim()
    }

    fn err(&self, row: usize, i: usize, reason: String) -> Error {
        Error::Table {
            row,
            column: self.header[i].to_string(),
            reason,
        }
    }

    pub fn string(&self, i: usize) -> String {
        self.raw(i).to_string()
    }

    pub fn f64(&self, row: usize, i: usize) -> Result<f64> {
        let s = self.raw(i);
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(row, i, format!("`{s}` is not a number")))
    }

    pub fn opt_f64(&self, row: usize, i: usize) -> Result<Option<f64>> {
        if self.raw(i).is_empty() {
            Ok(None)
        } else {
            self.f64(row, i).map(Some)
        }
    }

    pub fn parse<T: std::str::FromStr>(&self, row: usize, i: usize) -> Result<T> {
        let s = self.raw(i);
        s.parse::<T>()
            .map_err(|_| self.err(row, i, format!("cannot parse `{s}`")))
    }

    pub fn opt_parse<T: std::str::FromStr>(&self, row: usize, i: usize) -> Result<Option<T>> {
        if self.raw(i).is_empty() {
            Ok(None)
        } else {
            self.parse(row, i).map(Some)
        }
    }
}

pub fn write_csv<T: CsvTable, W: Write>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(T::HEADER)?;
    for row in rows {
        w.write_record(row.to_fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string<T: CsvTable>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn read_csv<T: CsvTable, R: Read>(reader: R) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = r.headers()?.clone();
    for (i, expected) in T::HEADER.iter().enumerate() {
        match headers.get(i).map(str::trim) {
            Some(h) if h == *expected => {}
            Some(h) => {
                return Err(Error::Table {
                    row: 0,
                    column: (*expected).to_string(),
                    reason: format!("header has `{h}` in this position"),
                })
            }
            None => {
                return Err(Error::Table {
                    row: 0,
                    column: (*expected).to_string(),
                    reason: "missing column".into(),
                })
            }
        }
    }
    if headers.len() != T::HEADER.len() {
        return Err(Error::Table {
            row: 0,
            column: headers.get(T::HEADER.len()).unwrap_or("").to_string(),
            reason: "unexpected extra column".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != T::HEADER.len() {
            return Err(Error::Table {
                row,
                column: T::HEADER[record.len().min(T::HEADER.len() - 1)].to_string(),
                reason: format!("expected {} fields, found {}", T::HEADER.len(), record.len()),
            });
        }
        let fields = Fields {
            record: &record,
            header: T::HEADER,
        };
        rows.push(T::from_fields(row, &fields)?);
    }
    Ok(rows)
}

/// JSON document, pretty-printed with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// An estimate as serialized in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub method: Method,
    pub point_estimate: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub samples: Vec<usize>,
    pub seed: u64,
    pub excluded: usize,
}

impl From<&EstimateReport> for EstimateRecord {
    fn from(r: &EstimateReport) -> Self {
        Self {
            method: r.method,
            point_estimate: r.point_estimate,
            ci_low: r.interval.map(|(lo, _)| lo),
            ci_high: r.interval.map(|(_, hi)| hi),
            samples: r.samples_used.clone(),
            seed: r.master_seed,
            excluded: r.excluded_rollouts,
        }
    }
}

/// One row of the estimate CSV: the task name plus its [`EstimateRecord`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub name: String,
    pub record: EstimateRecord,
}

impl From<&EstimateReport> for EstimateRow {
    fn from(r: &EstimateReport) -> Self {
        Self {
            name: r.task.clone(),
            record: r.into(),
        }
    }
}

impl CsvTable for EstimateRow {
    const HEADER: &'static [&'static str] = &[
        "name", "method", "point", "ci_low", "ci_high", "samples", "seed", "excluded",
    ];

    fn to_fields(&self) -> Vec<String> {
        let r = &self.record;
        vec![
            self.name.clone(),
            r.method.to_string(),
            fmt_opt(r.point_estimate),
            fmt_opt(r.ci_low),
            fmt_opt(r.ci_high),
            r.samples.iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
            r.seed.to_string(),
            r.excluded.to_string(),
        ]
    }

    fn from_fields(row: usize, f: &Fields<'_>) -> Result<Self> {
        let samples = f
            .string(5)
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<usize>().map_err(|_| Error::Table {
                    row,
                    column: "samples".into(),
                    reason: format!("cannot parse `{s}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: f.string(0),
            record: EstimateRecord {
                method: f.parse(row, 1)?,
                point_estimate: f.opt_f64(row, 2)?,
                ci_low: f.opt_f64(row, 3)?,
                ci_high: f.opt_f64(row, 4)?,
                samples,
                seed: f.parse(row, 6)?,
                excluded: f.parse(row, 7)?,
            },
        })
    }
}

impl CsvTable for ReplicationSummary {
    const HEADER: &'static [&'static str] = &[
        "name",
        "method",
        "regime",
        "replications",
        "failed",
        "mean",
        "variance",
        "truth",
        "bias",
        "coverage",
    ];

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.task.clone(),
            self.method.to_string(),
            self.regime.map(|r| r.to_string()).unwrap_or_default(),
            self.replications.to_string(),
            self.failed_replications.to_string(),
            fmt_opt(self.mean_estimate),
            fmt_f64(self.empirical_variance),
            fmt_f64(self.oracle_truth),
            fmt_opt(self.bias),
            fmt_opt(self.ci_coverage),
        ]
    }

    fn from_fields(row: usize, f: &Fields<'_>) -> Result<Self> {
        Ok(Self {
            task: f.string(0),
            method: f.parse(row, 1)?,
            regime: f.opt_parse::<GradingRegime>(row, 2)?,
            replications: f.parse(row, 3)?,
            failed_replications: f.parse(row, 4)?,
            mean_estimate: f.opt_f64(row, 5)?,
            empirical_variance: f.f64(row, 6)?,
            oracle_truth: f.f64(row, 7)?,
            bias: f.opt_f64(row, 8)?,
            ci_coverage: f.opt_f64(row, 9)?,
        })
    }
}

impl CsvTable for CalibrationRow {
    const HEADER: &'static [&'static str] = &[
        "name",
        "idealized_truth",
        "outcome_truth",
        "milestone_mean",
        "milestone_q975",
        "idealized_above_q975",
        "outcome_above_q975",
        "coverage_idealized",
        "coverage_outcome",
    ];

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.task.clone(),
            fmt_f64(self.idealized_truth),
            fmt_f64(self.outcome_truth),
            fmt_f64(self.milestone_mean),
            fmt_f64(self.milestone_q975),
            fmt_f64(self.idealized_above_q975),
            fmt_f64(self.outcome_above_q975),
            fmt_opt(self.coverage_idealized),
            fmt_opt(self.coverage_outcome),
        ]
    }

    fn from_fields(row: usize, f: &Fields<'_>) -> Result<Self> {
        Ok(Self {
            task: f.string(0),
            idealized_truth: f.f64(row, 1)?,
            outcome_truth: f.f64(row, 2)?,
            milestone_mean: f.f64(row, 3)?,
            milestone_q975: f.f64(row, 4)?,
            idealized_above_q975: f.f64(row, 5)?,
            outcome_above_q975: f.f64(row, 6)?,
            coverage_idealized: f.opt_f64(row, 7)?,
            coverage_outcome: f.opt_f64(row, 8)?,
        })
    }
}

impl CsvTable for BonBiasRow {
    const HEADER: &'static [&'static str] = &[
        "name",
        "truth",
        "expected_bon",
        "bon_mean",
        "corrected_mean",
        "underestimates",
    ];

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.task.clone(),
            fmt_f64(self.truth),
            fmt_opt(self.expected_bon),
            fmt_opt(self.bon_mean),
            fmt_opt(self.corrected_mean),
            fmt_opt_bool(self.underestimates),
        ]
    }

    fn from_fields(row: usize, f: &Fields<'_>) -> Result<Self> {
        Ok(Self {
            task: f.string(0),
            truth: f.f64(row, 1)?,
            expected_bon: f.opt_f64(row, 2)?,
            bon_mean: f.opt_f64(row, 3)?,
            corrected_mean: f.opt_f64(row, 4)?,
            underestimates: f.opt_parse(row, 5)?,
        })
    }
}

/// The variance table: closed-form values per chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub name: String,
    pub v_end_to_end: f64,
    pub v_milestone: f64,
    pub holds: bool,
}

impl VarianceRow {
    /// The closed-form row and, when empirical variances are present, a
    /// second row named `<name>/empirical`.
    pub fn from_breakdown(b: &VarianceBreakdown) -> Vec<VarianceRow> {
        let mut rows = vec![VarianceRow {
            name: b.name.clone(),
            v_end_to_end: b.end_to_end_variance,
            v_milestone: b.milestone_variance,
            holds: b.inequality_holds,
        }];
        if let (Some(e), Some(m)) = (b.empirical_end_to_end, b.empirical_milestone) {
            rows.push(VarianceRow {
                name: format!("{}/empirical", b.name),
                v_end_to_end: e,
                v_milestone: m,
                holds: m <= e,
            });
        }
        rows
    }
}

impl CsvTable for VarianceRow {
    const HEADER: &'static [&'static str] = &["name", "v_end_to_end", "v_milestone", "holds"];

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.name.clone(),
            fmt_f64(self.v_end_to_end),
            fmt_f64(self.v_milestone),
            fmt_bool(self.holds),
        ]
    }

    fn from_fields(row: usize, f: &Fields<'_>) -> Result<Self> {
        Ok(Self {
            name: f.string(0),
            v_end_to_end: f.f64(row, 1)?,
            v_milestone: f.f64(row, 2)?,
            holds: f.parse(row, 3)?,
        })
    }
}

impl CsvTable for TrivialStepReport {
    const HEADER: &'static [&'static str] = &[
        "name",
        "extra_steps",
        "truth_base",
        "truth_extended",
        "bits_base",
        "bits_extended",
        "bon_base",
        "bon_extended",
        "bits_delta_exact",
    ];

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.task.clone(),
            self.extra_steps.to_string(),
            fmt_f64(self.truth_base),
            fmt_f64(self.truth_extended),
            fmt_opt(self.mean_bits_base),
            fmt_opt(self.mean_bits_extended),
            fmt_opt(self.bon_mean_base),
            fmt_opt(self.bon_mean_extended),
            fmt_bool(self.bits_delta_exact),
        ]
    }

    fn from_fields(row: usize, f: &Fields<'_>) -> Result<Self> {
        Ok(Self {
            task: f.string(0),
            extra_steps: f.parse(row, 1)?,
            truth_base: f.f64(row, 2)?,
            truth_extended: f.f64(row, 3)?,
            mean_bits_base: f.opt_f64(row, 4)?,
            mean_bits_extended: f.opt_f64(row, 5)?,
            bon_mean_base: f.opt_f64(row, 6)?,
            bon_mean_extended: f.opt_f64(row, 7)?,
            bits_delta_exact: f.parse(row, 8)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_decimals_and_no_negative_zero() {
        assert_eq!(fmt_f64(0.25), "0.250000");
        assert_eq!(fmt_f64(-0.0), "0.000000");
        assert_eq!(fmt_f64(-1e-9), "0.000000");
        assert_eq!(fmt_f64(1.0 / 3.0), "0.333333");
    }

    #[test]
    fn estimate_rows_round_trip() {
        let row = EstimateRow {
            name: "t".into(),
            record: EstimateRecord {
                method: Method::Milestone,
                point_estimate: Some(0.2),
                ci_low: Some(0.1),
                ci_high: Some(0.3),
                samples: vec![100, 100],
                seed: u64::MAX,
                excluded: 0,
            },
        };
        let absent = EstimateRow {
            name: "u".into(),
            record: EstimateRecord {
                method: Method::ExpertBon,
                point_estimate: None,
                ci_low: None,
                ci_high: None,
                samples: vec![3],
                seed: 1,
                excluded: 3,
            },
        };
        let text = to_csv_string(&[row.clone(), absent.clone()]).unwrap();
        assert!(text.starts_with("name,method,point,ci_low,ci_high,samples,seed,excluded\n"));
        let back: Vec<EstimateRow> = read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, vec![row, absent]);
    }

    #[test]
    fn header_mismatch_is_an_error() {
        let text = "name,v_end_to_end,v_milestone\nx,0.1,0.1\n";
        assert!(read_csv::<VarianceRow, _>(text.as_bytes()).is_err());
        let text = "name,v_end_to_end,v_milestone,holds,extra\nx,0.1,0.1,true,1\n";
        assert!(read_csv::<VarianceRow, _>(text.as_bytes()).is_err());
        let text = "name,v_end_to_end,v_milestone,holds\nx,0.1,0.1\n";
        assert!(matches!(
            read_csv::<VarianceRow, _>(text.as_bytes()),
            Err(Error::Table { row: 1, .. })
        ));
    }
}
