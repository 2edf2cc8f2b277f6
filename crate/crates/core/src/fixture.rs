//! Published per-task results, ingested as validated fixture data.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{self, CsvTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperResultsRow {
    pub task: String,
    pub end_to_end: f64,
    pub milestone_mean: f64,
    pub milestone_q975: f64,
    pub expert_bon: f64,
    pub outcome_grading: f64,
    pub model: String,
}

impl PaperResultsRow {
    /// Range and ordering checks; `row` is the 1-based data row.
    pub fn validate(&self, row: usize) -> Result<()> {
        let fields = [
            ("end_to_end", self.end_to_end),
            ("milestone_mean", self.milestone_mean),
            ("milestone_q975", self.milestone_q975),
            ("expert_bon", self.expert_bon),
            ("outcome_grading", self.outcome_grading),
        ];
        for (column, value) in fields {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Table {
                    row,
                    column: column.into(),
                    reason: format!("{value} is outside [0, 1]"),
                });
            }
        }
        if self.milestone_mean > self.milestone_q975 {
            return Err(Error::Table {
                row,
                column: "milestone_q975".into(),
                reason: format!(
                    "97.5% quantile {} is below the mean {}",
                    self.milestone_q975, self.milestone_mean
                ),
            });
        }
        if self.task.is_empty() {
            return Err(Error::Table {
                row,
                column: "task".into(),
                reason: "empty task name".into(),
            });
        }
        Ok(())
    }
}

impl CsvTable for PaperResultsRow {
    const HEADER: &'static [&'static str] = &[
        "task",
        "end_to_end",
        "milestone_mean",
        "milestone_q975",
        "expert_bon",
        "outcome_grading",
        "model",
    ];

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.task.clone(),
            report::fmt_f64(self.end_to_end),
            report::fmt_f64(self.milestone_mean),
            report::fmt_f64(self.milestone_q975),
            report::fmt_f64(self.expert_bon),
            report::fmt_f64(self.outcome_grading),
            self.model.clone(),
        ]
    }

    fn from_fields(row: usize, f: &report::Fields<'_>) -> Result<Self> {
        let parsed = Self {
            task: f.string(0),
            end_to_end: f.f64(row, 1)?,
            milestone_mean: f.f64(row, 2)?,
            milestone_q975: f.f64(row, 3)?,
            expert_bon: f.f64(row, 4)?,
            outcome_grading: f.f64(row, 5)?,
            model: f.string(6),
        };
        parsed.validate(row)?;
        Ok(parsed)
    }
}

/// Parses and validates a results table from any reader.
pub fn parse_paper_table<R: Read>(reader: R) -> Result<Vec<PaperResultsRow>> {
    report::read_csv(reader)
}

/// Reads and validates the results table at `path`.
pub fn ingest_paper_table(path: impl AsRef<Path>) -> Result<Vec<PaperResultsRow>> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_paper_table(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "task,end_to_end,milestone_mean,milestone_q975,expert_bon,outcome_grading,model\n";

    #[test]
    fn parses_rows() {
        let text = format!("{HEADER}scavenger_hunt,0.460,0.392,0.477,0.004,0.790,gpt-4o\n");
        let rows = parse_paper_table(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].milestone_mean, 0.392);
        assert_eq!(rows[0].model, "gpt-4o");
    }

    #[test]
    fn mean_above_quantile_is_rejected() {
        let text = format!("{HEADER}x,0.5,0.6,0.5,0.1,0.5,m\n");
        let err = parse_paper_table(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Table { row: 1, .. }), "{err}");
    }

    #[test]
    fn bad_number_names_row_and_column() {
        let text = format!("{HEADER}a,0.1,0.1,0.2,0.0,0.2,m\nb,0.1,zero,0.2,0.0,0.2,m\n");
        match parse_paper_table(text.as_bytes()).unwrap_err() {
            Error::Table { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "milestone_mean");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_column_is_rejected() {
        let text = "task,end_to_end,milestone_mean,milestone_q975,expert_bon,model\na,0.1,0.1,0.2,0.0,m\n";
        assert!(matches!(
            parse_paper_table(text.as_bytes()),
            Err(Error::Table { row: 0, .. })
        ));
    }

    #[test]
    fn out_of_range_is_rejected() {
        let text = format!("{HEADER}a,1.2,0.1,0.2,0.0,0.2,m\n");
        assert!(parse_paper_table(text.as_bytes()).is_err());
    }
}
