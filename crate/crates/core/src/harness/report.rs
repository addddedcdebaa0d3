use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{auc, confusion, mean_bce, precision_recall_f1, MetricError, THRESHOLD};

/// Metrics of one (subject, repeat) evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub subject_id: String,
    pub repeat_idx: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub auc: f64,
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Precision, recall or F1 had a zero denominator.
    pub degenerate: bool,
    /// The model predicted a single class for the whole test subject.
    pub collapsed: bool,
}

impl MetricsReport {
    pub fn evaluate(subject_id: &str, repeat_idx: usize, preds: &[f64], labels: &[u8]) -> Result<Self, MetricError> {
        let c = confusion(preds, labels, THRESHOLD)?;
        let prf = precision_recall_f1(c);
        Ok(MetricsReport {
            subject_id: subject_id.to_string(),
            repeat_idx,
            loss: mean_bce(preds, labels)?,
            accuracy: c.accuracy(),
            auc: auc(preds, labels)?,
            tp: c.tp,
            tn: c.tn,
            fp: c.fp,
            fn_: c.fn_,
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            degenerate: prf.degenerate,
            collapsed: c.tp + c.fp == 0 || c.tn + c.fn_ == 0,
        })
    }

    pub fn row(&self) -> MetricRow {
        MetricRow {
            loss: self.loss,
            accuracy: self.accuracy,
            auc: self.auc,
            tp: self.tp as f64,
            tn: self.tn as f64,
            fp: self.fp as f64,
            fn_: self.fn_ as f64,
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
        }
    }
}

/// The ten table columns, as (possibly averaged) reals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub loss: f64,
    pub accuracy: f64,
    pub auc: f64,
    pub tp: f64,
    pub tn: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricRow {
    pub const COLUMNS: [&'static str; 10] = ["loss", "accuracy", "auc", "tp", "tn", "fp", "fn", "precision", "recall", "f1"];

    pub fn values(&self) -> [f64; 10] {
        [
            self.loss,
            self.accuracy,
            self.auc,
            self.tp,
            self.tn,
            self.fp,
            self.fn_,
            self.precision,
            self.recall,
            self.f1,
        ]
    }

    fn from_values(v: [f64; 10]) -> Self {
        MetricRow {
            loss: v[0],
            accuracy: v[1],
            auc: v[2],
            tp: v[3],
            tn: v[4],
            fp: v[5],
            fn_: v[6],
            precision: v[7],
            recall: v[8],
            f1: v[9],
        }
    }

    /// Arithmetic mean, column by column. `None` for an empty input.
    pub fn mean<'a>(rows: impl IntoIterator<Item = &'a MetricRow>) -> Option<MetricRow> {
        let mut sum = [0.0; 10];
        let mut n = 0usize;
        for r in rows {
            sum.iter_mut().zip(r.values()).for_each(|(s, v)| *s += v);
            n += 1;
        }
        (n > 0).then(|| MetricRow::from_values(sum.map(|s| s / n as f64)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectRow {
    pub subject_id: String,
    pub runs: usize,
    pub collapsed_runs: usize,
    pub means: MetricRow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub repeats: usize,
    /// One row per subject, in order of first appearance.
    pub rows: Vec<SubjectRow>,
    /// Mean of the subject rows.
    pub mean: MetricRow,
    /// Every underlying report, sorted by repeat then subject order.
    pub reports: Vec<MetricsReport>,
}

impl AggregateTable {
    pub fn from_reports(reports: Vec<MetricsReport>, repeats: usize) -> Self {
        let mut order: Vec<String> = Vec::new();
        for r in &reports {
            if !order.contains(&r.subject_id) {
                order.push(r.subject_id.clone());
            }
        }
        let rows: Vec<SubjectRow> = order
            .into_iter()
            .map(|subject_id| {
                let mine: Vec<&MetricsReport> = reports.iter().filter(|r| r.subject_id == subject_id).collect();
                let rows: Vec<MetricRow> = mine.iter().map(|r| r.row()).collect();
                SubjectRow {
                    runs: mine.len(),
                    collapsed_runs: mine.iter().filter(|r| r.collapsed).count(),
                    means: MetricRow::mean(&rows).expect("subject has at least one report"),
                    subject_id,
                }
            })
            .collect();
        let mean = MetricRow::mean(rows.iter().map(|r| &r.means)).unwrap_or_default();
        AggregateTable { repeats, rows, mean, reports }
    }

    pub fn collapsed_runs(&self) -> usize {
        self.reports.iter().filter(|r| r.collapsed).count()
    }

    /// `# key = value` metadata lines, the column header, one row per
    /// subject and a final `MEAN` row.
    pub fn to_csv(&self, metadata: &[(String, String)]) -> String {
        let mut out = String::new();
        for (k, v) in metadata {
            let _ = writeln!(out, "# {k} = {v}");
        }
        let _ = writeln!(out, "# repeats = {}", self.repeats);
        let _ = writeln!(out, "# collapsed_runs = {}", self.collapsed_runs());
        let _ = writeln!(out, "subject,{}", MetricRow::COLUMNS.join(","));
        let line = |out: &mut String, name: &str, row: &MetricRow| {
            let cells: Vec<String> = row.values().iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{name},{}", cells.join(","));
        };
        for r in &self.rows {
            line(&mut out, &r.subject_id, &r.means);
        }
        line(&mut out, "MEAN", &self.mean);
        out
    }
}

/// Parses the table part of [`AggregateTable::to_csv`] output into
/// `(subject, row)` pairs; the last pair is the `MEAN` row.
pub fn parse_report_csv(text: &str) -> Result<Vec<(String, MetricRow)>, String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or("missing header")?;
    let expected = format!("subject,{}", MetricRow::COLUMNS.join(","));
    if header != expected {
        return Err(format!("unexpected header {header:?}"));
    }
    lines
        .map(|l| {
            let mut cells = l.split(',');
            let name = cells.next().unwrap_or_default().to_string();
            let vals: Vec<f64> = cells
                .map(|c| c.parse::<f64>().map_err(|e| format!("{c:?}: {e}")))
                .collect::<Result<_, _>>()?;
            let vals: [f64; 10] = vals.try_into().map_err(|v: Vec<f64>| format!("{} values in row {name}", v.len()))?;
            Ok((name, MetricRow::from_values(vals)))
        })
        .collect()
}
