//! Evaluation reports: JSON for machines, aligned text tables for people.
//!
//! JSON keys (stable):
//!
//! ```text
//! variant, score, seed,
//! id: { accuracy, ece, nll, brier } | null,
//! ood: [ { dataset, auroc, aupr, fpr95, detection_accuracy } ],
//! average_auroc: number | null
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{IdEval, OodEval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEval {
    pub dataset: String,
    #[serde(flatten)]
    pub eval: OodEval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    pub score: String,
    pub seed: u64,
    pub id: Option<IdEval>,
    pub ood: Vec<DatasetEval>,
    /// Arithmetic mean of the per-dataset AUROCs; absent with no OOD sets.
    pub average_auroc: Option<f64>,
}

impl EvalReport {
    pub fn new(
        variant: impl Into<String>,
        score: impl Into<String>,
        seed: u64,
        id: Option<IdEval>,
        ood: Vec<DatasetEval>,
    ) -> Self {
        let average_auroc = mean_auroc(&ood);
        Self { variant: variant.into(), score: score.into(), seed, id, ood, average_auroc }
    }

    pub fn check_consistency(&self) -> Result<()> {
        let expected = mean_auroc(&self.ood);
        let ok = match (expected, self.average_auroc) {
            (None, None) => true,
            (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invariant("average_auroc", "does not equal the mean of per-dataset AUROCs"))
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invariant("report", e.to_string()))
    }

    /// Row label → value, in table order.
    pub fn rows(&self) -> Vec<(String, Option<f64>)> {
        let mut rows = Vec::new();
        let id = self.id.as_ref();
        rows.push(("ID Acc".to_string(), id.map(|e| e.accuracy)));
        rows.push(("ID ECE".to_string(), id.map(|e| e.ece)));
        rows.push(("ID NLL".to_string(), id.map(|e| e.nll)));
        rows.push(("ID Brier".to_string(), id.map(|e| e.brier)));
        for d in &self.ood {
            rows.push((format!("{} AUROC", d.dataset), Some(d.eval.auroc)));
        }
        rows.push(("Avg OOD AUROC".to_string(), self.average_auroc));
        for d in &self.ood {
            rows.push((format!("{} AUPR", d.dataset), Some(d.eval.aupr)));
            rows.push((format!("{} FPR95", d.dataset), Some(d.eval.fpr95)));
            rows.push((format!("{} DetAcc", d.dataset), Some(d.eval.detection_accuracy)));
        }
        rows
    }
}

fn mean_auroc(ood: &[DatasetEval]) -> Option<f64> {
    if ood.is_empty() {
        None
    } else {
        Some(ood.iter().map(|d| d.eval.auroc).sum::<f64>() / ood.len() as f64)
    }
}

fn fmt_cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "—".to_string(),
    }
}

fn render(header: &[String], body: &[Vec<String>]) -> String {
    let ncols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            let pad = widths[i] - c.chars().count();
            if i == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    let rule: usize = widths.iter().sum::<usize>() + 2 * (ncols - 1);
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    for row in body {
        out.push_str(&line(row));
    }
    out
}

/// Metrics as rows, one column per report.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut labels: Vec<String> = Vec::new();
    for r in reports {
        for (label, _) in r.rows() {
            if !labels.contains(&label) {
                labels.push(label);
            }
        }
    }
    let mut header = vec!["Metric".to_string()];
    header.extend(reports.iter().map(|r| r.variant.clone()));
    let body: Vec<Vec<String>> = labels
        .iter()
        .map(|label| {
            let mut row = vec![label.clone()];
            for r in reports {
                let v = r.rows().into_iter().find(|(l, _)| l == label).and_then(|(_, v)| v);
                row.push(fmt_cell(v));
            }
            row
        })
        .collect();
    render(&header, &body)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation (divisor n − 1); 0 for a single run.
    pub std: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seeds: Vec<u64>,
    pub rows: Vec<SummaryRow>,
}

pub fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl SeedSummary {
    pub fn from_reports(reports: &[EvalReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::EmptyInput("seed reports"));
        }
        let mut rows = Vec::new();
        for (label, _) in reports[0].rows() {
            let values: Option<Vec<f64>> = reports
                .iter()
                .map(|r| r.rows().into_iter().find(|(l, _)| *l == label).and_then(|(_, v)| v))
                .collect();
            if let Some(values) = values {
                let (mean, std) = mean_and_sample_std(&values);
                rows.push(SummaryRow { metric: label, mean, std, values });
            }
        }
        Ok(Self { seeds: reports.iter().map(|r| r.seed).collect(), rows })
    }

    pub fn row(&self, metric: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serialises");
        s.push('\n');
        s
    }

    pub fn render_table(&self) -> String {
        let header = vec!["Metric".to_string(), "Mean".to_string(), "Std".to_string()];
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| vec![r.metric.clone(), format!("{:.4}", r.mean), format!("{:.4}", r.std)])
            .collect();
        render(&header, &body)
    }
}
