use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::{EvalReport, SweepAxis, TrainConfig};
use crate::{Error, Result};

/// Provenance lines written as `# key: value` comments at the top of
/// every CSV report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportHeader {
    pub seed: u64,
    pub dataset_hash: String,
    pub config: serde_json::Value,
}

impl ReportHeader {
    pub fn new(seed: u64, dataset_hash: impl Into<String>, config: &impl Serialize) -> Self {
        Self {
            seed,
            dataset_hash: dataset_hash.into(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
        }
    }

    fn write_comments(&self, out: &mut String) {
        let _ = writeln!(out, "# seed: {}", self.seed);
        let _ = writeln!(out, "# dataset_sha256: {}", self.dataset_hash);
        let _ = writeln!(out, "# config: {}", self.config);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub config: TrainConfig,
    pub final_loss: f64,
    pub report: EvalReport,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.6}"))
}

const COLUMNS: &str = "auc,ap,mrr,f1,train_epoch_s,test_s,latency_s,queries";

fn metric_cells(r: &EvalReport) -> String {
    format!(
        "{},{},{},{},{:.6},{:.6},{:.9},{}",
        opt(r.auc),
        opt(r.ap),
        opt(r.mrr),
        opt(r.f1),
        r.train_epoch_s,
        r.test_s,
        r.latency_s,
        r.queries
    )
}

impl EvalReport {
    /// One header row and one row per `(name, report)`.
    pub fn to_csv(header: &ReportHeader, rows: &[(&str, &EvalReport)]) -> String {
        let mut out = String::new();
        header.write_comments(&mut out);
        let _ = writeln!(out, "split,{COLUMNS}");
        for (name, r) in rows {
            let _ = writeln!(out, "{name},{}", metric_cells(r));
        }
        out
    }
}

impl SweepRow {
    pub fn to_csv(header: &ReportHeader, rows: &[SweepRow]) -> String {
        let mut out = String::new();
        header.write_comments(&mut out);
        let _ = writeln!(out, "axis,value,scheme,s,alpha,final_loss,{COLUMNS}");
        for r in rows {
            let c = &r.config.sampler;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6},{}",
                r.axis,
                r.value,
                c.scheme,
                c.slots,
                c.alpha,
                r.final_loss,
                metric_cells(&r.report)
            );
        }
        out
    }
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Fixed-width table of `(name, report)` rows for terminal output.
pub fn console_table(rows: &[(String, EvalReport)]) -> String {
    let w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    let mut out = format!(
        "{:<w$}  {:>8}  {:>8}  {:>8}  {:>8}  {:>10}  {:>10}  {:>12}\n",
        "run", "AUC", "AP", "MRR", "F1", "epoch s", "test s", "latency s"
    );
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{:<w$}  {:>8}  {:>8}  {:>8}  {:>8}  {:>10.3}  {:>10.3}  {:>12.6}",
            name,
            cell(r.auc),
            cell(r.ap),
            cell(r.mrr),
            cell(r.f1),
            r.train_epoch_s,
            r.test_s,
            r.latency_s
        );
    }
    out
}
