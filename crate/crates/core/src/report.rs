//! Per-step reports, the JSONL trace format and the metrics report schema.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// What one online step did: the sparse code, the routed column, the chosen
/// replacement slot, objective values at the committed dictionary, and
/// per-phase wall times.
#[derive(Debug, Clone)]
pub struct StepReport {
    /// Stream position after the step (1-based).
    pub t: u64,
    /// Updated column, 0-based.
    pub basis_index: usize,
    /// Winning candidate: 0 keeps the representative set, l >= 1 swapped the
    /// sample into slot l.
    pub candidate: usize,
    /// Quadratic surrogate part at the committed dictionary.
    pub surrogate: f64,
    /// Full surrogate value (quadratic part plus the tracked constant).
    pub g_hat: f64,
    pub alpha: Array1<f64>,
    pub ms_sparse_code: f64,
    pub ms_dict_update: f64,
}

impl StepReport {
    pub fn alpha_nnz(&self) -> usize {
        self.alpha.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn trace_record(&self, method: &str) -> TraceRecord {
        TraceRecord {
            t: self.t,
            i_t: self.basis_index + 1,
            l_star: self.candidate,
            surrogate: self.surrogate,
            g_hat: self.g_hat,
            alpha_nnz: self.alpha_nnz(),
            ms_sparse_code: self.ms_sparse_code,
            ms_dict_update: self.ms_dict_update,
            method: method.to_string(),
        }
    }
}

/// One JSONL line of the step trace. `i_t` is 1-based to match the report
/// convention of the trace consumers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: u64,
    pub i_t: usize,
    pub l_star: usize,
    pub surrogate: f64,
    pub g_hat: f64,
    pub alpha_nnz: usize,
    pub ms_sparse_code: f64,
    pub ms_dict_update: f64,
    pub method: String,
}

/// Serializes reports as one JSON object per line.
pub fn trace_to_jsonl(reports: &[StepReport], method: &str) -> Result<String> {
    let records: Vec<TraceRecord> = reports.iter().map(|r| r.trace_record(method)).collect();
    records_to_jsonl(&records)
}

/// Serializes already-built trace records as one JSON object per line.
pub fn records_to_jsonl(records: &[TraceRecord]) -> Result<String> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record)?);
        out.push('\n');
    }
    Ok(out)
}

/// The evaluation report: l2 approximation error, optional label-based
/// accuracy, optional distance to known generator means, optional surrogate
/// optimality gap, and the wall time of the evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub l2: f64,
    pub accuracy: Option<f64>,
    pub basis_recovery: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub wall_time_s: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn trace_line_has_schema_fields() {
        let report = StepReport {
            t: 3,
            basis_index: 1,
            candidate: 0,
            surrogate: -1.5,
            g_hat: 2.5,
            alpha: array![0.0, 0.7, 0.0],
            ms_sparse_code: 0.1,
            ms_dict_update: 0.9,
        };
        let line = trace_to_jsonl(&[report], "online-cvxmf-rr").unwrap();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(v["t"], 3);
        assert_eq!(v["i_t"], 2);
        assert_eq!(v["l_star"], 0);
        assert_eq!(v["alpha_nnz"], 1);
        assert_eq!(v["method"], "online-cvxmf-rr");
        assert!(v["surrogate"].is_f64());
        assert!(v["ms_sparse_code"].is_f64());
        assert!(v["ms_dict_update"].is_f64());
    }

    #[test]
    fn metrics_report_omits_missing_delta() {
        let r = MetricsReport {
            l2: 1.0,
            accuracy: None,
            basis_recovery: Some(0.5),
            delta: None,
            wall_time_s: 0.2,
        };
        let text = serde_json::to_string(&r).unwrap();
        assert!(!text.contains("delta"));
        assert!(text.contains("\"accuracy\":null"));
        let back: MetricsReport = serde_json::from_str(&text).unwrap();
        assert!(back.delta.is_none());
    }
}
