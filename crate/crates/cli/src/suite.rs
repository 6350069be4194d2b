//! Multi-experiment comparison table.

use std::fmt::Write as _;
use std::num::NonZeroUsize;
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::runner::{run_experiment, ExperimentSummary};

/// Table metrics of one completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMetrics {
    pub intra_mean: f64,
    pub intra_var: f64,
    pub inter_mean: Option<f64>,
    pub inter_var: Option<f64>,
    pub recall: Vec<(usize, f64)>,
    pub mean_active_ratio: Option<f64>,
    pub mean_grad_norm: Option<f64>,
    pub epochs_to_50pct: Option<usize>,
}

impl RowMetrics {
    pub fn from_summary(s: &ExperimentSummary) -> Self {
        let r = &s.final_report;
        RowMetrics {
            intra_mean: r.intra_mean,
            intra_var: r.intra_var,
            inter_mean: r.inter_mean,
            inter_var: r.inter_var,
            recall: s.recall.recall_at_k.iter().map(|(&k, &v)| (k, v)).collect(),
            mean_active_ratio: s.greediness.map(|g| g.mean_active_ratio),
            mean_grad_norm: s.greediness.map(|g| g.mean_grad_norm),
            epochs_to_50pct: s.greediness.and_then(|g| g.epochs_to_50pct),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub loss: String,
    pub seed: u64,
    pub result: Result<RowMetrics, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.result.is_err()).count()
    }

    /// Fixed-width text table, one row per run, in config order.
    pub fn table(&self) -> String {
        let ks: Vec<usize> = self
            .rows
            .iter()
            .find_map(|r| r.result.as_ref().ok())
            .map(|m| m.recall.iter().map(|&(k, _)| k).collect())
            .unwrap_or_else(|| vec![1, 5, 10]);
        let mut header = format!(
            "{:<12} {:>6} {:>9} {:>9} {:>9} {:>9}",
            "loss", "seed", "intra_mu", "intra_s2", "inter_mu", "inter_s2"
        );
        for k in &ks {
            let _ = write!(header, " {:>7}", format!("r@{k}"));
        }
        let _ = write!(header, " {:>8} {:>9} {:>6}", "active", "grad_norm", "ep50");

        let mut out = header + "\n";
        for row in &self.rows {
            let _ = write!(out, "{:<12} {:>6}", row.loss, row.seed);
            match &row.result {
                Err(msg) => {
                    let _ = writeln!(out, " FAILED: {msg}");
                }
                Ok(m) => {
                    let _ = write!(
                        out,
                        " {:>9.4} {:>9.5} {:>9} {:>9}",
                        m.intra_mean,
                        m.intra_var,
                        opt(m.inter_mean, 4),
                        opt(m.inter_var, 5)
                    );
                    for k in &ks {
                        let v = m.recall.iter().find(|(kk, _)| kk == k).map(|&(_, v)| v);
                        let _ = write!(out, " {:>7}", opt(v, 4));
                    }
                    let _ = writeln!(
                        out,
                        " {:>8} {:>9} {:>6}",
                        opt(m.mean_active_ratio, 4),
                        opt(m.mean_grad_norm, 4),
                        m.epochs_to_50pct.map_or("-".to_string(), |e| e.to_string())
                    );
                }
            }
        }
        out
    }
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.digits$}"))
}

/// Runs every config, at most `jobs` at a time, and collects one row per
/// config. Failed runs become `FAILED` rows; the others still complete.
pub fn run_suite(cfgs: &[ExperimentConfig], jobs: Option<NonZeroUsize>) -> SuiteReport {
    let jobs = jobs
        .or_else(|| thread::available_parallelism().ok())
        .map_or(1, NonZeroUsize::get)
        .min(cfgs.len().max(1));
    let results: Mutex<Vec<Option<SuiteRow>>> = Mutex::new(vec![None; cfgs.len()]);
    let next = Mutex::new(0usize);

    thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("suite queue");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(cfg) = cfgs.get(i) else { break };
                let result = run_experiment(cfg)
                    .map(|s| RowMetrics::from_summary(&s))
                    .map_err(|e| e.to_string());
                results.lock().expect("suite results")[i] = Some(SuiteRow {
                    loss: cfg.loss.name().to_string(),
                    seed: cfg.seed,
                    result,
                });
            });
        }
    });

    SuiteReport {
        rows: results
            .into_inner()
            .expect("suite results")
            .into_iter()
            .map(|r| r.expect("every config ran"))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics() -> RowMetrics {
        RowMetrics {
            intra_mean: 0.1,
            intra_var: 0.01,
            inter_mean: Some(0.9),
            inter_var: None,
            recall: vec![(1, 0.5), (5, 0.75), (10, 1.0)],
            mean_active_ratio: Some(0.25),
            mean_grad_norm: Some(0.125),
            epochs_to_50pct: None,
        }
    }

    #[test]
    fn table_has_one_line_per_row() {
        let report = SuiteReport {
            rows: vec![
                SuiteRow {
                    loss: "triplet".into(),
                    seed: 1,
                    result: Ok(metrics()),
                },
                SuiteRow {
                    loss: "ccl".into(),
                    seed: 1,
                    result: Err("numeric failure".into()),
                },
            ],
        };
        let table = report.table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("r@1") && lines[0].contains("r@10"));
        assert!(lines[1].starts_with("triplet") && lines[1].contains("0.7500"));
        assert!(lines[2].contains("FAILED: numeric failure"));
        assert_eq!(report.failures(), 1);
    }
}
