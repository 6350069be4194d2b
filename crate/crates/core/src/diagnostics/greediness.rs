use serde::{Deserialize, Serialize};

use super::TrainLog;
use crate::error::{Error, Result};

/// First epoch whose loss has dropped by `fraction` of the initial loss,
/// i.e. `curve[e] ≤ (1 − fraction)·curve[0]`.
pub fn loss_reduction_epoch(curve: &[f64], fraction: f64) -> Result<Option<usize>> {
    let Some(&first) = curve.first() else {
        return Err(Error::Precondition("loss curve is empty".into()));
    };
    if !(first > 0.0) {
        return Err(Error::Precondition(format!("initial loss {first} must be positive")));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "reduction fraction {fraction} outside (0, 1)"
        )));
    }
    let target = (1.0 - fraction) * first;
    Ok(curve.iter().position(|&l| l <= target))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedinessSummary {
    pub mean_active_ratio: f64,
    pub mean_grad_norm: f64,
    pub epochs_to_50pct: Option<usize>,
    pub epochs_to_60pct: Option<usize>,
}

/// Means over all logged epochs plus the 50% and 60% loss-reduction epochs.
pub fn summarize_greediness(log: &TrainLog) -> Result<GreedinessSummary> {
    if log.records.is_empty() {
        return Err(Error::Precondition("training log has no epochs".into()));
    }
    let n = log.records.len() as f64;
    let curve: Vec<f64> = log.records.iter().map(|r| r.loss).collect();
    // A zero initial loss leaves nothing to reduce.
    let reduction = |f| {
        if curve[0] > 0.0 {
            loss_reduction_epoch(&curve, f)
        } else {
            Ok(None)
        }
    };
    Ok(GreedinessSummary {
        mean_active_ratio: log.records.iter().map(|r| r.active_ratio).sum::<f64>() / n,
        mean_grad_norm: log.records.iter().map(|r| r.grad_norm).sum::<f64>() / n,
        epochs_to_50pct: reduction(0.5)?,
        epochs_to_60pct: reduction(0.6)?,
    })
}
