//! Embedding-geometry (variance) and optimization-dynamics (greediness)
//! diagnostics.

mod greediness;
mod log;
mod variance;

pub use self::log::{read_log_csv, EpochRecord, Snapshot, TrainLog, LOG_COLUMNS};
pub use greediness::{loss_reduction_epoch, summarize_greediness, GreedinessSummary};
pub use variance::{centroid_variance, cosine_distance_stats, CentroidVariance, ClassStat, VarianceReport};
