//! Metric-learning losses and embedding diagnostics.
//!
//! `metricscope-core` trains a small projection head over fixed feature
//! vectors with one of seven supervised embedding losses and measures what
//! the loss did to the embedding space:
//!
//! * [`losses`]: contrastive, batch-hard triplet, N-pair, InfoNCE, ArcFace,
//!   supervised contrastive and center contrastive losses, each with
//!   analytic gradients and per-unit active flags.
//! * [`model`]: the `d_in → d_hidden → d_out` Tanh head with dropout and
//!   L2-normalized output, hand-written backward pass and Adam.
//! * [`diagnostics`]: intra/inter-class variance reports and the
//!   active-ratio / gradient-norm training summaries.
//! * [`retrieval`]: leave-one-out Recall@k.
//! * [`data`]: feature files, synthetic clusters and class-balanced
//!   batch sampling.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod losses;
pub mod math;
pub mod model;
pub mod retrieval;
mod rng;
pub mod train;

pub use data::{BatchPlan, BatchStrategy, FeatureDataset, Preset, Split, SyntheticSpec};
pub use diagnostics::{GreedinessSummary, TrainLog, VarianceReport};
pub use error::{Error, Result};
pub use losses::{CenterBank, LossConfig, LossKind, LossOutput};
pub use math::LabeledSet;
pub use model::{AdamConfig, AdamState, GradSnapshot, HeadDims, Mode, ProjectionHead};
pub use retrieval::RecallReport;
pub use rng::seeded_rng;
pub use train::{TrainSettings, Trainer};
