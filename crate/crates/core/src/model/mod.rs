//! Trainable projection head, Adam optimizer, and gradient bookkeeping.

mod adam;
mod checkpoint;
mod grad;
mod head;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MANIFEST};
pub use grad::{global_grad_norm, GradSnapshot, ParamGrad};
pub use head::{ForwardCache, HeadDims, Mode, ProjectionHead};
