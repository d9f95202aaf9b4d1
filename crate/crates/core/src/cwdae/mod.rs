//! The autoencoder: architecture, objective, training loop and checkpoints.
//!
//! The encoder maps an encoded row to a diagonal Gaussian over a 2-D latent
//! space. The decoder maps a latent code to one quantile spline per
//! continuous column and one logit vector per discrete column. Training
//! minimises
//!
//! ```text
//! log max(mix_cw(x, x_hat), 1e-8) + lambda * log max(cw_latent(z_prior, z), 1e-8)
//! ```
//!
//! with a fresh prior batch per step.

mod checkpoint;
mod config;
pub(crate) mod model;
mod train;

pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, load_checkpoint_for, parse_checkpoint, save_checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{parse_gamma, TrainConfig};
pub use model::{
    head_layout, head_width, reparameterize, CwdaeModel, HeadBlock, LossBreakdown, StepNoise,
    LOG_FLOOR,
};
pub use train::{train, write_loss_history, EpochLoss, TrainOptions, TrainOutcome};
