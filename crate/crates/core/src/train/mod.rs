//! Loss terms and the training loop.

mod dataset;
pub mod geometry;
mod losses;
mod optim;
mod trainer;

pub use dataset::{padded_window, Batch, WindowDataset, WindowSizes};
pub use losses::{
    gaussian_kl, mi_loss, perceptual_losses, recon_loss, scalar, total_loss, LossValues, LossWeights,
    MotionDistributionSummary, PerceptualLosses, VAR_FLOOR,
};
pub use optim::{Adam, AdamConfig, OptimizerKind};
pub use trainer::{
    compute_losses, moving_average, train, LossRow, StepLosses, TrainConfig, TrainReport, TrainSetup,
    LOSS_LOG_HEADER,
};
