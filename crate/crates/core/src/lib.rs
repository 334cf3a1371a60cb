//! Music-conditioned long-horizon dance generation.
//!
//! A transformer denoiser sees one concatenated token stream of music
//! features, clean past motion and noised future motion, and predicts the
//! clean future window. Long sequences are produced by sliding that window
//! forward, feeding each generated window back in as past motion.
//!
//! Modules, bottom up:
//!
//! - [`motion`]: skeleton, 6D rotations, forward kinematics, frame layout.
//! - [`music`]: music feature sequences, beat grids, procedural music.
//! - [`diffusion`]: noise schedules, partial noising and the reverse sampler.
//! - [`model`]: the denoiser network, trajectory modulation, checkpoints.
//! - [`train`]: loss terms and the training loop.
//! - [`longgen`]: autoregressive long-horizon generation.
//! - [`metrics`]: FID, diversity, beat alignment and freezing rate.
//! - [`cli`]: run configuration, datasets, export and threshold calibration.

pub mod cli;
pub mod diffusion;
pub mod error;
mod io_util;
pub mod longgen;
pub mod metrics;
pub mod model;
pub mod motion;
pub mod music;
pub mod train;

pub use error::{Error, Result};
