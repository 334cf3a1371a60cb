//! The denoiser network and its persistence.

mod attention;
mod checkpoint;
mod config;
mod denoiser;
mod gtm;
mod normalizer;
pub mod ops;
mod params;

pub use attention::attention;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, OptimizerState, CHECKPOINT_FORMAT_VERSION};
pub use config::DenoiserConfig;
pub use denoiser::{sinusoidal_table, DanceDenoiser};
pub use gtm::{gtm_modulate, GtmLayer};
pub use normalizer::Normalizer;
pub use params::{Init, ParamStore};
