//! The command surface: run configuration, datasets, training, generation,
//! evaluation, export and freezing-threshold calibration. The `longdance`
//! binary is a thin argument parser over these functions.

mod commands;
mod config;
mod dance;
mod dataset;
mod export;

pub use commands::{
    cmd_calibrate_freezing, cmd_evaluate, cmd_export, cmd_generate, cmd_synth_data, cmd_train, generate_for,
    load_eval_set, seed_window, train_model, write_config_echo, EvalSet, GenerateArgs, GenerationEcho,
    TrainedModel, CONFIG_ECHO, FIXTURE_SEED, FIXTURE_SEQUENCES, GENERATED_MOTION, GENERATION_ECHO,
};
pub use config::{DataConfig, GenerationConfig, RunConfig, SkeletonRef};
pub use dance::{beat_profile, synth_dance, DanceConfig, BAR_BEATS, FOOT_CLEARANCE, MOVES_PER_FAMILY, MOVE_FAMILIES};
pub use dataset::{
    load_dataset, mixed_intensity_fixture, synth_dataset, test_count, write_dataset, DataEntry, Dataset,
    DatasetManifest, ManifestEntry, Split, BEAT_MIN_GAP, FIXTURE_REST_PROBABILITY, MANIFEST_FORMAT,
};
pub use export::{export_motion, read_positions_csv, stick_figure_svg, write_positions_csv, ExportFormat};
