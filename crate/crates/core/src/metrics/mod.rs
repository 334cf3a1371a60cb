//! Evaluation metrics: feature-space Fréchet distance and diversity, beat
//! alignment and freezing rate.

mod beat_align;
mod features;
mod freezing;
mod report;
mod stats;

pub use beat_align::{
    beat_align, beat_align_frames, kinematic_beats, kinetic_speed, local_minima, moving_average,
    BeatAlignConfig, BeatAlignForm, BeatAlignScore, SPEED_SMOOTHING,
};
pub use features::{
    geometric_features, geometric_features_from_positions, geometric_relations, kinematic_features,
    kinematic_features_from_positions, FeatureKind, FeatureVector, GeometricRig, BENT_ANGLE_DEG,
    GEOMETRIC_DIM, GEOMETRIC_NAMES, IN_FRONT_MARGIN, RAISED_MARGIN, WIDE_HANDS_RATIO,
};
pub use freezing::{
    calibrate_thresholds, chunk_deltas, freezing_rate, Calibration, FreezingThresholds, DEFAULT_TAU_POSE,
    DEFAULT_TAU_TRANS, FREEZE_CHUNK,
};
pub use report::{evaluate, sequence_metrics, shuffled_beats, EvalConfig, EvalItem, MetricsReport, SequenceMetrics};
pub use stats::{diversity, frechet_distance, mean_and_covariance, psd_sqrt};
