use std::path::Path;

use longdance::cli::{synth_dataset, train_model, DataConfig, RunConfig};
use longdance::diffusion::ScheduleConfig;
use longdance::model::{load_checkpoint, DenoiserConfig};
use longdance::train::{moving_average, TrainConfig, LOSS_LOG_HEADER};

/// A run small enough to finish in seconds.
fn tiny_run() -> RunConfig {
    RunConfig {
        model: DenoiserConfig {
            model_width: 16,
            num_heads: 2,
            num_blocks: 2,
            music_frames: 24,
            past_frames: 12,
            future_frames: 6,
            ..DenoiserConfig::default()
        },
        diffusion: ScheduleConfig { steps: 10, ..ScheduleConfig::default() },
        training: TrainConfig { steps: 6, batch: 4, lr: 1e-3, checkpoint_every: 3, ..TrainConfig::default() },
        data: DataConfig {
            sequences: 4,
            duration_s: 2.0,
            ..DataConfig::default()
        },
        ..RunConfig::default()
    }
}

#[test]
fn a_short_run_logs_losses_and_writes_checkpoints() {
    let cfg = tiny_run();
    let skel = cfg.data.skeleton.resolve(Path::new(".")).unwrap();
    let data = synth_dataset(&cfg.data, &skel, &cfg.contacts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let trained = train_model(&cfg, &data, Some(dir.path())).unwrap();

    let log = &trained.report.log;
    assert_eq!(log.len(), 6);
    assert!(log.iter().all(|r| r.values.is_finite()));
    assert!(log.iter().all(|r| r.values.mi <= 0.0 && r.values.mi >= -cfg.loss.mi_clamp));
    let text = std::fs::read_to_string(dir.path().join("loss_log.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(LOSS_LOG_HEADER));
    assert_eq!(lines.count(), 6);

    assert!(!trained.report.checkpoints.is_empty());
    let last = load_checkpoint(trained.report.checkpoints.last().unwrap(), &candle_core::Device::Cpu).unwrap();
    assert_eq!(last.meta.step, 6);
    assert_eq!(last.meta.normalizer, trained.normalizer);
    assert!(last.meta.optimizer.is_some());
}

#[test]
fn training_is_reproducible() {
    let cfg = tiny_run();
    let skel = cfg.data.skeleton.resolve(Path::new(".")).unwrap();
    let data = synth_dataset(&cfg.data, &skel, &cfg.contacts).unwrap();
    let a = train_model(&cfg, &data, None).unwrap().report.log;
    let b = train_model(&cfg, &data, None).unwrap().report.log;
    assert_eq!(a, b);
}

#[test]
fn moving_average_clips_its_window() {
    let v = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(moving_average(&v, 1, 2), 2.5);
    assert_eq!(moving_average(&v, 3, 5), 4.0);
}
