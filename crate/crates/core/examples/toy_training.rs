//! Trains a small denoiser on a handful of synthetic dances and prints the
//! loss curve. Pass a step count to train longer (default 40).

use std::path::Path;

use longdance::cli::{synth_dataset, train_model, DataConfig, RunConfig};
use longdance::diffusion::ScheduleConfig;
use longdance::model::DenoiserConfig;
use longdance::train::TrainConfig;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn main() -> longdance::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let cfg = RunConfig {
        model: DenoiserConfig { model_width: 32, num_blocks: 2, ..DenoiserConfig::default() },
        diffusion: ScheduleConfig::default(),
        training: TrainConfig { steps, batch: 8, lr: 5e-4, checkpoint_every: 0, ..TrainConfig::default() },
        data: DataConfig { sequences: 8, duration_s: 8.0, ..DataConfig::default() },
        ..RunConfig::default()
    };
    let skel = cfg.data.skeleton.resolve(Path::new("."))?;
    let data = synth_dataset(&cfg.data, &skel, &cfg.contacts)?;
    println!("training on {} sequences for {steps} steps", data.entries.len());
    let trained = train_model(&cfg, &data, None)?;
    println!("{:>5} {:>9} {:>9} {:>9} {:>9}", "step", "recon", "mi", "pos", "total");
    for row in trained.report.log.iter().step_by((steps / 10).max(1)) {
        let v = &row.values;
        println!("{:>5} {:>9.4} {:>9.4} {:>9.4} {:>9.4}", row.step, v.recon, v.mi, v.pos, v.total);
    }
    Ok(())
}
