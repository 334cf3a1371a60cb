//! Autoregressive long generation: a freshly initialized model extends a
//! synthetic seed dance window by window, and the window plan is printed.

use candle_core::{DType, Device};
use longdance::cli::{synth_dance, DanceConfig};
use longdance::diffusion::{NoiseSchedule, ScheduleKind};
use longdance::longgen::{generate_long_batch, window_plan, GenerationRequest};
use longdance::model::{DanceDenoiser, DenoiserConfig, Normalizer};
use longdance::motion::{ContactConfig, FrameLayout, Skeleton};
use longdance::music::{synth_music, MusicSynthConfig};
use longdance::train::WindowSizes;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn main() -> longdance::Result<()> {
    let skel = Skeleton::smpl24();
    let layout = FrameLayout::for_skeleton(&skel);
    let (music, _) = synth_music(&MusicSynthConfig::new(120.0, 6.0, 60.0, 1))?;
    let cfg = DenoiserConfig { motion_dim: layout.dim(), music_dim: music.dim(), model_width: 32, ..DenoiserConfig::default() };
    let sizes = WindowSizes::from(&cfg);
    let target = 300;
    for (k, w) in window_plan(target, sizes, music.len())?.iter().enumerate() {
        println!("window {k}: past {:?} future {:?} music {:?}", w.past, w.future, w.music_valid);
    }

    let dance = synth_dance(&skel, &DanceConfig { duration_s: 4.0, ..DanceConfig::default() }, &ContactConfig::default())?;
    let model = DanceDenoiser::new(cfg, layout.root().start, &NoiseSchedule::new(20, ScheduleKind::Cosine).unwrap(), 0, DType::F32, &Device::Cpu)?;
    let data: Vec<&[f32]> = vec![dance.data()];
    let norm = Normalizer::fit(layout.dim(), &data, music.dim(), &[music.data()])?;
    let sched = NoiseSchedule::new(20, ScheduleKind::Cosine)?;
    let reqs: Vec<GenerationRequest> = (0..2)
        .map(|i| GenerationRequest {
            music: music.clone(),
            seed_motion: dance.slice(0, sizes.past).unwrap(),
            target_frames: target,
            seed: i,
        })
        .collect();
    for (i, out) in generate_long_batch(&model, &norm, &sched, &reqs)?.iter().enumerate() {
        let root = out.root_translation(out.len() - 1);
        println!("request {i}: {} frames, final root ({:+.2}, {:+.2}, {:+.2})", out.len(), root.x, root.y, root.z);
    }
    Ok(())
}
