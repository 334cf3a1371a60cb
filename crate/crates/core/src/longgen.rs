//! Autoregressive long-horizon generation: each sampled future window is
//! appended and becomes part of the next window's past.

use std::ops::Range;

use candle_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_chacha::ChaCha8Rng;

use crate::diffusion::{gaussian, posterior_sample, ConditioningContext, Denoiser, NoiseSchedule};
#[cfg(doc)]
use crate::diffusion::sample_window;
use crate::error::{Error, Result};
use crate::model::{DanceDenoiser, Normalizer};
use crate::motion::{FrameLayout, MotionSequence};
use crate::music::MusicFeatureSequence;
use crate::train::{padded_window, WindowSizes};

#[derive(Debug, Clone)]
pub struct GenerationRequest {
    pub music: MusicFeatureSequence,
    /// Exactly `past` frames.
    pub seed_motion: MotionSequence,
    pub target_frames: usize,
    pub seed: u64,
}

/// Frame ranges used by one sampling iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedWindow {
    pub past: Range<usize>,
    /// Requested music frames; anything outside `music_valid` is zero padding.
    pub music: Range<usize>,
    pub music_valid: Range<usize>,
    pub future: Range<usize>,
}

/// The sampling schedule for an output of `target_frames` frames:
/// `ceil((target - past) / future)` windows with stride `future`, music
/// anchored at the start of each past window.
pub fn window_plan(target_frames: usize, sizes: WindowSizes, music_len: usize) -> Result<Vec<PlannedWindow>> {
    if target_frames < sizes.past {
        return Err(Error::TooShort {
            what: "generation target",
            needed: sizes.past,
            got: target_frames,
        });
    }
    let count = (target_frames - sizes.past).div_ceil(sizes.future);
    Ok((0..count)
        .map(|k| {
            let start = k * sizes.future;
            let music = start..start + sizes.music;
            let music_valid = start.min(music_len)..music.end.min(music_len);
            PlannedWindow {
                past: start..start + sizes.past,
                music,
                music_valid,
                future: start + sizes.past..start + sizes.past + sizes.future,
            }
        })
        .collect())
}

fn check_request(model: &DanceDenoiser, norm: &Normalizer, req: &GenerationRequest) -> Result<WindowSizes> {
    let cfg = model.config();
    let sizes = WindowSizes::from(cfg);
    if req.seed_motion.len() != sizes.past {
        return Err(Error::LengthMismatch {
            what: "seed motion frames",
            expected: sizes.past,
            got: req.seed_motion.len(),
        });
    }
    if req.music.is_empty() {
        return Err(Error::InvalidArgument("music sequence is empty".into()));
    }
    if req.seed_motion.dim() != cfg.motion_dim || norm.motion_dim() != cfg.motion_dim {
        return Err(Error::LengthMismatch {
            what: "motion frame width",
            expected: cfg.motion_dim,
            got: req.seed_motion.dim(),
        });
    }
    if req.music.dim() != cfg.music_dim || norm.music_dim() != cfg.music_dim {
        return Err(Error::LengthMismatch {
            what: "music frame width",
            expected: cfg.music_dim,
            got: req.music.dim(),
        });
    }
    Ok(sizes)
}

/// Generates one sequence; see [`generate_long_batch`].
pub fn generate_long(
    model: &DanceDenoiser,
    normalizer: &Normalizer,
    sched: &NoiseSchedule,
    req: &GenerationRequest,
) -> Result<MotionSequence> {
    Ok(generate_long_batch(model, normalizer, sched, std::slice::from_ref(req))?.remove(0))
}

/// Generates several sequences of equal target length in lockstep. Each
/// request draws noise from its own seeded stream, so results do not depend
/// on which other requests share the batch.
///
/// The first `past` output frames are the seed, verbatim.
pub fn generate_long_batch(
    model: &DanceDenoiser,
    normalizer: &Normalizer,
    sched: &NoiseSchedule,
    reqs: &[GenerationRequest],
) -> Result<Vec<MotionSequence>> {
    let Some(first) = reqs.first() else {
        return Ok(Vec::new());
    };
    let mut sizes = check_request(model, normalizer, first)?;
    for r in reqs {
        sizes = check_request(model, normalizer, r)?;
        if r.target_frames != first.target_frames {
            return Err(Error::InvalidArgument("batched requests must share target_frames".into()));
        }
    }
    let d = model.config().motion_dim;
    let md = model.config().music_dim;
    let mut outputs: Vec<MotionSequence> = reqs.iter().map(|r| r.seed_motion.clone()).collect();
    let mut history: Vec<Vec<f32>> = reqs
        .iter()
        .map(|r| normalizer.normalize_motion(r.seed_motion.data()))
        .collect();
    let music: Vec<Vec<f32>> = reqs.iter().map(|r| normalizer.normalize_music(r.music.data())).collect();
    let mut rngs: Vec<ChaCha8Rng> = reqs.iter().map(|r| ChaCha8Rng::seed_from_u64(r.seed)).collect();
    let plan = window_plan(first.target_frames, sizes, usize::MAX)?;
    let dev = model.device();
    for w in &plan {
        let mut past = Vec::with_capacity(reqs.len() * sizes.past * d);
        let mut mus = Vec::with_capacity(reqs.len() * sizes.music * md);
        for (h, m) in history.iter().zip(&music) {
            past.extend_from_slice(&h[w.past.start * d..w.past.end * d]);
            mus.extend(padded_window(m, md, w.music.start, sizes.music));
        }
        let b = reqs.len();
        let past = Tensor::from_vec(past, (b, sizes.past, d), dev)?.to_dtype(model.dtype())?;
        let mus = Tensor::from_vec(mus, (b, sizes.music, md), dev)?.to_dtype(model.dtype())?;
        let futures = sample_lockstep(model, &mus, &past, sizes.future, sched, &mut rngs)?;
        for (i, fut) in futures.iter().enumerate() {
            let flat: Vec<f32> = fut.to_dtype(candle_core::DType::F32)?.flatten_all()?.to_vec1()?;
            history[i].extend_from_slice(&flat);
            outputs[i].push_frames(&normalizer.denormalize_motion(&flat))?;
        }
    }
    for o in &mut outputs {
        o.truncate(first.target_frames);
    }
    Ok(outputs)
}

/// Motion drawn from the sampler's starting distribution: standard normal
/// in normalized space, mapped back to raw channels. A floor for
/// feature-space distances.
pub fn noise_motion(
    normalizer: &Normalizer,
    layout: FrameLayout,
    fps: f64,
    frames: usize,
    rng: &mut impl Rng,
) -> Result<MotionSequence> {
    if normalizer.motion_dim() != layout.dim() {
        return Err(Error::LengthMismatch {
            what: "motion frame width",
            expected: normalizer.motion_dim(),
            got: layout.dim(),
        });
    }
    let z: Vec<f32> = (0..frames * layout.dim()).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
    MotionSequence::new(fps, layout, normalizer.denormalize_motion(&z))
}

/// Reverse diffusion for a batch where row `i` takes its noise from
/// `rngs[i]`; with one row this matches [`sample_window`] draw for draw.
fn sample_lockstep(
    model: &DanceDenoiser,
    music: &Tensor,
    past: &Tensor,
    future_frames: usize,
    sched: &NoiseSchedule,
    rngs: &mut [ChaCha8Rng],
) -> Result<Vec<Tensor>> {
    let (b, _, d) = past.dims3()?;
    let shape = [1, future_frames, d];
    let draw = |rngs: &mut [ChaCha8Rng]| -> Result<Tensor> {
        let rows = rngs
            .iter_mut()
            .map(|r| gaussian(&shape, r, past.dtype(), past.device()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Tensor::cat(&rows, 0)?)
    };
    let mut x = draw(rngs)?;
    for t in (1..=sched.steps()).rev() {
        let ctx = ConditioningContext {
            music: music.clone(),
            past: past.clone(),
            future: x.clone(),
            steps: vec![t; b],
        };
        let x0 = model.predict_x0(&ctx)?;
        let noise = if t > 1 { draw(rngs)? } else { x.zeros_like()? };
        x = posterior_sample(&x, &x0, t, sched, &noise)?;
    }
    (0..b).map(|i| Ok(x.narrow(0, i, 1)?)).collect()
}
