use candle_core::{DType, Device, Tensor};
use rand::Rng;

use crate::diffusion::ConditioningContext;
use crate::error::{Error, Result};
use crate::model::{DenoiserConfig, Normalizer};
use crate::motion::{FrameLayout, MotionSequence};
use crate::music::MusicFeatureSequence;

/// Sizes of the music, past and future windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSizes {
    pub music: usize,
    pub past: usize,
    pub future: usize,
}

impl From<&DenoiserConfig> for WindowSizes {
    fn from(c: &DenoiserConfig) -> Self {
        Self {
            music: c.music_frames,
            past: c.past_frames,
            future: c.future_frames,
        }
    }
}

/// Copies `len` frames starting at `start` from a frame-major buffer,
/// zero-filling frames past the end.
pub fn padded_window(data: &[f32], dim: usize, start: usize, len: usize) -> Vec<f32> {
    let frames = data.len() / dim;
    let mut out = vec![0.0; len * dim];
    if start < frames {
        let n = (frames - start).min(len);
        out[..n * dim].copy_from_slice(&data[start * dim..(start + n) * dim]);
    }
    out
}

struct Item {
    motion: Vec<f32>,
    music: Vec<f32>,
    contacts: Vec<f32>,
    frames: usize,
}

/// Paired sequences in normalized space, cut into training windows on demand.
pub struct WindowDataset {
    items: Vec<Item>,
    layout: FrameLayout,
    music_dim: usize,
    sizes: WindowSizes,
}

/// One training batch: a clean context and the ground-truth foot contacts
/// of its future windows, `[B, future, C]`.
pub struct Batch {
    pub ctx: ConditioningContext,
    pub contacts: Tensor,
}

impl WindowDataset {
    pub fn new(
        pairs: &[(MotionSequence, MusicFeatureSequence)],
        normalizer: &Normalizer,
        sizes: WindowSizes,
    ) -> Result<Self> {
        let Some((first, first_music)) = pairs.first() else {
            return Err(Error::InvalidArgument("empty training set".into()));
        };
        let layout = first.layout();
        let music_dim = first_music.dim();
        if normalizer.motion_dim() != layout.dim() || normalizer.music_dim() != music_dim {
            return Err(Error::Shape(format!(
                "normalizer is {}+{} wide, data is {}+{}",
                normalizer.motion_dim(),
                normalizer.music_dim(),
                layout.dim(),
                music_dim
            )));
        }
        let need = sizes.past + sizes.future;
        let mut items = Vec::with_capacity(pairs.len());
        for (m, a) in pairs {
            if m.layout() != layout || a.dim() != music_dim {
                return Err(Error::Shape("training sequences have mixed layouts".into()));
            }
            if m.len() < need {
                return Err(Error::TooShort { what: "training sequence", needed: need, got: m.len() });
            }
            let contacts = m
                .frames()
                .flat_map(|f| f[layout.contacts()].iter().copied())
                .collect();
            items.push(Item {
                motion: normalizer.normalize_motion(m.data()),
                music: normalizer.normalize_music(a.data()),
                contacts,
                frames: m.len(),
            });
        }
        Ok(Self { items, layout, music_dim, sizes })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn layout(&self) -> FrameLayout {
        self.layout
    }

    /// Window starting at frame `start` of sequence `seq`: past
    /// `[start, start+past)`, future right after it, music from `start`.
    pub fn window(&self, seq: usize, start: usize) -> (Vec<f32>, Vec<f32>, Vec<f32>, Vec<f32>) {
        let it = &self.items[seq];
        let d = self.layout.dim();
        let c = self.layout.contacts;
        let s = self.sizes;
        let past = it.motion[start * d..(start + s.past) * d].to_vec();
        let fut_start = start + s.past;
        let future = it.motion[fut_start * d..(fut_start + s.future) * d].to_vec();
        let contacts = it.contacts[fut_start * c..(fut_start + s.future) * c].to_vec();
        let music = padded_window(&it.music, self.music_dim, start, s.music);
        (music, past, future, contacts)
    }

    /// `batch` windows drawn uniformly over sequences and start frames.
    pub fn sample_batch(&self, batch: usize, rng: &mut impl Rng, dtype: DType, device: &Device) -> Result<Batch> {
        let s = self.sizes;
        let (mut mu, mut pa, mut fu, mut co) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for _ in 0..batch {
            let seq = rng.random_range(0..self.items.len());
            let last = self.items[seq].frames - s.past - s.future;
            let start = rng.random_range(0..=last);
            let (m, p, f, c) = self.window(seq, start);
            mu.extend(m);
            pa.extend(p);
            fu.extend(f);
            co.extend(c);
        }
        let d = self.layout.dim();
        let t = |v: Vec<f32>, frames: usize, w: usize| -> Result<Tensor> {
            Ok(Tensor::from_vec(v, (batch, frames, w), device)?.to_dtype(dtype)?)
        };
        let ctx = ConditioningContext::clean(
            t(mu, s.music, self.music_dim)?,
            t(pa, s.past, d)?,
            t(fu, s.future, d)?,
        )?;
        Ok(Batch {
            ctx,
            contacts: t(co, s.future, self.layout.contacts)?,
        })
    }
}
