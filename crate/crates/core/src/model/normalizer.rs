use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest per-channel standard deviation used for scaling; constant
/// channels are centred but not blown up.
pub const STD_FLOOR: f32 = 1e-3;

/// Per-channel affine standardization for motion and music frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub motion_mean: Vec<f32>,
    pub motion_std: Vec<f32>,
    pub music_mean: Vec<f32>,
    pub music_std: Vec<f32>,
}

fn channel_stats<'a>(dim: usize, frames: impl Iterator<Item = &'a [f32]>) -> (Vec<f32>, Vec<f32>) {
    let mut sum = vec![0f64; dim];
    let mut sq = vec![0f64; dim];
    let mut n = 0usize;
    for f in frames {
        for c in 0..dim {
            let v = f[c] as f64;
            sum[c] += v;
            sq[c] += v * v;
        }
        n += 1;
    }
    let n = n.max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std = sq
        .iter()
        .zip(&mean)
        .map(|(s, m)| (((s / n) - m * m).max(0.0).sqrt() as f32).max(STD_FLOOR))
        .collect();
    (mean.into_iter().map(|m| m as f32).collect(), std)
}

impl Normalizer {
    pub fn identity(motion_dim: usize, music_dim: usize) -> Self {
        Self {
            motion_mean: vec![0.0; motion_dim],
            motion_std: vec![1.0; motion_dim],
            music_mean: vec![0.0; music_dim],
            music_std: vec![1.0; music_dim],
        }
    }

    /// Statistics over every frame of the given flat, frame-major buffers.
    pub fn fit(motion_dim: usize, motion: &[&[f32]], music_dim: usize, music: &[&[f32]]) -> Result<Self> {
        if motion.iter().all(|m| m.is_empty()) || music.iter().all(|m| m.is_empty()) {
            return Err(Error::InvalidArgument("cannot fit a normalizer on empty data".into()));
        }
        for m in motion {
            if m.len() % motion_dim != 0 {
                return Err(Error::Shape(format!("motion buffer of {} values, width {motion_dim}", m.len())));
            }
        }
        for m in music {
            if m.len() % music_dim != 0 {
                return Err(Error::Shape(format!("music buffer of {} values, width {music_dim}", m.len())));
            }
        }
        let (motion_mean, motion_std) =
            channel_stats(motion_dim, motion.iter().flat_map(|m| m.chunks_exact(motion_dim)));
        let (music_mean, music_std) =
            channel_stats(music_dim, music.iter().flat_map(|m| m.chunks_exact(music_dim)));
        Ok(Self { motion_mean, motion_std, music_mean, music_std })
    }

    pub fn motion_dim(&self) -> usize {
        self.motion_mean.len()
    }

    pub fn music_dim(&self) -> usize {
        self.music_mean.len()
    }

    fn apply(data: &[f32], mean: &[f32], std: &[f32], forward: bool) -> Vec<f32> {
        let dim = mean.len();
        data.chunks_exact(dim)
            .flat_map(|f| {
                f.iter().enumerate().map(move |(c, v)| {
                    if forward {
                        (v - mean[c]) / std[c]
                    } else {
                        v * std[c] + mean[c]
                    }
                })
            })
            .collect()
    }

    pub fn normalize_motion(&self, data: &[f32]) -> Vec<f32> {
        Self::apply(data, &self.motion_mean, &self.motion_std, true)
    }

    pub fn denormalize_motion(&self, data: &[f32]) -> Vec<f32> {
        Self::apply(data, &self.motion_mean, &self.motion_std, false)
    }

    pub fn normalize_music(&self, data: &[f32]) -> Vec<f32> {
        Self::apply(data, &self.music_mean, &self.music_std, true)
    }

    /// Differentiable inverse of motion normalization for `[.., motion_dim]`.
    pub fn denormalize_motion_tensor(&self, x: &Tensor) -> Result<Tensor> {
        let (mean, std) = self.motion_tensors(x.dtype(), x.device())?;
        Ok(x.broadcast_mul(&std)?.broadcast_add(&mean)?)
    }

    fn motion_tensors(&self, dtype: DType, device: &Device) -> Result<(Tensor, Tensor)> {
        let mean = Tensor::new(self.motion_mean.as_slice(), device)?.to_dtype(dtype)?;
        let std = Tensor::new(self.motion_std.as_slice(), device)?.to_dtype(dtype)?;
        Ok((mean, std))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_unit_statistics() {
        let data: Vec<f32> = (0..40).map(|i| (i as f32 * 0.37).sin() * 3.0 + 1.0).collect();
        let constant = vec![2.0f32; 8];
        let n = Normalizer::fit(4, &[&data], 1, &[&constant]).unwrap();
        let z = n.normalize_motion(&data);
        for c in 0..4 {
            let col: Vec<f32> = z.iter().skip(c).step_by(4).copied().collect();
            let mean: f32 = col.iter().sum::<f32>() / col.len() as f32;
            let var: f32 = col.iter().map(|v| (v - mean).powi(2)).sum::<f32>() / col.len() as f32;
            assert!(mean.abs() < 1e-5 && (var - 1.0).abs() < 1e-4);
        }
        let back = n.denormalize_motion(&z);
        for (a, b) in back.iter().zip(&data) {
            assert!((a - b).abs() < 1e-5);
        }
        assert_eq!(n.music_std, vec![STD_FLOOR]);
        assert_eq!(n.normalize_music(&constant), vec![0.0; 8]);
    }
}
