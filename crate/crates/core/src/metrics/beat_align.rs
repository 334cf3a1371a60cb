use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::motion::{sequence_positions, MotionSequence, Skeleton, Vec3};
use crate::music::BeatGrid;

/// Frames of the moving average applied to kinetic speed before minima
/// are extracted.
pub const SPEED_SMOOTHING: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BeatAlignForm {
    /// Mean of `exp(-d^2 / (2 sigma^2))`, in `[0, 1]`.
    #[default]
    Exponential,
    /// Mean frame distance `d`, unbounded.
    MeanDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeatAlignConfig {
    pub sigma_frames: f64,
    /// Minimum spacing of kinematic beats.
    pub min_gap_frames: usize,
    pub form: BeatAlignForm,
}

impl Default for BeatAlignConfig {
    fn default() -> Self {
        Self { sigma_frames: 3.0, min_gap_frames: 10, form: BeatAlignForm::Exponential }
    }
}

/// Score plus a flag set when the motion had no kinematic beats (the score
/// is then 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeatAlignScore {
    pub score: f64,
    pub no_kinematic_beats: bool,
    pub kinematic_beats: usize,
}

/// Summed joint speed per frame (forward differences, last frame repeated).
pub fn kinetic_speed(positions: &[Vec<Vec3>], fps: f64) -> Vec<f64> {
    let n = positions.len();
    let mut out: Vec<f64> = positions
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (b - a).norm() * fps).sum())
        .collect();
    if n > 0 {
        out.push(out.last().copied().unwrap_or(0.0));
    }
    out
}

/// Centred moving average of width `w`, shrinking at the edges.
pub fn moving_average(x: &[f64], w: usize) -> Vec<f64> {
    let half = w / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Interior local minima of `signal`; deeper minima win when two fall
/// within `min_gap` frames of each other. Returned sorted.
pub fn local_minima(signal: &[f64], min_gap: usize) -> Vec<usize> {
    let mut cands: Vec<usize> = (1..signal.len().saturating_sub(1))
        .filter(|&i| signal[i] < signal[i - 1] && signal[i] <= signal[i + 1])
        .collect();
    cands.sort_by(|a, b| signal[*a].total_cmp(&signal[*b]).then(a.cmp(b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in cands {
        if kept.iter().all(|k| k.abs_diff(c) >= min_gap) {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    kept
}

/// Kinematic beats: minima of smoothed kinetic speed.
pub fn kinematic_beats(positions: &[Vec<Vec3>], fps: f64, min_gap: usize) -> Vec<usize> {
    let speed = moving_average(&kinetic_speed(positions, fps), SPEED_SMOOTHING);
    local_minima(&speed, min_gap)
}

/// Scores kinematic beat frames against music beat frames.
pub fn beat_align_frames(kin: &[usize], music: &[usize], cfg: &BeatAlignConfig) -> BeatAlignScore {
    if kin.is_empty() {
        return BeatAlignScore { score: 0.0, no_kinematic_beats: true, kinematic_beats: 0 };
    }
    let s2 = 2.0 * cfg.sigma_frames * cfg.sigma_frames;
    let total: f64 = kin
        .iter()
        .map(|&k| {
            let d = music
                .iter()
                .map(|&m| k.abs_diff(m) as f64)
                .fold(f64::INFINITY, f64::min);
            match cfg.form {
                BeatAlignForm::Exponential => (-d * d / s2).exp(),
                BeatAlignForm::MeanDistance => d,
            }
        })
        .sum();
    BeatAlignScore { score: total / kin.len() as f64, no_kinematic_beats: false, kinematic_beats: kin.len() }
}

pub fn beat_align(skel: &Skeleton, motion: &MotionSequence, beats: &BeatGrid, cfg: &BeatAlignConfig) -> Result<BeatAlignScore> {
    let positions = sequence_positions(skel, motion)?;
    let kin = kinematic_beats(&positions, motion.fps(), cfg.min_gap_frames);
    Ok(beat_align_frames(&kin, beats.frames(), cfg))
}
