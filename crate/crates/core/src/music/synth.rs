//! Procedural music features for desk-scale experiments.
//!
//! The onset channel carries unit impulses on the beat frames and is zero
//! elsewhere. The remaining channels mix seeded, moving-average smoothed
//! noise with sinusoids locked to the beat phase, plus a per-genre timbre
//! offset so that sequences of different genres are separable.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::features::{BeatGrid, ChannelSpan, MusicFeatureSequence, CHROMA, MFCC, MFCC_DELTA, ONSET, TEMPOGRAM};
use crate::error::{Error, Result};

pub const MFCC_DIM: usize = 20;
pub const CHROMA_DIM: usize = 12;
pub const TEMPOGRAM_DIM: usize = 30;
/// Total synthesized feature width.
pub const SYNTH_DIM: usize = 2 * MFCC_DIM + CHROMA_DIM + TEMPOGRAM_DIM + 1;

/// Standard channel layout: mfcc, mfcc_delta, chroma, tempogram, onset.
pub fn standard_channel_map() -> Vec<ChannelSpan> {
    let mut start = 0;
    let mut spans = Vec::new();
    for (name, len) in [
        (MFCC, MFCC_DIM),
        (MFCC_DELTA, MFCC_DIM),
        (CHROMA, CHROMA_DIM),
        (TEMPOGRAM, TEMPOGRAM_DIM),
        (ONSET, 1),
    ] {
        spans.push(ChannelSpan::new(name, start, start + len));
        start += len;
    }
    spans
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MusicSynthConfig {
    pub bpm: f64,
    pub duration_s: f64,
    pub fps: f64,
    pub seed: u64,
    pub genre: usize,
    pub min_bpm: f64,
    pub max_bpm: f64,
}

impl Default for MusicSynthConfig {
    fn default() -> Self {
        Self {
            bpm: 120.0,
            duration_s: 20.0,
            fps: 60.0,
            seed: 0,
            genre: 0,
            min_bpm: 80.0,
            max_bpm: 135.0,
        }
    }
}

impl MusicSynthConfig {
    pub fn new(bpm: f64, duration_s: f64, fps: f64, seed: u64) -> Self {
        Self {
            bpm,
            duration_s,
            fps,
            seed,
            ..Default::default()
        }
    }
}

/// Beat frames for a constant tempo starting at frame 0:
/// `round(k * 60 * fps / bpm)` for `k < floor(duration * bpm / 60)`.
pub fn beat_frames_for(bpm: f64, duration_s: f64, fps: f64) -> Vec<usize> {
    let count = (duration_s * bpm / 60.0 + 1e-9).floor() as usize;
    let period = 60.0 * fps / bpm;
    (0..count).map(|k| (k as f64 * period).round() as usize).collect()
}

fn smoothed_noise(rng: &mut ChaCha8Rng, n: usize, width: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n + width).map(|_| rng.sample(StandardNormal)).collect();
    let norm = (width as f64).sqrt();
    (0..n)
        .map(|i| raw[i..i + width].iter().sum::<f64>() / norm)
        .collect()
}

pub fn synth_music(cfg: &MusicSynthConfig) -> Result<(MusicFeatureSequence, BeatGrid)> {
    if !(cfg.duration_s > 0.0) || !(cfg.fps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "duration ({}) and fps ({}) must be positive",
            cfg.duration_s, cfg.fps
        )));
    }
    if !(cfg.bpm >= cfg.min_bpm && cfg.bpm <= cfg.max_bpm) {
        return Err(Error::InvalidArgument(format!(
            "bpm {} outside [{}, {}]",
            cfg.bpm, cfg.min_bpm, cfg.max_bpm
        )));
    }
    let period = 60.0 * cfg.fps / cfg.bpm;
    if period < 2.0 {
        return Err(Error::InvalidArgument(format!(
            "beat period of {period:.2} frames is too short for the frame grid"
        )));
    }
    let n = (cfg.duration_s * cfg.fps).round() as usize;
    let beats = beat_frames_for(cfg.bpm, cfg.duration_s, cfg.fps);
    let spans = standard_channel_map();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Genre timbre is shared by every track of that genre.
    let mut genre_rng = ChaCha8Rng::seed_from_u64(0x6d75_7369_6300 ^ cfg.genre as u64);
    let timbre: Vec<f64> = (0..MFCC_DIM).map(|_| genre_rng.random_range(-1.5..1.5)).collect();
    let key = rng.random_range(0..CHROMA_DIM);

    let mut data = vec![0f32; n * SYNTH_DIM];
    let phase = |i: usize| i as f64 / period;

    let mut mfcc = vec![vec![0.0; MFCC_DIM]; n];
    for (c, base) in timbre.iter().enumerate() {
        let noise = smoothed_noise(&mut rng, n, 9);
        let harmonic = (c % 4 + 1) as f64;
        let amp = 0.5 / harmonic;
        for i in 0..n {
            mfcc[i][c] = base + 0.3 * noise[i] + amp * (TAU * harmonic * phase(i)).cos();
        }
    }
    let chroma_noise: Vec<Vec<f64>> = (0..CHROMA_DIM).map(|_| smoothed_noise(&mut rng, n, 15)).collect();
    let tempo_noise: Vec<Vec<f64>> = (0..TEMPOGRAM_DIM).map(|_| smoothed_noise(&mut rng, n, 31)).collect();
    // Tempogram bins cover 60..240 bpm.
    let tempo_bin = (cfg.bpm - 60.0) / 180.0 * (TEMPOGRAM_DIM - 1) as f64;

    for i in 0..n {
        let row = &mut data[i * SYNTH_DIM..(i + 1) * SYNTH_DIM];
        for c in 0..MFCC_DIM {
            row[c] = mfcc[i][c] as f32;
            let prev = if i > 0 { mfcc[i - 1][c] } else { mfcc[i][c] };
            row[MFCC_DIM + c] = (mfcc[i][c] - prev) as f32;
        }
        // Chord root moves every four beats.
        let bar = (phase(i) / 4.0).floor() as usize;
        let root = (key + 5 * bar) % CHROMA_DIM;
        for c in 0..CHROMA_DIM {
            let dist = ((c + CHROMA_DIM - root) % CHROMA_DIM).min((root + CHROMA_DIM - c) % CHROMA_DIM);
            let tone = (-(dist as f64).powi(2) / 2.0).exp();
            let v = tone + 0.1 * chroma_noise[c][i] + 0.1 * (TAU * phase(i)).cos();
            row[2 * MFCC_DIM + c] = v.max(0.0) as f32;
        }
        for c in 0..TEMPOGRAM_DIM {
            let bump = (-(c as f64 - tempo_bin).powi(2) / 4.0).exp();
            let harmonic = (c % 3 + 1) as f64;
            let lock = if c % 2 == 0 {
                (TAU * harmonic * phase(i)).cos()
            } else {
                (TAU * harmonic * phase(i)).sin()
            };
            let v = bump + 0.25 * lock + 0.05 * tempo_noise[c][i];
            row[2 * MFCC_DIM + CHROMA_DIM + c] = v as f32;
        }
    }
    let onset = spans.iter().find(|s| s.name == ONSET).unwrap().start;
    for &b in &beats {
        data[b * SYNTH_DIM + onset] = 1.0;
    }
    let seq = MusicFeatureSequence::new(cfg.fps, SYNTH_DIM, spans, data)?;
    let grid = BeatGrid::new(beats, Some(cfg.bpm))?;
    Ok((seq, grid))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beats_every_thirty_frames_at_120_bpm() {
        let (_, grid) = synth_music(&MusicSynthConfig::new(120.0, 4.0, 60.0, 1)).unwrap();
        assert_eq!(grid.frames(), &[0, 30, 60, 90, 120, 150, 180, 210]);
    }

    #[test]
    fn beat_count_follows_duration() {
        let (seq, grid) = synth_music(&MusicSynthConfig::new(90.0, 4.0, 60.0, 1)).unwrap();
        assert_eq!(grid.len(), 6);
        assert_eq!(seq.len(), 240);
        assert_eq!(seq.dim(), 83);
    }

    #[test]
    fn onset_channel_is_impulses_on_beats() {
        let (seq, grid) = synth_music(&MusicSynthConfig::new(113.0, 7.0, 60.0, 5)).unwrap();
        let onset = seq.span(ONSET).unwrap().start;
        let ch = seq.channel(onset);
        for (i, v) in ch.iter().enumerate() {
            let expected = if grid.frames().contains(&i) { 1.0 } else { 0.0 };
            assert_eq!(*v, expected);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = MusicSynthConfig::new(100.0, 3.0, 60.0, 42);
        let (a, _) = synth_music(&cfg).unwrap();
        let (b, _) = synth_music(&cfg).unwrap();
        let bits = |s: &MusicFeatureSequence| s.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let (c, _) = synth_music(&MusicSynthConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(synth_music(&MusicSynthConfig::new(120.0, 0.0, 60.0, 0)).is_err());
        assert!(synth_music(&MusicSynthConfig::new(120.0, 1.0, -1.0, 0)).is_err());
        assert!(synth_music(&MusicSynthConfig::new(200.0, 1.0, 60.0, 0)).is_err());
    }
}
