use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::beat_align::{beat_align_frames, kinematic_beats, BeatAlignConfig, BeatAlignScore};
use super::features::{geometric_features_from_positions, kinematic_features_from_positions, GeometricRig};
use super::freezing::{chunk_deltas, FreezingThresholds};
use super::stats::{diversity, frechet_distance};
use crate::error::{Error, Result};
use crate::io_util::worker_pool;
use crate::motion::{sequence_positions, MotionSequence, Skeleton};
use crate::music::BeatGrid;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub beat_align: BeatAlignConfig,
    pub freezing: FreezingThresholds,
}

/// One sequence to evaluate, with the music beats it was danced to if any.
#[derive(Debug, Clone, Copy)]
pub struct EvalItem<'a> {
    pub name: &'a str,
    pub motion: &'a MotionSequence,
    pub beats: Option<&'a BeatGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceMetrics {
    pub name: String,
    pub frames: usize,
    pub kinematic: Vec<f64>,
    /// Absent when the skeleton lacks the joints the relations refer to.
    pub geometric: Option<Vec<f64>>,
    pub beat_align: Option<BeatAlignScore>,
    pub frozen_chunks: usize,
    pub chunks: usize,
}

impl SequenceMetrics {
    pub fn freezing_rate(&self) -> f64 {
        self.frozen_chunks as f64 / self.chunks as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub fid_k: f64,
    pub fid_g: Option<f64>,
    pub dist_k: f64,
    pub dist_g: Option<f64>,
    /// Mean over generated sequences that have music beats.
    pub beat_align: f64,
    /// Frozen chunks over all chunks of the generated set.
    pub freezing_rate: f64,
    pub config: EvalConfig,
    pub generated: Vec<SequenceMetrics>,
    pub reference: Vec<SequenceMetrics>,
    pub notes: Vec<String>,
}

/// All per-sequence quantities, from one forward-kinematics pass.
pub fn sequence_metrics(skel: &Skeleton, item: &EvalItem<'_>, cfg: &EvalConfig) -> Result<SequenceMetrics> {
    let motion = item.motion;
    let positions = sequence_positions(skel, motion)?;
    let kinematic = kinematic_features_from_positions(&positions, motion.fps())?.values;
    let geometric = match GeometricRig::from_skeleton(skel) {
        Ok(rig) => Some(geometric_features_from_positions(&rig, &positions)?.values),
        Err(_) => None,
    };
    let beat_align = item.beats.map(|b| {
        let kin = kinematic_beats(&positions, motion.fps(), cfg.beat_align.min_gap_frames);
        beat_align_frames(&kin, b.frames(), &cfg.beat_align)
    });
    let deltas = chunk_deltas(motion)?;
    let th = cfg.freezing;
    let frozen_chunks = deltas.iter().filter(|(p, t)| *p <= th.tau_pose && *t <= th.tau_trans).count();
    Ok(SequenceMetrics {
        name: item.name.to_string(),
        frames: motion.len(),
        kinematic,
        geometric,
        beat_align,
        frozen_chunks,
        chunks: deltas.len(),
    })
}

fn all_metrics(skel: &Skeleton, items: &[EvalItem<'_>], cfg: &EvalConfig) -> Result<Vec<SequenceMetrics>> {
    let pool = worker_pool()?;
    pool.install(|| items.par_iter().map(|it| sequence_metrics(skel, it, cfg)).collect())
}

/// Scores a generated set against a reference set.
///
/// Per-sequence work runs on a pool capped by `LONGDANCE_NUM_WORKERS`;
/// results are gathered in input order so reports do not depend on
/// scheduling.
pub fn evaluate(
    skel: &Skeleton,
    generated: &[EvalItem<'_>],
    reference: &[EvalItem<'_>],
    cfg: &EvalConfig,
) -> Result<MetricsReport> {
    if generated.len() < 2 || reference.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "evaluation needs at least 2 generated and 2 reference sequences, got {} and {}",
            generated.len(),
            reference.len()
        )));
    }
    let gen = all_metrics(skel, generated, cfg)?;
    let refs = all_metrics(skel, reference, cfg)?;
    let kin = |s: &[SequenceMetrics]| s.iter().map(|m| m.kinematic.clone()).collect::<Vec<_>>();
    let geo = |s: &[SequenceMetrics]| s.iter().map(|m| m.geometric.clone()).collect::<Option<Vec<_>>>();
    let (gk, rk) = (kin(&gen), kin(&refs));
    let mut notes = vec![
        "freezing deltas are mean absolute frame-to-frame changes; pose uses rotation channels only".to_string(),
    ];
    let (fid_g, dist_g) = match (geo(&gen), geo(&refs)) {
        (Some(g), Some(r)) => (Some(frechet_distance(&g, &r)?), Some(diversity(&g)?)),
        _ => {
            notes.push("geometric features skipped: skeleton lacks the named joints".into());
            (None, None)
        }
    };
    let scores: Vec<&BeatAlignScore> = gen.iter().filter_map(|m| m.beat_align.as_ref()).collect();
    let silent = scores.iter().filter(|s| s.no_kinematic_beats).count();
    if silent > 0 {
        notes.push(format!("{silent} generated sequences had no kinematic beats and score 0"));
    }
    if scores.len() < gen.len() {
        notes.push(format!("{} generated sequences had no music beats", gen.len() - scores.len()));
    }
    let beat_align = if scores.is_empty() {
        0.0
    } else {
        scores.iter().map(|s| s.score).sum::<f64>() / scores.len() as f64
    };
    let frozen: usize = gen.iter().map(|m| m.frozen_chunks).sum();
    let chunks: usize = gen.iter().map(|m| m.chunks).sum();
    Ok(MetricsReport {
        fid_k: frechet_distance(&gk, &rk)?,
        fid_g,
        dist_k: diversity(&gk)?,
        dist_g,
        beat_align,
        freezing_rate: frozen as f64 / chunks as f64,
        config: *cfg,
        generated: gen,
        reference: refs,
        notes,
    })
}

/// A control beat grid: as many beats as `grid`, placed at distinct frames
/// drawn uniformly from `[0, frames)`.
pub fn shuffled_beats(grid: &BeatGrid, frames: usize, rng: &mut impl Rng) -> Result<BeatGrid> {
    let k = grid.len().min(frames);
    let mut picked = sample(rng, frames, k).into_vec();
    picked.sort_unstable();
    BeatGrid::new(picked, None)
}
