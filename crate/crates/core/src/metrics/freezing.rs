use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::MotionSequence;

/// Length of the non-overlapping chunks the freezing test runs on.
pub const FREEZE_CHUNK: usize = 60;

/// Thresholds below which a chunk counts as frozen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreezingThresholds {
    /// Mean absolute per-frame change of the rotation channels.
    pub tau_pose: f64,
    /// Mean absolute per-frame change of the root translation channels (m).
    pub tau_trans: f64,
}

impl Default for FreezingThresholds {
    fn default() -> Self {
        Self { tau_pose: DEFAULT_TAU_POSE, tau_trans: DEFAULT_TAU_TRANS }
    }
}

/// Calibrated with `longdance calibrate-freezing` on the bundled
/// mixed-intensity fixture to a rate of 0.187.
pub const DEFAULT_TAU_POSE: f64 = 2.0952e-4;
pub const DEFAULT_TAU_TRANS: f64 = 2.3843e-5;

/// `(delta_pose, delta_trans)` for every complete chunk.
pub fn chunk_deltas(seq: &MotionSequence) -> Result<Vec<(f64, f64)>> {
    let n = seq.len();
    if n < FREEZE_CHUNK {
        return Err(Error::TooShort { what: "freezing rate", needed: FREEZE_CHUNK, got: n });
    }
    let layout = seq.layout();
    let rot = layout.rotations();
    let root = layout.root();
    let mean_abs_diff = |a: &[f32], b: &[f32]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).abs()).sum::<f64>()
    };
    Ok((0..n / FREEZE_CHUNK)
        .map(|c| {
            let (mut dp, mut dt) = (0.0, 0.0);
            for i in c * FREEZE_CHUNK..(c + 1) * FREEZE_CHUNK - 1 {
                let (a, b) = (seq.frame(i), seq.frame(i + 1));
                dp += mean_abs_diff(&a[rot.clone()], &b[rot.clone()]);
                dt += mean_abs_diff(&a[root.clone()], &b[root.clone()]);
            }
            let pairs = (FREEZE_CHUNK - 1) as f64;
            (dp / (pairs * rot.len() as f64), dt / (pairs * root.len() as f64))
        })
        .collect())
}

/// Fraction of chunks whose pose and translation changes are both at or
/// below the thresholds.
pub fn freezing_rate(seq: &MotionSequence, th: &FreezingThresholds) -> Result<f64> {
    let deltas = chunk_deltas(seq)?;
    let frozen = deltas
        .iter()
        .filter(|(p, t)| *p <= th.tau_pose && *t <= th.tau_trans)
        .count();
    Ok(frozen as f64 / deltas.len() as f64)
}

/// Result of threshold calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub thresholds: FreezingThresholds,
    pub achieved_rate: f64,
    pub target_rate: f64,
    /// Common scale applied to the reference medians.
    pub scale: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Chooses `tau = s * median(delta)` for both thresholds, with `s` the
/// smallest scale whose freezing rate over all reference chunks reaches
/// `target_rate`. The rate only changes where one chunk's scale-normalized
/// deltas cross the threshold, so that scale is an order statistic of the
/// per-chunk critical scales.
pub fn calibrate_thresholds(reference: &[MotionSequence], target_rate: f64) -> Result<Calibration> {
    if !(0.0..=1.0).contains(&target_rate) {
        return Err(Error::InvalidArgument(format!("target rate {target_rate} outside [0, 1]")));
    }
    let mut deltas = Vec::new();
    for s in reference {
        deltas.extend(chunk_deltas(s)?);
    }
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("no reference chunks".into()));
    }
    let mp = median(deltas.iter().map(|d| d.0).collect()).max(f64::MIN_POSITIVE);
    let mt = median(deltas.iter().map(|d| d.1).collect()).max(f64::MIN_POSITIVE);
    let mut critical: Vec<f64> = deltas.iter().map(|(p, t)| (p / mp).max(t / mt)).collect();
    critical.sort_by(f64::total_cmp);
    let n = critical.len();
    let needed = (target_rate * n as f64).ceil() as usize;
    // The nudge keeps the deciding chunk frozen despite division round-off.
    let scale = if needed == 0 { 0.0 } else { critical[needed - 1] * (1.0 + 1e-12) };
    let thresholds = FreezingThresholds { tau_pose: scale * mp, tau_trans: scale * mt };
    let mut frozen = 0usize;
    for (p, t) in &deltas {
        if *p <= thresholds.tau_pose && *t <= thresholds.tau_trans {
            frozen += 1;
        }
    }
    Ok(Calibration { thresholds, achieved_rate: frozen as f64 / n as f64, target_rate, scale })
}
