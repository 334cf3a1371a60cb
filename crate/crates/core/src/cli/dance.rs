//! Procedural beat-locked dances.
//!
//! A dance is a chain of keyframe poses, one per beat. Between beats every
//! joint angle and the root sway follow `s(u) = u - sin(2 pi u) / (2 pi)`,
//! whose derivative vanishes at both ends, so the body comes to rest exactly
//! on each beat and kinetic-speed minima land on the beat grid. Moves are
//! pairs of poses the dancer alternates between; a new move is drawn every
//! four-beat bar from the genre's move family. Root height is set each frame
//! so the lowest foot touches the ground; one-legged moves return to both
//! feet between sides so the supporting foot never changes mid-beat.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{
    compose_sequence, euler_zyx, forward_kinematics, rot6d_encode, ContactConfig, MotionSequence, Rotation6D,
    Skeleton, Vec3,
};

/// Beats per move.
pub const BAR_BEATS: usize = 4;
/// Height of the lowest foot joint above the ground (m).
pub const FOOT_CLEARANCE: f64 = 0.02;

/// Eased beat-to-beat progress; zero slope at `u = 0` and `u = 1`.
pub fn beat_profile(u: f64) -> f64 {
    u - (TAU * u).sin() / TAU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DanceConfig {
    pub bpm: f64,
    pub duration_s: f64,
    pub fps: f64,
    pub genre: usize,
    pub seed: u64,
    /// Chance that a bar is danced at rest intensity instead of fully.
    pub rest_probability: f64,
    /// Intensity of rest bars, relative to a full move.
    pub rest_intensity: f64,
}

impl Default for DanceConfig {
    fn default() -> Self {
        Self {
            bpm: 120.0,
            duration_s: 20.0,
            fps: 60.0,
            genre: 0,
            seed: 0,
            rest_probability: 0.0,
            rest_intensity: 0.02,
        }
    }
}

/// Joint angles (radians, applied as `Rz Ry Rx`) plus a root sway offset.
#[derive(Debug, Clone, PartialEq)]
struct Pose {
    angles: Vec<[f64; 3]>,
    sway: [f64; 2],
}

impl Pose {
    fn neutral(j: usize) -> Self {
        Self { angles: vec![[0.0; 3]; j], sway: [0.0; 2] }
    }

    fn lerp(&self, other: &Self, w: f64) -> Self {
        let mix = |a: f64, b: f64| a + (b - a) * w;
        Self {
            angles: self
                .angles
                .iter()
                .zip(&other.angles)
                .map(|(a, b)| [mix(a[0], b[0]), mix(a[1], b[1]), mix(a[2], b[2])])
                .collect(),
            sway: [mix(self.sway[0], other.sway[0]), mix(self.sway[1], other.sway[1])],
        }
    }
}

/// Joint indices the moves drive.
struct Rig {
    pelvis: usize,
    spine: usize,
    hip: [usize; 2],
    knee: [usize; 2],
    shoulder: [usize; 2],
    elbow: [usize; 2],
    head: usize,
}

impl Rig {
    fn new(skel: &Skeleton) -> Result<Self> {
        let f = |n: &str| {
            skel.joint_index(n)
                .ok_or_else(|| Error::InvalidSkeleton(format!("dance synthesis needs a `{n}` joint")))
        };
        Ok(Self {
            pelvis: f("pelvis")?,
            spine: f("spine2")?,
            hip: [f("left_hip")?, f("right_hip")?],
            knee: [f("left_knee")?, f("right_knee")?],
            shoulder: [f("left_shoulder")?, f("right_shoulder")?],
            elbow: [f("left_elbow")?, f("right_elbow")?],
            head: f("head")?,
        })
    }
}

/// Side sign: left limbs point to +x, right limbs to -x.
const SIDE: [f64; 2] = [1.0, -1.0];

/// Arms hanging at the sides with softly bent elbows.
fn rest_pose(rig: &Rig, j: usize) -> Pose {
    let mut p = Pose::neutral(j);
    for s in 0..2 {
        p.angles[rig.shoulder[s]][2] = -SIDE[s] * 1.25;
        p.angles[rig.elbow[s]][1] = SIDE[s] * 0.3;
        p.angles[rig.knee[s]][0] = 0.08;
    }
    p
}

/// Number of moves in every family.
pub const MOVES_PER_FAMILY: usize = 4;
/// Number of distinct move families; genres cycle through them.
pub const MOVE_FAMILIES: usize = 2;

/// The two poses of move `m` of `family` at amplitude `a`; `phase` picks
/// which one.
fn move_pose(rig: &Rig, base: &Pose, family: usize, m: usize, phase: usize, a: f64) -> Pose {
    let mut p = base.clone();
    let side = phase % 2;
    let sgn = if side == 0 { 1.0 } else { -1.0 };
    let other = 1 - side;
    match (family % MOVE_FAMILIES, m % MOVES_PER_FAMILY) {
        // Arm family.
        (0, 0) => {
            // Both arms pump overhead and back down.
            let up = if side == 0 { 1.0 } else { 0.2 };
            for s in 0..2 {
                p.angles[rig.shoulder[s]][2] = -SIDE[s] * (1.25 - 1.9 * up * a);
                p.angles[rig.elbow[s]][1] = SIDE[s] * (0.3 + 0.9 * (1.0 - up) * a);
            }
            p.angles[rig.knee[0]][0] = 0.08 + 0.3 * (1.0 - up) * a;
            p.angles[rig.knee[1]][0] = 0.08 + 0.3 * (1.0 - up) * a;
        }
        (0, 1) => {
            // Alternating single-arm wave with a lean toward it.
            p.angles[rig.shoulder[side]][2] = -SIDE[side] * (1.25 - 2.2 * a);
            p.angles[rig.elbow[side]][1] = SIDE[side] * 0.2;
            p.angles[rig.shoulder[other]][2] = -SIDE[other] * 1.1;
            p.angles[rig.spine][2] = SIDE[side] * 0.2 * a;
            p.sway[0] = SIDE[side] * 0.06 * a;
        }
        (0, 2) => {
            // Claps in front of the chest, then arms open.
            for s in 0..2 {
                if side == 0 {
                    p.angles[rig.shoulder[s]][1] = SIDE[s] * 1.2 * a;
                    p.angles[rig.shoulder[s]][2] = -SIDE[s] * 0.3;
                    p.angles[rig.elbow[s]][1] = SIDE[s] * 0.9 * a;
                } else {
                    p.angles[rig.shoulder[s]][2] = -SIDE[s] * (1.25 - 1.1 * a);
                    p.angles[rig.shoulder[s]][1] = -SIDE[s] * 0.3 * a;
                }
            }
        }
        (0, _) => {
            // Torso twist with arms swinging.
            p.angles[rig.spine][1] = sgn * 0.5 * a;
            p.angles[rig.pelvis][1] = sgn * 0.15 * a;
            p.angles[rig.head][1] = -sgn * 0.2 * a;
            for s in 0..2 {
                p.angles[rig.shoulder[s]][2] = -SIDE[s] * (1.25 - 0.8 * a);
                p.angles[rig.shoulder[s]][1] = sgn * 0.6 * a;
            }
        }
        // Leg family. One-legged moves stand on both feet every other
        // beat and alternate legs every two beats.
        (_, 2) => {
            // Deep squat and rise.
            let down = if side == 0 { 1.0 } else { 0.1 };
            for s in 0..2 {
                p.angles[rig.hip[s]][0] = -0.9 * down * a;
                p.angles[rig.knee[s]][0] = 0.08 + 1.5 * down * a;
                p.angles[rig.shoulder[s]][0] = -0.9 * down * a;
            }
            p.angles[rig.spine][0] = 0.3 * down * a;
        }
        _ if phase % 2 == 1 => bounce(rig, &mut p, a),
        (_, m) => {
            let leg = (phase / 2) % 2;
            let sgn = SIDE[leg];
            match m {
                0 => {
                    // Side step: one leg opens, body sways over it.
                    p.angles[rig.hip[leg]][2] = SIDE[leg] * 0.35 * a;
                    p.sway[0] = SIDE[leg] * 0.12 * a;
                }
                1 => {
                    // Knee lift with the opposite arm.
                    p.angles[rig.hip[leg]][0] = -1.3 * a;
                    p.angles[rig.knee[leg]][0] = 1.5 * a;
                    p.angles[rig.shoulder[1 - leg]][0] = -0.6 * a;
                    p.angles[rig.spine][0] = 0.1 * a;
                }
                _ => {
                    // Front kick, travelling forward and back.
                    p.angles[rig.hip[leg]][0] = -0.9 * a;
                    p.angles[rig.knee[leg]][0] = 0.1;
                    p.angles[rig.spine][0] = -0.15 * a;
                    p.sway[1] = sgn * 0.1 * a;
                }
            }
        }
    }
    if family % MOVE_FAMILIES == 0 && m % MOVES_PER_FAMILY != 0 && side == 1 {
        bounce(rig, &mut p, a);
    }
    p
}

/// Both knees dip on the off-beat.
fn bounce(rig: &Rig, p: &mut Pose, a: f64) {
    for s in 0..2 {
        p.angles[rig.hip[s]][0] = -0.2 * a;
        p.angles[rig.knee[s]][0] = 0.08 + 0.4 * a;
    }
}

/// Beat frames `round(k * period)` continued past the end of the sequence.
fn extended_beats(bpm: f64, fps: f64, frames: usize) -> Vec<usize> {
    let period = 60.0 * fps / bpm;
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let b = (k as f64 * period).round() as usize;
        out.push(b);
        if b >= frames {
            break;
        }
        k += 1;
    }
    out
}

/// Synthesizes one dance on `skel`, beat-locked to `bpm` starting at
/// frame 0 (the beat grid of [`crate::music::synth_music`]).
pub fn synth_dance(skel: &Skeleton, cfg: &DanceConfig, contacts: &ContactConfig) -> Result<MotionSequence> {
    if !(cfg.bpm > 0.0 && cfg.fps > 0.0 && cfg.duration_s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bpm {}, fps {} and duration {} must be positive",
            cfg.bpm, cfg.fps, cfg.duration_s
        )));
    }
    let rig = Rig::new(skel)?;
    let j = skel.num_joints();
    let n = (cfg.duration_s * cfg.fps).round() as usize;
    let beats = extended_beats(cfg.bpm, cfg.fps, n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let base = rest_pose(&rig, j);
    let amplitude = rng.random_range(0.75..1.15);
    let family = cfg.genre % MOVE_FAMILIES;

    let mut keys = Vec::with_capacity(beats.len());
    let mut mv = 0;
    let mut intensity = 1.0;
    for k in 0..beats.len() {
        if k % BAR_BEATS == 0 {
            mv = rng.random_range(0..MOVES_PER_FAMILY);
            intensity = if rng.random_bool(cfg.rest_probability.clamp(0.0, 1.0)) {
                cfg.rest_intensity
            } else {
                rng.random_range(0.85..1.15)
            };
        }
        let pose = move_pose(&rig, &base, family, mv, k, amplitude);
        keys.push(base.lerp(&pose, intensity));
    }

    let mut roots = Vec::with_capacity(n);
    let mut rotations = Vec::with_capacity(n);
    let mut seg = 0;
    for i in 0..n {
        while beats[seg + 1] <= i {
            seg += 1;
        }
        let (b0, b1) = (beats[seg], beats[seg + 1]);
        let pose = keys[seg].lerp(&keys[seg + 1], beat_profile((i - b0) as f64 / (b1 - b0) as f64));
        let rots = pose
            .angles
            .iter()
            .map(|a| rot6d_encode(&euler_zyx(a[0], a[1], a[2])))
            .collect::<Result<Vec<Rotation6D>>>()?;
        let at_origin = forward_kinematics(skel, &Vec3::zeros(), &rots)?;
        let feet: Vec<f64> = skel.foot_joints().iter().map(|f| at_origin[*f].y).collect();
        roots.push(Vec3::new(pose.sway[0], FOOT_CLEARANCE - feet.iter().copied().fold(f64::INFINITY, f64::min), pose.sway[1]));
        rotations.push(rots);
    }
    compose_sequence(skel, cfg.fps, &roots, &rotations, contacts)
}
