use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{sequence_positions, MotionSequence, Skeleton, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Kinematic,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub kind: FeatureKind,
    pub values: Vec<f64>,
}

/// Kinematic features of joint positions sampled at `fps`, length `2J + 1`:
/// per-joint mean speed, per-joint mean acceleration magnitude, and the
/// mean of `|v|^2 / 2` over frames and joints.
///
/// Velocities are forward differences, accelerations differences of those.
pub fn kinematic_features_from_positions(positions: &[Vec<Vec3>], fps: f64) -> Result<FeatureVector> {
    let n = positions.len();
    if n < 3 {
        return Err(Error::TooShort { what: "kinematic features", needed: 3, got: n });
    }
    let j = positions[0].len();
    let vel: Vec<Vec<Vec3>> = positions
        .windows(2)
        .map(|w| (0..j).map(|k| (w[1][k] - w[0][k]) * fps).collect())
        .collect();
    let mut speed = vec![0.0; j];
    let mut accel = vec![0.0; j];
    let mut energy = 0.0;
    for v in &vel {
        for k in 0..j {
            speed[k] += v[k].norm();
            energy += 0.5 * v[k].norm_squared();
        }
    }
    for w in vel.windows(2) {
        for k in 0..j {
            accel[k] += ((w[1][k] - w[0][k]) * fps).norm();
        }
    }
    let nv = vel.len() as f64;
    let na = (vel.len() - 1) as f64;
    let mut values: Vec<f64> = speed.iter().map(|s| s / nv).collect();
    values.extend(accel.iter().map(|a| a / na));
    values.push(energy / (nv * j as f64));
    Ok(FeatureVector { kind: FeatureKind::Kinematic, values })
}

/// [`kinematic_features_from_positions`] on forward-kinematics positions.
pub fn kinematic_features(skel: &Skeleton, seq: &MotionSequence) -> Result<FeatureVector> {
    kinematic_features_from_positions(&sequence_positions(skel, seq)?, seq.fps())
}

/// Number of geometric relations.
pub const GEOMETRIC_DIM: usize = 12;

/// Names of the geometric relations, in feature order.
pub const GEOMETRIC_NAMES: [&str; GEOMETRIC_DIM] = [
    "left_foot_in_front",
    "right_foot_in_front",
    "left_hand_above_neck",
    "right_hand_above_neck",
    "left_knee_bent",
    "right_knee_bent",
    "left_elbow_bent",
    "right_elbow_bent",
    "left_foot_raised",
    "right_foot_raised",
    "feet_crossed",
    "hands_wide",
];

/// A foot counts as in front when it is this far ahead of the body plane (m).
pub const IN_FRONT_MARGIN: f64 = 0.05;
/// A joint counts as bent when its interior angle is below this (degrees).
pub const BENT_ANGLE_DEG: f64 = 150.0;
/// A foot counts as raised when it is this much higher than the other (m).
pub const RAISED_MARGIN: f64 = 0.1;
/// Hands count as wide when apart by more than this many shoulder widths.
pub const WIDE_HANDS_RATIO: f64 = 1.5;

/// Joint indices the geometric relations refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeometricRig {
    pub pelvis: usize,
    pub neck: usize,
    pub hip: [usize; 2],
    pub knee: [usize; 2],
    pub ankle: [usize; 2],
    pub shoulder: [usize; 2],
    pub elbow: [usize; 2],
    pub wrist: [usize; 2],
    /// Index of the vertical axis.
    pub up: usize,
}

impl GeometricRig {
    /// Resolves joints by their SMPL names (`left_hip`, `right_wrist`, ...).
    pub fn from_skeleton(skel: &Skeleton) -> Result<Self> {
        let find = |name: &str| {
            skel.joint_index(name)
                .ok_or_else(|| Error::InvalidSkeleton(format!("geometric features need a `{name}` joint")))
        };
        let pair = |stem: &str| -> Result<[usize; 2]> {
            Ok([find(&format!("left_{stem}"))?, find(&format!("right_{stem}"))?])
        };
        Ok(Self {
            pelvis: find("pelvis")?,
            neck: find("neck")?,
            hip: pair("hip")?,
            knee: pair("knee")?,
            ankle: pair("ankle")?,
            shoulder: pair("shoulder")?,
            elbow: pair("elbow")?,
            wrist: pair("wrist")?,
            up: 1,
        })
    }
}

fn interior_angle_deg(a: &Vec3, joint: &Vec3, b: &Vec3) -> f64 {
    let u = a - joint;
    let v = b - joint;
    let c = u.dot(&v) / (u.norm() * v.norm()).max(1e-12);
    c.clamp(-1.0, 1.0).acos().to_degrees()
}

/// The twelve relations of one pose, as 0/1.
pub fn geometric_relations(rig: &GeometricRig, p: &[Vec3]) -> [f64; GEOMETRIC_DIM] {
    let mut up = Vec3::zeros();
    up[rig.up] = 1.0;
    let lateral = p[rig.hip[0]] - p[rig.hip[1]];
    let forward = lateral.cross(&up);
    let forward = forward / forward.norm().max(1e-12);
    let lateral = lateral / lateral.norm().max(1e-12);
    let h = |j: usize| p[j][rig.up];
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    let mut out = [0.0; GEOMETRIC_DIM];
    for s in 0..2 {
        let other = 1 - s;
        out[s] = b((p[rig.ankle[s]] - p[rig.pelvis]).dot(&forward) > IN_FRONT_MARGIN);
        out[2 + s] = b(h(rig.wrist[s]) > h(rig.neck));
        out[4 + s] = b(interior_angle_deg(&p[rig.hip[s]], &p[rig.knee[s]], &p[rig.ankle[s]]) < BENT_ANGLE_DEG);
        out[6 + s] = b(interior_angle_deg(&p[rig.shoulder[s]], &p[rig.elbow[s]], &p[rig.wrist[s]]) < BENT_ANGLE_DEG);
        out[8 + s] = b(h(rig.ankle[s]) - h(rig.ankle[other]) > RAISED_MARGIN);
    }
    out[10] = b((p[rig.ankle[0]] - p[rig.ankle[1]]).dot(&lateral) < 0.0);
    let shoulders = (p[rig.shoulder[0]] - p[rig.shoulder[1]]).norm();
    out[11] = b((p[rig.wrist[0]] - p[rig.wrist[1]]).norm() > WIDE_HANDS_RATIO * shoulders);
    out
}

/// Per-frame relations averaged over the sequence; every entry is in `[0, 1]`.
pub fn geometric_features_from_positions(rig: &GeometricRig, positions: &[Vec<Vec3>]) -> Result<FeatureVector> {
    if positions.is_empty() {
        return Err(Error::TooShort { what: "geometric features", needed: 1, got: 0 });
    }
    let mut acc = [0.0; GEOMETRIC_DIM];
    for p in positions {
        for (a, r) in acc.iter_mut().zip(geometric_relations(rig, p)) {
            *a += r;
        }
    }
    let n = positions.len() as f64;
    Ok(FeatureVector {
        kind: FeatureKind::Geometric,
        values: acc.iter().map(|a| a / n).collect(),
    })
}

pub fn geometric_features(skel: &Skeleton, seq: &MotionSequence) -> Result<FeatureVector> {
    let rig = GeometricRig::from_skeleton(skel)?;
    geometric_features_from_positions(&rig, &sequence_positions(skel, seq)?)
}
