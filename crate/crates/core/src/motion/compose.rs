use super::contacts::{label_foot_contacts, ContactConfig};
use super::frame::{assemble_frame, FrameLayout, FrameParts, MotionSequence};
use super::kinematics::{forward_kinematics, velocities};
use super::rotation::{Rotation6D, Vec3};
use super::skeleton::Skeleton;
use crate::error::{Error, Result};

fn f3(v: &Vec3) -> [f32; 3] {
    [v.x as f32, v.y as f32, v.z as f32]
}

/// Builds a complete motion sequence from root translations and local joint
/// rotations: positions come from forward kinematics, velocities from
/// forward differences and contacts from the foot-contact rule.
pub fn compose_sequence(
    skel: &Skeleton,
    fps: f64,
    roots: &[Vec3],
    rotations: &[Vec<Rotation6D>],
    contact_cfg: &ContactConfig,
) -> Result<MotionSequence> {
    if roots.len() != rotations.len() {
        return Err(Error::LengthMismatch {
            what: "root translations vs rotation frames",
            expected: rotations.len(),
            got: roots.len(),
        });
    }
    let positions = roots
        .iter()
        .zip(rotations)
        .map(|(r, rots)| forward_kinematics(skel, r, rots))
        .collect::<Result<Vec<_>>>()?;
    let vels = velocities(&positions, fps)?;
    let feet: Vec<Vec<Vec3>> = positions
        .iter()
        .map(|p| skel.foot_joints().iter().map(|f| p[*f]).collect())
        .collect();
    let contacts = label_foot_contacts(&feet, fps, contact_cfg);
    let layout = FrameLayout::for_skeleton(skel);
    let mut data = Vec::with_capacity(roots.len() * layout.dim());
    for i in 0..roots.len() {
        let parts = FrameParts {
            contacts: contacts[i].iter().map(|c| if *c { 1.0 } else { 0.0 }).collect(),
            root_translation: f3(&roots[i]),
            rotations: rotations[i].iter().map(|r| r.to_f32()).collect(),
            positions: positions[i].iter().map(f3).collect(),
            velocities: vels[i].iter().map(f3).collect(),
        };
        data.extend(assemble_frame(layout, &parts)?);
    }
    MotionSequence::new(fps, layout, data)
}
