use super::frame::MotionSequence;
use super::rotation::{rot6d_decode, Mat3, Rotation6D, Vec3};
use super::skeleton::Skeleton;
use crate::error::{Error, Result};

/// World positions of every joint.
///
/// Rotations are local to the parent; the root's rotation is global.
/// `position(j) = position(parent) + R_global(parent) * offset(j)`.
pub fn forward_kinematics(
    skel: &Skeleton,
    root_translation: &Vec3,
    rotations: &[Rotation6D],
) -> Result<Vec<Vec3>> {
    Ok(forward_kinematics_full(skel, root_translation, rotations)?.0)
}

/// Like [`forward_kinematics`] but also returns the global rotation of each joint.
pub fn forward_kinematics_full(
    skel: &Skeleton,
    root_translation: &Vec3,
    rotations: &[Rotation6D],
) -> Result<(Vec<Vec3>, Vec<Mat3>)> {
    let n = skel.num_joints();
    if rotations.len() != n {
        return Err(Error::LengthMismatch {
            what: "joint rotations",
            expected: n,
            got: rotations.len(),
        });
    }
    let mut positions = Vec::with_capacity(n);
    let mut globals: Vec<Mat3> = Vec::with_capacity(n);
    for (j, rot) in rotations.iter().enumerate() {
        let local = rot6d_decode(rot)?;
        match skel.parents()[j] {
            None => {
                positions.push(*root_translation);
                globals.push(local);
            }
            Some(p) => {
                let pos = positions[p] + globals[p] * skel.offsets()[j];
                positions.push(pos);
                globals.push(globals[p] * local);
            }
        }
    }
    Ok((positions, globals))
}

/// Joint positions of every frame, computed from root translation and rotations.
pub fn sequence_positions(skel: &Skeleton, seq: &MotionSequence) -> Result<Vec<Vec<Vec3>>> {
    if seq.layout().joints != skel.num_joints() {
        return Err(Error::LengthMismatch {
            what: "skeleton joints vs motion layout",
            expected: skel.num_joints(),
            got: seq.layout().joints,
        });
    }
    (0..seq.len())
        .map(|i| forward_kinematics(skel, &seq.root_translation(i), &seq.rotations(i)))
        .collect()
}

/// Forward-difference velocities, `(p[i+1] - p[i]) * fps`; the last frame
/// repeats the previous velocity.
pub fn velocities(positions: &[Vec<Vec3>], fps: f64) -> Result<Vec<Vec<Vec3>>> {
    if positions.len() < 2 {
        return Err(Error::TooShort {
            what: "velocities",
            needed: 2,
            got: positions.len(),
        });
    }
    let mut out: Vec<Vec<Vec3>> = positions
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| (b - a) * fps).collect())
        .collect();
    out.push(out.last().cloned().unwrap());
    Ok(out)
}

/// Velocities of the stored position channels of `seq`.
pub fn compute_velocities(seq: &MotionSequence) -> Result<Vec<Vec<Vec3>>> {
    let positions: Vec<Vec<Vec3>> = (0..seq.len()).map(|i| seq.stored_positions(i)).collect();
    velocities(&positions, seq.fps())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::frame::{assemble_frame, FrameLayout, FrameParts};
    use crate::motion::rotation::{axis_angle, rot6d_encode};

    fn chain() -> Skeleton {
        Skeleton::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![None, Some(0), Some(1)],
            vec![Vec3::zeros(), Vec3::y(), Vec3::y()],
            vec![2],
        )
        .unwrap()
    }

    #[test]
    fn identity_rotations_sum_offsets() {
        let skel = Skeleton::smpl24();
        let rots = vec![Rotation6D::IDENTITY; 24];
        let pos = forward_kinematics(&skel, &Vec3::zeros(), &rots).unwrap();
        for j in 0..24 {
            let mut expected = Vec3::zeros();
            let mut k = Some(j);
            while let Some(i) = k {
                expected += skel.offsets()[i];
                k = skel.parents()[i];
            }
            assert!((pos[j] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn two_link_chain_bent_at_root() {
        let mut rots = vec![Rotation6D::IDENTITY; 3];
        rots[0] = rot6d_encode(&axis_angle(&Vec3::x(), std::f64::consts::FRAC_PI_2)).unwrap();
        let pos = forward_kinematics(&chain(), &Vec3::zeros(), &rots).unwrap();
        assert!((pos[1] - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        assert!((pos[2] - Vec3::new(0.0, 0.0, 2.0)).norm() < 1e-12);

        // Bending the middle joint instead leaves the first link upright.
        let mut rots = vec![Rotation6D::IDENTITY; 3];
        rots[1] = rot6d_encode(&axis_angle(&Vec3::x(), std::f64::consts::FRAC_PI_2)).unwrap();
        let pos = forward_kinematics(&chain(), &Vec3::zeros(), &rots).unwrap();
        assert!((pos[2] - Vec3::new(0.0, 1.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn translation_equivariance() {
        let skel = Skeleton::toy5();
        let rots: Vec<_> = (0..5)
            .map(|j| rot6d_encode(&axis_angle(&Vec3::new(1.0, j as f64, 0.5), 0.3 * j as f64)).unwrap())
            .collect();
        let a = forward_kinematics(&skel, &Vec3::zeros(), &rots).unwrap();
        let v = Vec3::new(0.3, -1.2, 4.0);
        let b = forward_kinematics(&skel, &v, &rots).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            assert!((pb - pa - v).norm() < 1e-12);
        }
    }

    #[test]
    fn degenerate_rotation_propagates() {
        let mut rots = vec![Rotation6D::IDENTITY; 3];
        rots[2] = Rotation6D([0.0; 6]);
        assert!(matches!(
            forward_kinematics(&chain(), &Vec3::zeros(), &rots),
            Err(Error::DegenerateRotation(_))
        ));
    }

    fn seq_from_positions(positions: &[Vec<Vec3>], fps: f64) -> MotionSequence {
        let layout = FrameLayout::new(positions[0].len(), 1);
        let frames: Vec<Vec<f32>> = positions
            .iter()
            .map(|p| {
                let mut parts = FrameParts::zeros(layout);
                parts.positions = p.iter().map(|v| [v.x as f32, v.y as f32, v.z as f32]).collect();
                assemble_frame(layout, &parts).unwrap()
            })
            .collect();
        MotionSequence::from_frames(fps, layout, &frames).unwrap()
    }

    #[test]
    fn static_sequence_has_zero_velocity() {
        let p = vec![vec![Vec3::new(1.0, 2.0, 3.0); 2]; 10];
        let v = compute_velocities(&seq_from_positions(&p, 60.0)).unwrap();
        assert!(v.iter().flatten().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn linear_motion_has_constant_velocity() {
        let fps = 60.0;
        let p: Vec<Vec<Vec3>> = (0..30).map(|i| vec![Vec3::new(i as f64 / fps, 0.0, 0.0)]).collect();
        let v = velocities(&p, fps).unwrap();
        for vi in v.iter().flatten() {
            assert!((vi - Vec3::x()).norm() < 1e-9);
        }
    }

    #[test]
    fn sinusoid_matches_independent_difference() {
        let fps = 30.0;
        let p: Vec<Vec<Vec3>> = (0..50)
            .map(|i| {
                let t = i as f64 / fps;
                vec![Vec3::new((2.0 * t).sin(), (3.0 * t).cos(), t * t)]
            })
            .collect();
        let v = velocities(&p, fps).unwrap();
        for i in 0..50 {
            let (a, b) = if i + 1 < 50 { (i, i + 1) } else { (i - 1, i) };
            let expected = (p[b][0] - p[a][0]) * fps;
            assert_eq!(v[i][0], expected);
        }
    }

    #[test]
    fn single_frame_is_an_error() {
        let p = vec![vec![Vec3::zeros()]];
        assert!(matches!(velocities(&p, 60.0), Err(Error::TooShort { .. })));
    }
}
