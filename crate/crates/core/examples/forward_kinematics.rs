//! Poses the SMPL skeleton from 6D joint rotations and prints where the
//! feet and head end up.

use longdance::motion::{axis_angle, forward_kinematics, rot6d_decode, rot6d_encode, Skeleton, Vec3};

fn main() -> longdance::Result<()> {
    let skel = Skeleton::smpl24();
    let mut rots = vec![rot6d_encode(&nalgebra::Matrix3::identity())?; skel.num_joints()];
    let knee = skel.joint_index("left_knee").expect("smpl24 has a left knee");
    let bend = axis_angle(&Vec3::x(), 1.2);
    rots[knee] = rot6d_encode(&bend)?;
    println!("6D encoding of the knee bend: {:?}", rots[knee].0);
    println!("decode error: {:.2e}", (rot6d_decode(&rots[knee])? - bend).abs().max());

    let pos = forward_kinematics(&skel, &Vec3::new(0.0, 0.93, 0.0), &rots)?;
    for name in ["head", "left_foot", "right_foot"] {
        let j = skel.joint_index(name).unwrap();
        println!("{name:>10}: ({:+.3}, {:+.3}, {:+.3})", pos[j].x, pos[j].y, pos[j].z);
    }
    Ok(())
}
