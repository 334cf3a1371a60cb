//! Skeleton, motion representation and kinematics.

mod compose;
mod contacts;
mod frame;
mod io;
mod kinematics;
mod rotation;
mod skeleton;

pub use compose::compose_sequence;
pub use contacts::{label_foot_contacts, ContactConfig, UpAxis};
pub use frame::{
    assemble_frame, disassemble_frame, FrameLayout, FrameParts, MotionSequence, DEFAULT_FPS,
    LAYOUT_VERSION,
};
pub use io::{read_motion, write_motion, MotionEncoding};
pub use kinematics::{
    compute_velocities, forward_kinematics, forward_kinematics_full, sequence_positions,
    velocities,
};
pub use rotation::{
    axis_angle, euler_zyx, rot6d_decode, rot6d_encode, Mat3, Rotation6D, Vec3, DEGENERATE_EPS,
};
pub use skeleton::{Skeleton, SkeletonFile};
