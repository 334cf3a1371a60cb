//! Differentiable rotation decoding and forward kinematics on batched tensors.

use candle_core::{Tensor, D};

use crate::error::{Error, Result};
use crate::motion::{FrameLayout, Skeleton};

/// Keeps the norm differentiable at zero.
const NORM_EPS: f64 = 1e-12;

fn component(x: &Tensor, i: usize) -> Result<Tensor> {
    Ok(x.narrow(D::Minus1, i, 1)?)
}

fn normalize(x: &Tensor) -> Result<Tensor> {
    let n = (x.sqr()?.sum_keepdim(D::Minus1)? + NORM_EPS)?.sqrt()?;
    Ok(x.broadcast_div(&n)?)
}

fn cross(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (a0, a1, a2) = (component(a, 0)?, component(a, 1)?, component(a, 2)?);
    let (b0, b1, b2) = (component(b, 0)?, component(b, 1)?, component(b, 2)?);
    let c0 = ((&a1 * &b2)? - (&a2 * &b1)?)?;
    let c1 = ((&a2 * &b0)? - (&a0 * &b2)?)?;
    let c2 = ((&a0 * &b1)? - (&a1 * &b0)?)?;
    Ok(Tensor::cat(&[c0, c1, c2], D::Minus1)?)
}

/// Gram–Schmidt decoding of `[.., 6]` into rotation matrices `[.., 3, 3]`
/// (last index = column).
pub fn rot6d_to_matrix(r: &Tensor) -> Result<Tensor> {
    let a1 = r.narrow(D::Minus1, 0, 3)?;
    let a2 = r.narrow(D::Minus1, 3, 3)?;
    let b1 = normalize(&a1)?;
    let proj = (&b1 * &a2)?.sum_keepdim(D::Minus1)?;
    let b2 = normalize(&(a2 - b1.broadcast_mul(&proj)?)?)?;
    let b3 = cross(&b1, &b2)?;
    Ok(Tensor::stack(&[b1, b2, b3], D::Minus1)?)
}

/// `A B` for stacks of 3×3 matrices.
fn matmul3(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let a = a.unsqueeze(D::Minus1)?;
    let b = b.unsqueeze(a.rank() - 3)?;
    Ok(a.broadcast_mul(&b)?.sum(D::Minus2)?)
}

/// `A v` for stacks of 3×3 matrices and a constant vector.
fn matvec3(a: &Tensor, v: &Tensor) -> Result<Tensor> {
    Ok(a.broadcast_mul(v)?.sum(D::Minus1)?)
}

/// Joint positions `[.., J, 3]` from root translation `[.., 3]` and local
/// 6D rotations `[.., J, 6]`.
pub fn forward_kinematics_tensor(skel: &Skeleton, root: &Tensor, rot6: &Tensor) -> Result<Tensor> {
    let j = skel.num_joints();
    if rot6.dim(D::Minus2)? != j || rot6.dim(D::Minus1)? != 6 {
        return Err(Error::Shape(format!(
            "rotations {:?} for a {j}-joint skeleton",
            rot6.dims()
        )));
    }
    let local = rot6d_to_matrix(rot6)?;
    let axis = local.rank() - 3;
    let mut globals: Vec<Tensor> = Vec::with_capacity(j);
    let mut positions: Vec<Tensor> = Vec::with_capacity(j);
    for (i, parent) in skel.parents().iter().enumerate() {
        let r = local.narrow(axis, i, 1)?.squeeze(axis)?;
        match parent {
            None => {
                positions.push(root.clone());
                globals.push(r);
            }
            Some(p) => {
                let o = skel.offsets()[i];
                let offset = Tensor::new(&[o.x, o.y, o.z], root.device())?.to_dtype(root.dtype())?;
                let pos = (&positions[*p] + matvec3(&globals[*p], &offset)?)?;
                globals.push(matmul3(&globals[*p], &r)?);
                positions.push(pos);
            }
        }
    }
    Ok(Tensor::stack(&positions, axis)?)
}

/// Joint positions `[B, F, J, 3]` of motion frames `[B, F, dim]`, taken from
/// the root-translation and rotation channels.
pub fn frame_positions(skel: &Skeleton, layout: FrameLayout, frames: &Tensor) -> Result<Tensor> {
    let (b, f, d) = frames.dims3()?;
    if d != layout.dim() {
        return Err(Error::LengthMismatch {
            what: "motion frame width",
            expected: layout.dim(),
            got: d,
        });
    }
    let root = frames.narrow(2, layout.root().start, 3)?;
    let rot = frames
        .narrow(2, layout.rotations().start, 6 * layout.joints)?
        .reshape((b, f, layout.joints, 6))?;
    forward_kinematics_tensor(skel, &root, &rot)
}
