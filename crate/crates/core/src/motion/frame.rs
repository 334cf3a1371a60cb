//! Flat per-frame motion encoding.
//!
//! Layout (version 1), for `J` joints and `C` contact labels:
//!
//! | span | content |
//! |------|---------|
//! | `[0, C)` | foot contacts |
//! | `[C, C+3)` | root translation (m) |
//! | `[C+3, C+3+6J)` | joint rotations, 6D, local to parent |
//! | `[.., +3J)` | joint positions, world frame (m) |
//! | `[.., +3J)` | joint velocities, world frame (m/s) |

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::rotation::{Rotation6D, Vec3};
use super::skeleton::Skeleton;
use crate::error::{Error, Result};

pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameLayout {
    pub joints: usize,
    pub contacts: usize,
}

impl FrameLayout {
    pub fn new(joints: usize, contacts: usize) -> Self {
        Self { joints, contacts }
    }

    pub fn for_skeleton(skel: &Skeleton) -> Self {
        Self::new(skel.num_joints(), skel.num_contacts())
    }

    pub fn dim(&self) -> usize {
        self.contacts + 3 + 12 * self.joints
    }

    pub fn contacts(&self) -> Range<usize> {
        0..self.contacts
    }

    pub fn root(&self) -> Range<usize> {
        self.contacts..self.contacts + 3
    }

    pub fn rotations(&self) -> Range<usize> {
        let s = self.root().end;
        s..s + 6 * self.joints
    }

    pub fn positions(&self) -> Range<usize> {
        let s = self.rotations().end;
        s..s + 3 * self.joints
    }

    pub fn velocities(&self) -> Range<usize> {
        let s = self.positions().end;
        s..s + 3 * self.joints
    }
}

/// Decoded parts of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameParts {
    pub contacts: Vec<f32>,
    pub root_translation: [f32; 3],
    pub rotations: Vec<[f32; 6]>,
    pub positions: Vec<[f32; 3]>,
    pub velocities: Vec<[f32; 3]>,
}

impl FrameParts {
    pub fn zeros(layout: FrameLayout) -> Self {
        Self {
            contacts: vec![0.0; layout.contacts],
            root_translation: [0.0; 3],
            rotations: vec![[0.0; 6]; layout.joints],
            positions: vec![[0.0; 3]; layout.joints],
            velocities: vec![[0.0; 3]; layout.joints],
        }
    }
}

pub fn assemble_frame(layout: FrameLayout, parts: &FrameParts) -> Result<Vec<f32>> {
    let check = |what: &'static str, expected: usize, got: usize| {
        if expected == got {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                what,
                expected,
                got,
            })
        }
    };
    check("contacts", layout.contacts, parts.contacts.len())?;
    check("rotations", layout.joints, parts.rotations.len())?;
    check("positions", layout.joints, parts.positions.len())?;
    check("velocities", layout.joints, parts.velocities.len())?;
    let mut out = Vec::with_capacity(layout.dim());
    out.extend_from_slice(&parts.contacts);
    out.extend_from_slice(&parts.root_translation);
    out.extend(parts.rotations.iter().flatten());
    out.extend(parts.positions.iter().flatten());
    out.extend(parts.velocities.iter().flatten());
    Ok(out)
}

pub fn disassemble_frame(layout: FrameLayout, flat: &[f32]) -> Result<FrameParts> {
    if flat.len() != layout.dim() {
        return Err(Error::LengthMismatch {
            what: "frame",
            expected: layout.dim(),
            got: flat.len(),
        });
    }
    let triples = |r: Range<usize>| -> Vec<[f32; 3]> {
        flat[r].chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
    };
    Ok(FrameParts {
        contacts: flat[layout.contacts()].to_vec(),
        root_translation: triples(layout.root())[0],
        rotations: flat[layout.rotations()]
            .chunks_exact(6)
            .map(|c| [c[0], c[1], c[2], c[3], c[4], c[5]])
            .collect(),
        positions: triples(layout.positions()),
        velocities: triples(layout.velocities()),
    })
}

/// Frame-major motion at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    fps: f64,
    layout: FrameLayout,
    data: Vec<f32>,
}

pub const DEFAULT_FPS: f64 = 60.0;

impl MotionSequence {
    pub fn new(fps: f64, layout: FrameLayout, data: Vec<f32>) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidArgument(format!("fps must be positive, got {fps}")));
        }
        if data.len() % layout.dim() != 0 {
            return Err(Error::LengthMismatch {
                what: "motion payload (multiple of frame dim)",
                expected: layout.dim() * (data.len() / layout.dim() + 1),
                got: data.len(),
            });
        }
        Ok(Self { fps, layout, data })
    }

    pub fn from_frames(fps: f64, layout: FrameLayout, frames: &[Vec<f32>]) -> Result<Self> {
        let mut data = Vec::with_capacity(frames.len() * layout.dim());
        for f in frames {
            if f.len() != layout.dim() {
                return Err(Error::LengthMismatch {
                    what: "frame",
                    expected: layout.dim(),
                    got: f.len(),
                });
            }
            data.extend_from_slice(f);
        }
        Self::new(fps, layout, data)
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn layout(&self) -> FrameLayout {
        self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.layout.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        let d = self.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim())
    }

    /// Frames `[start, end)` as a new sequence.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.len() {
            return Err(Error::InvalidArgument(format!(
                "frame range {start}..{end} outside 0..{}",
                self.len()
            )));
        }
        let d = self.dim();
        Self::new(self.fps, self.layout, self.data[start * d..end * d].to_vec())
    }

    pub fn push_frames(&mut self, flat: &[f32]) -> Result<()> {
        if flat.len() % self.dim() != 0 {
            return Err(Error::LengthMismatch {
                what: "appended frames",
                expected: self.dim(),
                got: flat.len() % self.dim(),
            });
        }
        self.data.extend_from_slice(flat);
        Ok(())
    }

    pub fn truncate(&mut self, frames: usize) {
        self.data.truncate(frames * self.dim());
    }

    pub fn root_translation(&self, i: usize) -> Vec3 {
        let r = &self.frame(i)[self.layout.root()];
        Vec3::new(r[0].into(), r[1].into(), r[2].into())
    }

    pub fn rotations(&self, i: usize) -> Vec<Rotation6D> {
        self.frame(i)[self.layout.rotations()]
            .chunks_exact(6)
            .map(|c| Rotation6D(std::array::from_fn(|k| f64::from(c[k]))))
            .collect()
    }

    /// Stored position channels of frame `i`.
    pub fn stored_positions(&self, i: usize) -> Vec<Vec3> {
        self.frame(i)[self.layout.positions()]
            .chunks_exact(3)
            .map(|c| Vec3::new(c[0].into(), c[1].into(), c[2].into()))
            .collect()
    }
}
