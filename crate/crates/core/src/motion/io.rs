//! Motion files.
//!
//! A motion file is a JSON header. Large sequences keep their frames in a
//! sidecar of little-endian `f32` values, frame-major, named by the header's
//! `payload` field (relative to the header). Small fixtures may instead embed
//! the frames inline under `frames`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::frame::{FrameLayout, MotionSequence, LAYOUT_VERSION};
use crate::error::{Error, Result};
use crate::io_util::{read_f32_le, write_atomic, write_f32_le};

pub const MOTION_FORMAT: &str = "longdance-motion";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MotionHeader {
    format: String,
    layout_version: u32,
    fps: f64,
    joints: usize,
    contacts: usize,
    frame_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payload: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frames: Option<Vec<Vec<f32>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MotionEncoding {
    /// JSON header plus binary sidecar.
    #[default]
    Binary,
    /// Everything inline in one JSON document.
    Json,
}

fn sidecar_path(header: &Path) -> PathBuf {
    header.with_extension("f32")
}

pub fn write_motion(path: impl AsRef<Path>, seq: &MotionSequence, enc: MotionEncoding) -> Result<()> {
    let path = path.as_ref();
    let layout = seq.layout();
    let mut header = MotionHeader {
        format: MOTION_FORMAT.into(),
        layout_version: LAYOUT_VERSION,
        fps: seq.fps(),
        joints: layout.joints,
        contacts: layout.contacts,
        frame_count: seq.len(),
        payload: None,
        frames: None,
    };
    match enc {
        MotionEncoding::Json => {
            header.frames = Some(seq.frames().map(|f| f.to_vec()).collect());
        }
        MotionEncoding::Binary => {
            let side = sidecar_path(path);
            write_f32_le(&side, seq.data())?;
            header.payload = Some(side.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    write_atomic(path, serde_json::to_string_pretty(&header)?.as_bytes())
}

pub fn read_motion(path: impl AsRef<Path>) -> Result<MotionSequence> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason,
    };
    let header: MotionHeader = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if header.format != MOTION_FORMAT {
        return Err(bad(format!("format `{}`", header.format)));
    }
    if header.layout_version != LAYOUT_VERSION {
        return Err(bad(format!("layout version {}", header.layout_version)));
    }
    if !(header.fps > 0.0) {
        return Err(bad(format!("fps {}", header.fps)));
    }
    let layout = FrameLayout::new(header.joints, header.contacts);
    let expected = header.frame_count * layout.dim();
    let data = match (header.payload, header.frames) {
        (Some(payload), None) => {
            let side = path.parent().unwrap_or(Path::new(".")).join(payload);
            read_f32_le(&side)?
        }
        (None, Some(frames)) => {
            if let Some(f) = frames.iter().find(|f| f.len() != layout.dim()) {
                return Err(Error::FrameLengthMismatch {
                    path: path.to_path_buf(),
                    expected: layout.dim(),
                    got: f.len(),
                });
            }
            frames.concat()
        }
        _ => return Err(bad("exactly one of `payload` or `frames` is required".into())),
    };
    if data.len() != expected {
        return Err(Error::FrameLengthMismatch {
            path: path.to_path_buf(),
            expected,
            got: data.len(),
        });
    }
    MotionSequence::new(header.fps, layout, data)
}
