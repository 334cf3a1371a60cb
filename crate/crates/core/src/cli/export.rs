use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util::write_atomic;
use crate::motion::{sequence_positions, MotionSequence, Skeleton, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    PositionsCsv,
    PreviewSvg,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positions-csv" => Ok(Self::PositionsCsv),
            "preview-svg" => Ok(Self::PreviewSvg),
            other => Err(Error::Unknown { what: "export format", name: other.into() }),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PositionRow {
    frame: usize,
    joint: usize,
    x: f64,
    y: f64,
    z: f64,
}

/// `frame,joint,x,y,z` rows of forward-kinematics positions.
pub fn write_positions_csv(path: &Path, positions: &[Vec<Vec3>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (frame, joints) in positions.iter().enumerate() {
        for (joint, p) in joints.iter().enumerate() {
            w.serialize(PositionRow { frame, joint, x: p.x, y: p.y, z: p.z })?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Parses a file written by [`write_positions_csv`].
pub fn read_positions_csv(path: &Path) -> Result<Vec<Vec<Vec3>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out: Vec<Vec<Vec3>> = Vec::new();
    for row in r.deserialize() {
        let row: PositionRow = row?;
        if row.frame == out.len() {
            out.push(Vec::new());
        }
        let frame = out.get_mut(row.frame).filter(|f| f.len() == row.joint).ok_or_else(|| {
            Error::InvalidArgument(format!("{}: rows out of order at frame {} joint {}", path.display(), row.frame, row.joint))
        })?;
        frame.push(Vec3::new(row.x, row.y, row.z));
    }
    Ok(out)
}

/// Front view (x right, y up) of one pose as a stick figure.
pub fn stick_figure_svg(skel: &Skeleton, pose: &[Vec3], bounds: ([f64; 2], [f64; 2])) -> String {
    const SIZE: f64 = 400.0;
    const MARGIN: f64 = 20.0;
    let ([x0, y0], [x1, y1]) = bounds;
    let scale = (SIZE - 2.0 * MARGIN) / (x1 - x0).max(y1 - y0).max(1e-9);
    let px = |p: &Vec3| (MARGIN + (p.x - x0) * scale, SIZE - MARGIN - (p.y - y0) * scale);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (j, parent) in skel.parents().iter().enumerate() {
        if let Some(p) = parent {
            let (ax, ay) = px(&pose[*p]);
            let (bx, by) = px(&pose[j]);
            let _ = writeln!(
                s,
                r#"<line x1="{ax:.2}" y1="{ay:.2}" x2="{bx:.2}" y2="{by:.2}" stroke="black" stroke-width="3" stroke-linecap="round"/>"#
            );
        }
    }
    for p in pose {
        let (x, y) = px(p);
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="crimson"/>"#);
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the export into `out_dir` and returns the files written:
/// `positions.csv`, or one `frame_NNNNN.svg` per frame.
pub fn export_motion(skel: &Skeleton, seq: &MotionSequence, format: ExportFormat, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let positions = sequence_positions(skel, seq)?;
    match format {
        ExportFormat::PositionsCsv => {
            let path = out_dir.join("positions.csv");
            write_positions_csv(&path, &positions)?;
            Ok(vec![path])
        }
        ExportFormat::PreviewSvg => {
            // One shared frame of reference so the figure does not jump.
            let mut lo = [f64::INFINITY; 2];
            let mut hi = [f64::NEG_INFINITY; 2];
            for p in positions.iter().flatten() {
                lo = [lo[0].min(p.x), lo[1].min(p.y)];
                hi = [hi[0].max(p.x), hi[1].max(p.y)];
            }
            positions
                .iter()
                .enumerate()
                .map(|(i, pose)| {
                    let path = out_dir.join(format!("frame_{i:05}.svg"));
                    write_atomic(&path, stick_figure_svg(skel, pose, (lo, hi)).as_bytes())?;
                    Ok(path)
                })
                .collect()
        }
    }
}
