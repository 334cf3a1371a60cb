//! Writes joint positions of a synthetic dance as CSV plus SVG stick
//! figures for the first second. Pass an output directory (default
//! `preview`).

use std::path::PathBuf;

use longdance::cli::{export_motion, synth_dance, DanceConfig, ExportFormat};
use longdance::motion::{ContactConfig, Skeleton};

fn main() -> longdance::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "preview".into()));
    let skel = Skeleton::smpl24();
    let dance = synth_dance(&skel, &DanceConfig { duration_s: 1.0, ..DanceConfig::default() }, &ContactConfig::default())?;
    let csv = export_motion(&skel, &dance, ExportFormat::PositionsCsv, &out)?;
    let svgs = export_motion(&skel, &dance, ExportFormat::PreviewSvg, &out.join("frames"))?;
    println!("{}", csv[0].display());
    println!("{} frames under {}", svgs.len(), out.join("frames").display());
    Ok(())
}
