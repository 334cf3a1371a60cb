//! Music feature files: a JSON header plus a little-endian `f32` payload,
//! frame-major, in a sidecar named by `payload`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::features::{validate_spans, ChannelSpan, MusicFeatureSequence};
use crate::error::{Error, Result};
use crate::io_util::{read_f32_le, write_atomic, write_f32_le};

pub const MUSIC_FORMAT: &str = "longdance-music";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MusicHeader {
    format: String,
    fps: f64,
    dim: usize,
    frame_count: usize,
    channel_map: Vec<ChannelSpan>,
    payload: String,
}

fn sidecar_path(header: &Path) -> PathBuf {
    header.with_extension("f32")
}

pub fn write_features(path: impl AsRef<Path>, seq: &MusicFeatureSequence) -> Result<()> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    write_f32_le(&side, seq.data())?;
    let header = MusicHeader {
        format: MUSIC_FORMAT.into(),
        fps: seq.fps(),
        dim: seq.dim(),
        frame_count: seq.len(),
        channel_map: seq.channel_map().to_vec(),
        payload: side.file_name().unwrap().to_string_lossy().into_owned(),
    };
    write_atomic(path, serde_json::to_string_pretty(&header)?.as_bytes())
}

pub fn ingest_features(path: impl AsRef<Path>) -> Result<MusicFeatureSequence> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason,
    };
    let header: MusicHeader = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if header.format != MUSIC_FORMAT {
        return Err(bad(format!("format `{}`", header.format)));
    }
    if !(header.fps > 0.0) || header.dim == 0 {
        return Err(bad(format!("fps {} / dim {}", header.fps, header.dim)));
    }
    validate_spans(&header.channel_map, header.dim)?;
    let side = path.parent().unwrap_or(Path::new(".")).join(&header.payload);
    let data = read_f32_le(&side)?;
    let expected = header.frame_count * header.dim;
    if data.len() != expected {
        return Err(Error::FrameLengthMismatch {
            path: side,
            expected,
            got: data.len(),
        });
    }
    MusicFeatureSequence::new(header.fps, header.dim, header.channel_map, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::music::synth::{synth_music, MusicSynthConfig};

    #[test]
    fn write_then_read_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let (seq, _) = synth_music(&MusicSynthConfig::new(120.0, 4.0, 60.0, 9)).unwrap();
        write_features(&p, &seq).unwrap();
        let back = ingest_features(&p).unwrap();
        assert_eq!(back.len(), 240);
        assert_eq!(back.dim(), 83);
        let bits = |s: &MusicFeatureSequence| s.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&seq));
        assert_eq!(back.channel_map(), seq.channel_map());
    }

    #[test]
    fn custom_width_is_read_from_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let spans = vec![ChannelSpan::new("mfcc", 0, 30), ChannelSpan::new("onset", 30, 35)];
        let seq = MusicFeatureSequence::new(60.0, 35, spans, vec![0.5; 35 * 240]).unwrap();
        write_features(&p, &seq).unwrap();
        let back = ingest_features(&p).unwrap();
        assert_eq!((back.dim(), back.len()), (35, 240));
    }

    fn write_header(dir: &Path, channel_map: &str, frame_count: usize, floats: usize) -> PathBuf {
        let p = dir.join("h.json");
        std::fs::write(
            &p,
            format!(
                r#"{{"format":"longdance-music","fps":60.0,"dim":4,"frame_count":{frame_count},
                    "channel_map":{channel_map},"payload":"h.f32"}}"#
            ),
        )
        .unwrap();
        write_f32_le(&dir.join("h.f32"), &vec![0.0; floats]).unwrap();
        p
    }

    #[test]
    fn distinct_errors_for_distinct_defects() {
        let dir = tempfile::tempdir().unwrap();
        let good = r#"[{"name":"a","start":0,"end":2},{"name":"onset","start":2,"end":4}]"#;
        let overlap = r#"[{"name":"a","start":0,"end":3},{"name":"onset","start":2,"end":4}]"#;

        let p = write_header(dir.path(), overlap, 2, 8);
        assert!(matches!(ingest_features(&p), Err(Error::SpanOverlap(_))));

        let p = write_header(dir.path(), good, 3, 8);
        assert!(matches!(ingest_features(&p), Err(Error::FrameLengthMismatch { .. })));

        std::fs::write(&p, "{not json").unwrap();
        assert!(matches!(ingest_features(&p), Err(Error::MalformedHeader { .. })));

        let p = write_header(dir.path(), good, 2, 8);
        assert_eq!(ingest_features(&p).unwrap().len(), 2);
    }
}
