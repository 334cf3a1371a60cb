use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MFCC: &str = "mfcc";
pub const MFCC_DELTA: &str = "mfcc_delta";
pub const CHROMA: &str = "chroma";
pub const TEMPOGRAM: &str = "tempogram";
pub const ONSET: &str = "onset";

/// A named half-open range of feature channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpan {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

impl ChannelSpan {
    pub fn new(name: &str, start: usize, end: usize) -> Self {
        Self {
            name: name.to_string(),
            start,
            end,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Checks that `spans` tile `[0, dim)` without overlap or gaps.
pub fn validate_spans(spans: &[ChannelSpan], dim: usize) -> Result<()> {
    let mut sorted: Vec<&ChannelSpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    let mut cursor = 0;
    for s in sorted {
        if s.is_empty() {
            return Err(Error::SpanOverlap(format!("span `{}` is empty", s.name)));
        }
        if s.start < cursor {
            return Err(Error::SpanOverlap(format!(
                "span `{}` starts at {} inside a previous span ending at {cursor}",
                s.name, s.start
            )));
        }
        if s.start > cursor {
            return Err(Error::SpanOverlap(format!(
                "channels [{cursor}, {}) are not covered",
                s.start
            )));
        }
        cursor = s.end;
    }
    if cursor != dim {
        return Err(Error::SpanOverlap(format!(
            "spans cover [0, {cursor}) but dim is {dim}"
        )));
    }
    let mut names: Vec<&str> = spans.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::SpanOverlap("duplicate span names".into()));
    }
    Ok(())
}

/// Frame-aligned music features, one vector per motion frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicFeatureSequence {
    fps: f64,
    dim: usize,
    channel_map: Vec<ChannelSpan>,
    data: Vec<f32>,
}

impl MusicFeatureSequence {
    pub fn new(fps: f64, dim: usize, channel_map: Vec<ChannelSpan>, data: Vec<f32>) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidArgument(format!("fps must be positive, got {fps}")));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("feature dim must be positive".into()));
        }
        validate_spans(&channel_map, dim)?;
        if data.len() % dim != 0 {
            return Err(Error::LengthMismatch {
                what: "music payload (multiple of dim)",
                expected: dim * (data.len() / dim + 1),
                got: data.len(),
            });
        }
        Ok(Self {
            fps,
            dim,
            channel_map,
            data,
        })
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn channel_map(&self) -> &[ChannelSpan] {
        &self.channel_map
    }

    pub fn span(&self, name: &str) -> Option<&ChannelSpan> {
        self.channel_map.iter().find(|s| s.name == name)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// One channel across all frames.
    pub fn channel(&self, c: usize) -> Vec<f32> {
        self.data.iter().skip(c).step_by(self.dim).copied().collect()
    }

    /// Frames `[start, start + len)`; frames beyond the end are zero.
    pub fn window_padded(&self, start: usize, len: usize) -> Vec<f32> {
        let mut out = vec![0.0; len * self.dim];
        let avail = self.len().saturating_sub(start).min(len);
        if avail > 0 {
            out[..avail * self.dim]
                .copy_from_slice(&self.data[start * self.dim..(start + avail) * self.dim]);
        }
        out
    }
}

/// Music beat positions on the frame grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatGrid {
    beat_frames: Vec<usize>,
    bpm: Option<f64>,
}

impl BeatGrid {
    pub fn new(beat_frames: Vec<usize>, bpm: Option<f64>) -> Result<Self> {
        if beat_frames.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("beat frames must be strictly increasing".into()));
        }
        if let Some(b) = bpm {
            if !(b > 0.0 && b < 400.0) {
                return Err(Error::InvalidArgument(format!("bpm {b} outside (0, 400)")));
            }
        }
        Ok(Self { beat_frames, bpm })
    }

    pub fn empty() -> Self {
        Self {
            beat_frames: Vec::new(),
            bpm: None,
        }
    }

    /// Grid with tempo estimated from the median inter-beat interval.
    pub fn from_frames(beat_frames: Vec<usize>, fps: f64) -> Result<Self> {
        let bpm = if beat_frames.len() >= 2 {
            let mut gaps: Vec<usize> = beat_frames.windows(2).map(|w| w[1].saturating_sub(w[0])).collect();
            gaps.sort_unstable();
            let median = gaps[gaps.len() / 2] as f64;
            let bpm = 60.0 * fps / median;
            (bpm > 0.0 && bpm < 400.0).then_some(bpm)
        } else {
            None
        };
        Self::new(beat_frames, bpm)
    }

    pub fn frames(&self) -> &[usize] {
        &self.beat_frames
    }

    pub fn bpm(&self) -> Option<f64> {
        self.bpm
    }

    pub fn len(&self) -> usize {
        self.beat_frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beat_frames.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_validation() {
        let ok = vec![ChannelSpan::new("a", 0, 3), ChannelSpan::new("b", 3, 5)];
        assert!(validate_spans(&ok, 5).is_ok());
        let overlap = vec![ChannelSpan::new("a", 0, 3), ChannelSpan::new("b", 2, 5)];
        assert!(matches!(validate_spans(&overlap, 5), Err(Error::SpanOverlap(_))));
        let gap = vec![ChannelSpan::new("a", 0, 2), ChannelSpan::new("b", 3, 5)];
        assert!(validate_spans(&gap, 5).is_err());
        assert!(validate_spans(&ok, 6).is_err());
    }

    #[test]
    fn padded_window_zero_fills() {
        let seq = MusicFeatureSequence::new(
            60.0,
            2,
            vec![ChannelSpan::new("onset", 0, 2)],
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        assert_eq!(seq.window_padded(1, 3), vec![3.0, 4.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(seq.window_padded(5, 1), vec![0.0, 0.0]);
    }

    #[test]
    fn beat_grid_invariants() {
        assert!(BeatGrid::new(vec![0, 30, 30], None).is_err());
        assert!(BeatGrid::new(vec![0, 30], Some(500.0)).is_err());
        let g = BeatGrid::from_frames(vec![0, 30, 60, 90], 60.0).unwrap();
        assert_eq!(g.bpm(), Some(120.0));
    }
}
