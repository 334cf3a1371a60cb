use super::features::{BeatGrid, MusicFeatureSequence, ONSET};
use crate::error::{Error, Result};

/// Peak picking on the onset channel.
///
/// A frame is a candidate when it is a local maximum that exceeds an
/// adaptive threshold: the mean onset strength in a `±2*min_gap` window plus
/// a tenth of the global maximum. Candidates are accepted greedily from the
/// strongest down, rejecting any within `min_gap_frames` of an accepted one.
pub fn extract_beats(seq: &MusicFeatureSequence, min_gap_frames: usize) -> Result<BeatGrid> {
    let span = seq.span(ONSET).ok_or_else(|| Error::MissingChannel(ONSET.into()))?;
    let onset: Vec<f64> = seq.channel(span.start).into_iter().map(f64::from).collect();
    let frames = pick_peaks(&onset, min_gap_frames);
    BeatGrid::from_frames(frames, seq.fps())
}

pub fn pick_peaks(signal: &[f64], min_gap: usize) -> Vec<usize> {
    let n = signal.len();
    let global_max = signal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if n == 0 || !(global_max > 0.0) {
        return Vec::new();
    }
    let half = 2 * min_gap.max(1);
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in signal.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| {
            let v = signal[i];
            let left_ok = i == 0 || v > signal[i - 1];
            let right_ok = i + 1 == n || v >= signal[i + 1];
            if !(left_ok && right_ok) {
                return false;
            }
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let local_mean = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
            v > local_mean + 0.1 * global_max
        })
        .collect();
    candidates.sort_by(|&a, &b| signal[b].total_cmp(&signal[a]).then(a.cmp(&b)));
    let mut accepted: Vec<usize> = Vec::new();
    for c in candidates {
        if accepted.iter().all(|&a| a.abs_diff(c) >= min_gap) {
            accepted.push(c);
        }
    }
    accepted.sort_unstable();
    accepted
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::music::features::ChannelSpan;
    use crate::music::synth::{synth_music, MusicSynthConfig};

    fn onset_only(values: Vec<f32>) -> MusicFeatureSequence {
        MusicFeatureSequence::new(60.0, 1, vec![ChannelSpan::new(ONSET, 0, 1)], values).unwrap()
    }

    #[test]
    fn recovers_synthesized_grid() {
        for (bpm, seed) in [(80.0, 1), (97.5, 2), (120.0, 3), (135.0, 4)] {
            let (seq, grid) = synth_music(&MusicSynthConfig::new(bpm, 12.0, 60.0, seed)).unwrap();
            let found = extract_beats(&seq, 10).unwrap();
            assert_eq!(found.frames(), grid.frames(), "bpm {bpm}");
            assert!((found.bpm().unwrap() - bpm).abs() / bpm < 0.03);
        }
    }

    #[test]
    fn silent_onset_gives_empty_grid() {
        assert!(extract_beats(&onset_only(vec![0.0; 100]), 10).unwrap().is_empty());
    }

    #[test]
    fn close_impulses_keep_the_larger() {
        let mut v = vec![0.0; 50];
        v[20] = 0.6;
        v[23] = 1.0;
        let grid = extract_beats(&onset_only(v), 10).unwrap();
        assert_eq!(grid.frames(), &[23]);
    }

    #[test]
    fn missing_onset_channel_is_an_error() {
        let seq = MusicFeatureSequence::new(60.0, 1, vec![ChannelSpan::new("mfcc", 0, 1)], vec![1.0]).unwrap();
        assert!(matches!(extract_beats(&seq, 5), Err(Error::MissingChannel(_))));
    }
}
