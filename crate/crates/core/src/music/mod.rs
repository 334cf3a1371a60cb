//! Frame-aligned music features and beat grids.

mod beats;
mod features;
mod io;
mod synth;

pub use beats::{extract_beats, pick_peaks};
pub use features::{
    validate_spans, BeatGrid, ChannelSpan, MusicFeatureSequence, CHROMA, MFCC, MFCC_DELTA, ONSET,
    TEMPOGRAM,
};
pub use io::{ingest_features, write_features};
pub use synth::{
    beat_frames_for, standard_channel_map, synth_music, MusicSynthConfig, SYNTH_DIM,
};
