use longdance::cli::BEAT_MIN_GAP;
use longdance::music::{
    beat_frames_for, extract_beats, ingest_features, synth_music, write_features, MusicSynthConfig, ONSET,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn synthetic_beats_are_recovered_exactly(bpm in 80.0f64..135.0, seed in 0u64..1000, genre in 0usize..3) {
        let cfg = MusicSynthConfig { genre, ..MusicSynthConfig::new(bpm, 10.0, 60.0, seed) };
        let (music, grid) = synth_music(&cfg).unwrap();
        let found = extract_beats(&music, BEAT_MIN_GAP).unwrap();
        prop_assert_eq!(found.frames(), grid.frames());
        let expected = beat_frames_for(bpm, 10.0, 60.0);
        prop_assert_eq!(grid.frames(), expected.as_slice());
    }
}

#[test]
fn feature_files_round_trip() {
    let (music, _) = synth_music(&MusicSynthConfig::new(100.0, 3.0, 60.0, 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("music.json");
    write_features(&path, &music).unwrap();
    let back = ingest_features(&path).unwrap();
    assert_eq!(back.fps(), music.fps());
    assert_eq!(back.channel_map(), music.channel_map());
    assert_eq!(back.data(), music.data());
}

#[test]
fn synthetic_music_is_seeded() {
    let a = synth_music(&MusicSynthConfig::new(110.0, 4.0, 60.0, 9)).unwrap().0;
    let b = synth_music(&MusicSynthConfig::new(110.0, 4.0, 60.0, 9)).unwrap().0;
    let c = synth_music(&MusicSynthConfig::new(110.0, 4.0, 60.0, 10)).unwrap().0;
    assert_eq!(a.data(), b.data());
    assert_ne!(a.data(), c.data());
    assert!(a.span(ONSET).is_some());
}
