//! Synthesizes a beat-driven music feature track and recovers its beats
//! from the onset channel.

use longdance::music::{extract_beats, synth_music, MusicSynthConfig, ONSET};

fn main() -> longdance::Result<()> {
    let cfg = MusicSynthConfig::new(104.0, 8.0, 60.0, 7);
    let (music, grid) = synth_music(&cfg)?;
    println!("{} frames x {} channels at {} fps", music.len(), music.dim(), music.fps());
    for span in music.channel_map() {
        println!("  {:<10} channels {}..{}", span.name, span.start, span.end);
    }
    let found = extract_beats(&music, 10)?;
    println!("onset channel: {}", music.span(ONSET).unwrap().start);
    println!("planted beats:   {:?}", grid.frames());
    println!("extracted beats: {:?}", found.frames());
    println!("estimated bpm: {:.1}", found.bpm().unwrap_or(f64::NAN));
    Ok(())
}
