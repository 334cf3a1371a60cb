use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::DataConfig;
use super::dance::{synth_dance, DanceConfig};
use crate::error::{Error, Result};
use crate::io_util::write_atomic;
use crate::motion::{read_motion, write_motion, ContactConfig, MotionEncoding, MotionSequence, Skeleton};
use crate::music::{
    extract_beats, ingest_features, synth_music, write_features, BeatGrid, MusicFeatureSequence, MusicSynthConfig,
};

/// Minimum spacing of music beats recovered from the onset channel.
pub const BEAT_MIN_GAP: usize = 10;

pub const MANIFEST_FORMAT: &str = "longdance-dataset";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    /// Motion file, relative to the manifest.
    pub motion: PathBuf,
    /// Music feature file, relative to the manifest.
    pub music: PathBuf,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genre: Option<usize>,
}

/// Paired motion and music files with their split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub fps: f64,
    /// Skeleton file, relative to the manifest.
    pub skeleton: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

/// One loaded pair.
#[derive(Debug, Clone)]
pub struct DataEntry {
    pub name: String,
    pub split: Split,
    pub genre: Option<usize>,
    pub motion: MotionSequence,
    pub music: MusicFeatureSequence,
    pub beats: BeatGrid,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub skeleton: Skeleton,
    pub fps: f64,
    pub entries: Vec<DataEntry>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &DataEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// `(motion, music)` pairs of one split.
    pub fn pairs(&self, split: Split) -> Vec<(MotionSequence, MusicFeatureSequence)> {
        self.split(split).map(|e| (e.motion.clone(), e.music.clone())).collect()
    }
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::MalformedHeader { path: path.to_path_buf(), reason: format!("format `{}`", m.format) });
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }

    /// Checks that names are unique, every file exists, and no motion or
    /// music file appears in both splits.
    pub fn validate(&self, base: &Path) -> Result<()> {
        let mut names = HashSet::new();
        let mut train_files = HashSet::new();
        let mut test_files = HashSet::new();
        for e in &self.entries {
            if !names.insert(&e.name) {
                return Err(Error::InvalidArgument(format!("duplicate dataset entry `{}`", e.name)));
            }
            for f in [&e.motion, &e.music] {
                let p = base.join(f);
                if !p.is_file() {
                    return Err(Error::io(p, std::io::ErrorKind::NotFound.into()));
                }
                match e.split {
                    Split::Train => train_files.insert(f.clone()),
                    Split::Test => test_files.insert(f.clone()),
                };
            }
        }
        if let Some(f) = train_files.intersection(&test_files).next() {
            return Err(Error::InvalidArgument(format!("`{}` is in both splits", f.display())));
        }
        if !base.join(&self.skeleton).is_file() {
            return Err(Error::io(base.join(&self.skeleton), std::io::ErrorKind::NotFound.into()));
        }
        Ok(())
    }
}

fn base_dir(path: &Path) -> &Path {
    path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."))
}

/// Reads a manifest and every file it references; music beats are
/// recovered from the onset channel.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let m = DatasetManifest::load(manifest_path)?;
    let base = base_dir(manifest_path);
    m.validate(base)?;
    let skeleton = Skeleton::load(base.join(&m.skeleton))?;
    let mut entries = Vec::with_capacity(m.entries.len());
    for e in &m.entries {
        let motion = read_motion(base.join(&e.motion))?;
        let music = ingest_features(base.join(&e.music))?;
        if motion.layout().joints != skeleton.num_joints() || motion.layout().contacts != skeleton.num_contacts() {
            return Err(Error::Shape(format!("`{}` does not match the dataset skeleton", e.name)));
        }
        if motion.fps() != m.fps || music.fps() != m.fps {
            return Err(Error::InvalidArgument(format!("`{}` is not at the dataset rate of {} fps", e.name, m.fps)));
        }
        let beats = extract_beats(&music, BEAT_MIN_GAP)?;
        entries.push(DataEntry { name: e.name.clone(), split: e.split, genre: e.genre, motion, music, beats });
    }
    Ok(Dataset { skeleton, fps: m.fps, entries })
}

/// Number of held-out sequences: `ceil(n * fraction)`.
pub fn test_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).ceil() as usize).min(n)
}

/// Paired procedural music and dances, held in memory. Genre `i % genres`
/// sets both the music timbre and the dance move family; the last
/// [`test_count`] sequences form the test split.
pub fn synth_dataset(cfg: &DataConfig, skel: &Skeleton, contacts: &ContactConfig) -> Result<Dataset> {
    if cfg.sequences == 0 || cfg.genres == 0 {
        return Err(Error::InvalidArgument("need at least one sequence and one genre".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_test = test_count(cfg.sequences, cfg.test_fraction);
    let music_defaults = MusicSynthConfig::default();
    let mut entries = Vec::with_capacity(cfg.sequences);
    for i in 0..cfg.sequences {
        let genre = i % cfg.genres;
        let bpm = rng.random_range(music_defaults.min_bpm..=music_defaults.max_bpm);
        let music_seed: u64 = rng.random();
        let dance_seed: u64 = rng.random();
        let (music, beats) = synth_music(&MusicSynthConfig {
            bpm,
            duration_s: cfg.duration_s,
            fps: cfg.fps,
            seed: music_seed,
            genre,
            ..music_defaults.clone()
        })?;
        let dance = DanceConfig {
            bpm,
            duration_s: cfg.duration_s,
            fps: cfg.fps,
            genre,
            seed: dance_seed,
            ..DanceConfig::default()
        };
        let motion = synth_dance(skel, &dance, contacts)?;
        let split = if i >= cfg.sequences - n_test { Split::Test } else { Split::Train };
        entries.push(DataEntry { name: format!("seq_{i:03}"), split, genre: Some(genre), motion, music, beats });
    }
    Ok(Dataset { skeleton: skel.clone(), fps: cfg.fps, entries })
}

/// Writes `data` under `dir` as `skeleton.json`, `motion/*`, `music/*` and
/// `manifest.json`; returns the manifest path.
pub fn write_dataset(data: &Dataset, dir: &Path) -> Result<PathBuf> {
    for sub in ["motion", "music"] {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    data.skeleton.save(dir.join("skeleton.json"))?;
    let mut entries = Vec::with_capacity(data.entries.len());
    for e in &data.entries {
        let motion = PathBuf::from("motion").join(format!("{}.json", e.name));
        let music = PathBuf::from("music").join(format!("{}.json", e.name));
        write_motion(dir.join(&motion), &e.motion, MotionEncoding::Binary)?;
        write_features(dir.join(&music), &e.music)?;
        entries.push(ManifestEntry { name: e.name.clone(), motion, music, split: e.split, genre: e.genre });
    }
    let manifest = DatasetManifest {
        format: MANIFEST_FORMAT.into(),
        fps: data.fps,
        skeleton: PathBuf::from("skeleton.json"),
        entries,
    };
    let path = dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}

/// Rest bars make up this fraction of the mixed-intensity fixture.
pub const FIXTURE_REST_PROBABILITY: f64 = 0.3;

/// A reference set for freezing-threshold calibration: procedural dances
/// in which each bar is, with probability [`FIXTURE_REST_PROBABILITY`],
/// danced at a small rest intensity.
pub fn mixed_intensity_fixture(skel: &Skeleton, sequences: usize, seed: u64) -> Result<Vec<MotionSequence>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sequences)
        .map(|i| {
            let cfg = DanceConfig {
                bpm: rng.random_range(80.0..=135.0),
                genre: i % 2,
                seed: rng.random(),
                rest_probability: FIXTURE_REST_PROBABILITY,
                ..DanceConfig::default()
            };
            synth_dance(skel, &cfg, &ContactConfig::default())
        })
        .collect()
}
