use std::path::{Path, PathBuf};

use candle_core::{DType, Device};
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::dataset::{
    load_dataset, mixed_intensity_fixture, synth_dataset, write_dataset, Dataset, Split,
    BEAT_MIN_GAP,
};
use super::export::{export_motion, ExportFormat};
use crate::diffusion::NoiseSchedule;
use crate::error::{Error, Result};
use crate::io_util::write_atomic;
use crate::longgen::{generate_long_batch, GenerationRequest};
use crate::metrics::{calibrate_thresholds, evaluate, Calibration, EvalItem, MetricsReport};
use crate::model::{load_checkpoint, DanceDenoiser, Normalizer};
use crate::motion::{read_motion, write_motion, MotionEncoding, MotionSequence, Skeleton};
use crate::music::{extract_beats, ingest_features, BeatGrid, MusicFeatureSequence};
use crate::train::{train, TrainReport, TrainSetup, WindowDataset, WindowSizes};

/// Name of the configuration echo written into every output directory.
pub const CONFIG_ECHO: &str = "run_config.toml";

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes the resolved configuration, prefixed by the command that ran.
pub fn write_config_echo(dir: &Path, cfg: &RunConfig, command: &str) -> Result<()> {
    create_dir(dir)?;
    let text = format!("# longdance {command}\n{}", cfg.to_toml()?);
    write_atomic(&dir.join(CONFIG_ECHO), text.as_bytes())
}

/// Synthesizes the configured dataset into `out_dir` and returns the
/// manifest path.
pub fn cmd_synth_data(cfg: &RunConfig, out_dir: &Path) -> Result<PathBuf> {
    let skel = cfg.data.skeleton.resolve(Path::new("."))?;
    let data = synth_dataset(&cfg.data, &skel, &cfg.contacts)?;
    let path = write_dataset(&data, out_dir)?;
    write_config_echo(out_dir, cfg, "synth-data")?;
    log::info!("wrote {} sequences to {}", data.entries.len(), out_dir.display());
    Ok(path)
}

/// A freshly trained model with what generation needs alongside it.
pub struct TrainedModel {
    pub model: DanceDenoiser,
    pub normalizer: Normalizer,
    pub schedule: NoiseSchedule,
    pub report: TrainReport,
}

/// Fits the normalizer on the training split, builds the network and runs
/// the training loop. Checkpoints and the loss log go to `out_dir` if given.
pub fn train_model(cfg: &RunConfig, data: &Dataset, out_dir: Option<&Path>) -> Result<TrainedModel> {
    let pairs = data.pairs(Split::Train);
    let (first, first_music) = pairs
        .first()
        .ok_or_else(|| Error::InvalidArgument("dataset has no training sequences".into()))?;
    let layout = first.layout();
    let mut model_cfg = cfg.model.clone();
    for (what, slot, actual) in [
        ("model.motion_dim", &mut model_cfg.motion_dim, layout.dim()),
        ("model.music_dim", &mut model_cfg.music_dim, first_music.dim()),
    ] {
        if *slot == 0 {
            *slot = actual;
        } else if *slot != actual {
            return Err(Error::Config(format!("{what} is {} but the data has {actual}", *slot)));
        }
    }
    let motion: Vec<&[f32]> = pairs.iter().map(|(m, _)| m.data()).collect();
    let music: Vec<&[f32]> = pairs.iter().map(|(_, a)| a.data()).collect();
    let normalizer = Normalizer::fit(layout.dim(), &motion, first_music.dim(), &music)?;
    let schedule = cfg.diffusion.build()?;
    let windows = WindowDataset::new(&pairs, &normalizer, WindowSizes::from(&model_cfg))?;
    let model = DanceDenoiser::new(
        model_cfg,
        layout.root().start,
        &schedule,
        cfg.training.seed,
        DType::F32,
        &Device::Cpu,
    )?;
    let setup = TrainSetup {
        config: &cfg.training,
        weights: &cfg.loss,
        schedule: &schedule,
        normalizer: &normalizer,
        skeleton: &data.skeleton,
        data: &windows,
        out_dir,
        run_echo: serde_json::to_value(cfg)?,
    };
    let report = train(&model, &setup)?;
    Ok(TrainedModel { model, normalizer, schedule, report })
}

/// Trains on the configured manifest, or on a dataset synthesized into
/// `out_dir/data` when the configuration names none.
pub fn cmd_train(cfg: &RunConfig, out_dir: &Path) -> Result<TrainReport> {
    write_config_echo(out_dir, cfg, "train")?;
    let manifest = match &cfg.data.manifest {
        Some(m) => m.clone(),
        None => cmd_synth_data(cfg, &out_dir.join("data"))?,
    };
    let data = load_dataset(&manifest)?;
    Ok(train_model(cfg, &data, Some(out_dir))?.report)
}

/// The first `frames` frames of `seq`, the seed window of a generation.
pub fn seed_window(seq: &MotionSequence, frames: usize) -> Result<MotionSequence> {
    if seq.len() < frames {
        return Err(Error::TooShort { what: "seed motion", needed: frames, got: seq.len() });
    }
    seq.slice(0, frames)
}

/// Generates one sequence per `(music, seed motion)` pair, all of
/// `target_frames` frames; request `i` uses noise seed `seed + i`.
pub fn generate_for(
    model: &DanceDenoiser,
    normalizer: &Normalizer,
    schedule: &NoiseSchedule,
    inputs: &[(&MusicFeatureSequence, &MotionSequence)],
    target_frames: usize,
    seed: u64,
) -> Result<Vec<MotionSequence>> {
    let past = model.config().past_frames;
    let reqs = inputs
        .iter()
        .enumerate()
        .map(|(i, (music, seed_motion))| {
            Ok(GenerationRequest {
                music: (*music).clone(),
                seed_motion: seed_window(seed_motion, past)?,
                target_frames,
                seed: seed.wrapping_add(i as u64),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    generate_long_batch(model, normalizer, schedule, &reqs)
}

/// Echo written next to every generated motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationEcho {
    pub checkpoint: PathBuf,
    pub music: PathBuf,
    pub seed_motion: PathBuf,
    pub length_s: f64,
    pub seed: u64,
    pub motion: PathBuf,
}

pub const GENERATION_ECHO: &str = "generation.json";
pub const GENERATED_MOTION: &str = "motion.json";

/// Arguments of [`cmd_generate`].
#[derive(Debug, Clone)]
pub struct GenerateArgs {
    pub checkpoint: PathBuf,
    pub music: PathBuf,
    /// A motion file whose first `past` frames seed the generation.
    pub seed_motion: PathBuf,
    pub length_s: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

/// Writes `out_dir/motion.json` (with its payload) and
/// `out_dir/generation.json`; returns the motion path.
pub fn cmd_generate(args: &GenerateArgs) -> Result<PathBuf> {
    let ckpt = load_checkpoint(&args.checkpoint, &Device::Cpu)?;
    let schedule = ckpt.meta.schedule.build()?;
    let music = ingest_features(&args.music)?;
    let seed_motion = read_motion(&args.seed_motion)?;
    if !(args.length_s > 0.0) {
        return Err(Error::InvalidArgument(format!("length {} s must be positive", args.length_s)));
    }
    let frames = (args.length_s * seed_motion.fps()).round() as usize;
    let out = generate_for(
        &ckpt.model,
        &ckpt.meta.normalizer,
        &schedule,
        &[(&music, &seed_motion)],
        frames,
        args.seed,
    )?
    .remove(0);
    create_dir(&args.out_dir)?;
    let path = args.out_dir.join(GENERATED_MOTION);
    write_motion(&path, &out, MotionEncoding::Binary)?;
    let echo = GenerationEcho {
        checkpoint: args.checkpoint.clone(),
        music: args.music.clone(),
        seed_motion: args.seed_motion.clone(),
        length_s: args.length_s,
        seed: args.seed,
        motion: PathBuf::from(GENERATED_MOTION),
    };
    write_atomic(&args.out_dir.join(GENERATION_ECHO), serde_json::to_string_pretty(&echo)?.as_bytes())?;
    Ok(path)
}

/// Sequences to evaluate, with their music beats when known.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub skeleton: Option<Skeleton>,
    pub items: Vec<(String, MotionSequence, Option<BeatGrid>)>,
}

impl EvalSet {
    pub fn as_items(&self) -> Vec<EvalItem<'_>> {
        self.items
            .iter()
            .map(|(name, motion, beats)| EvalItem { name, motion, beats: beats.as_ref() })
            .collect()
    }
}

fn find_echoes(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_echoes(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == GENERATION_ECHO) {
            out.push(p);
        }
    }
    Ok(())
}

/// A manifest file contributes its test split (or every entry if it has no
/// test split); a directory contributes every generation found beneath it.
pub fn load_eval_set(path: &Path) -> Result<EvalSet> {
    if path.is_file() {
        let data = load_dataset(path)?;
        let split = if data.split(Split::Test).next().is_some() { Some(Split::Test) } else { None };
        let items = data
            .entries
            .into_iter()
            .filter(|e| split.is_none_or(|s| e.split == s))
            .map(|e| (e.name, e.motion, Some(e.beats)))
            .collect();
        return Ok(EvalSet { skeleton: Some(data.skeleton), items });
    }
    let mut echoes = Vec::new();
    find_echoes(path, &mut echoes)?;
    let mut items = Vec::with_capacity(echoes.len());
    for echo_path in echoes {
        let text = std::fs::read_to_string(&echo_path).map_err(|e| Error::io(&echo_path, e))?;
        let echo: GenerationEcho = serde_json::from_str(&text)?;
        let dir = echo_path.parent().unwrap_or(Path::new("."));
        let motion = read_motion(dir.join(&echo.motion))?;
        let beats = extract_beats(&ingest_features(&echo.music)?, BEAT_MIN_GAP)?;
        let name = dir.strip_prefix(path).unwrap_or(dir).display().to_string();
        items.push((name, motion, Some(beats)));
    }
    Ok(EvalSet { skeleton: None, items })
}

/// Scores `generated` against `reference` (each a manifest or a directory
/// of generations) and writes `metrics.json` into `out_dir` if given.
pub fn cmd_evaluate(cfg: &RunConfig, generated: &Path, reference: &Path, out_dir: Option<&Path>) -> Result<MetricsReport> {
    let gen = load_eval_set(generated)?;
    let refs = load_eval_set(reference)?;
    let skel = match refs.skeleton.clone().or(gen.skeleton.clone()) {
        Some(s) => s,
        None => cfg.data.skeleton.resolve(Path::new("."))?,
    };
    let report = evaluate(&skel, &gen.as_items(), &refs.as_items(), &cfg.metrics)?;
    if let Some(dir) = out_dir {
        write_config_echo(dir, cfg, "evaluate")?;
        write_atomic(&dir.join("metrics.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    Ok(report)
}

pub fn cmd_export(skel: &Skeleton, motion: &Path, format: ExportFormat, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let seq = read_motion(motion)?;
    if seq.layout().joints != skel.num_joints() {
        return Err(Error::LengthMismatch {
            what: "skeleton joints",
            expected: skel.num_joints(),
            got: seq.layout().joints,
        });
    }
    export_motion(skel, &seq, format, out_dir)
}

/// Sequences in the bundled calibration fixture.
pub const FIXTURE_SEQUENCES: usize = 24;
/// Seed of the bundled calibration fixture.
pub const FIXTURE_SEED: u64 = 0;

/// Calibrates freezing thresholds on every motion of a manifest, or on the
/// bundled mixed-intensity fixture; writes `freezing_thresholds.json` into
/// `out_dir` if given.
pub fn cmd_calibrate_freezing(reference: Option<&Path>, target_rate: f64, out_dir: Option<&Path>) -> Result<Calibration> {
    let motions: Vec<MotionSequence> = match reference {
        Some(path) => load_dataset(path)?.entries.into_iter().map(|e| e.motion).collect(),
        None => mixed_intensity_fixture(&Skeleton::smpl24(), FIXTURE_SEQUENCES, FIXTURE_SEED)?,
    };
    let cal = calibrate_thresholds(&motions, target_rate)?;
    if let Some(dir) = out_dir {
        create_dir(dir)?;
        write_atomic(&dir.join("freezing_thresholds.json"), serde_json::to_string_pretty(&cal)?.as_bytes())?;
    }
    Ok(cal)
}
