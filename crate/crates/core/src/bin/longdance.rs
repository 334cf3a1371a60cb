use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use longdance::cli::{
    cmd_calibrate_freezing, cmd_evaluate, cmd_export, cmd_generate, cmd_synth_data, cmd_train, ExportFormat,
    GenerateArgs, RunConfig,
};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "longdance", version, about = "Music-conditioned long-horizon dance generation")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Start from full-scale settings instead of desk-scale defaults.
    #[arg(long, global = true)]
    paper_config: bool,
    /// Seed for the command's random stream (data, training or generation).
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    /// Output directory; defaults to `out_dir` from the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a procedural dataset of paired music and dances.
    SynthData,
    /// Train a denoiser; synthesizes data when no manifest is configured.
    Train,
    /// Generate a long dance for a music file from a seed motion.
    Generate {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "PATH")]
        music: PathBuf,
        #[arg(long, value_name = "PATH")]
        seed_motion: PathBuf,
        #[arg(long, value_name = "FLOAT")]
        length_s: Option<f64>,
    },
    /// Score generated motion against reference motion.
    Evaluate {
        /// Manifest file or directory of generations.
        generated: PathBuf,
        /// Manifest file or directory of generations.
        reference: PathBuf,
    },
    /// Export joint positions of a motion file.
    Export {
        motion: PathBuf,
        #[arg(long, value_name = "FORMAT", value_parser = ["positions-csv", "preview-svg"])]
        format: String,
    },
    /// Calibrate freezing thresholds to a target rate on reference data.
    CalibrateFreezing {
        /// Dataset manifest; the bundled mixed-intensity fixture if omitted.
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = 0.187)]
        target: f64,
    },
}

fn run(cli: Cli) -> longdance::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p, cli.paper_config)?,
        None if cli.paper_config => RunConfig::paper(),
        None => RunConfig::default(),
    };
    let out = cli.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    cfg.out_dir = out.clone();
    match cli.command {
        Command::SynthData => {
            if let Some(s) = cli.seed {
                cfg.data.seed = s;
            }
            let manifest = cmd_synth_data(&cfg, &out)?;
            println!("{}", manifest.display());
        }
        Command::Train => {
            if let Some(s) = cli.seed {
                cfg.training.seed = s;
            }
            let report = cmd_train(&cfg, &out)?;
            if let Some(last) = report.log.last() {
                println!("step {} total {:.6} recon {:.6}", last.step, last.values.total, last.values.recon);
            }
        }
        Command::Generate { checkpoint, music, seed_motion, length_s } => {
            let args = GenerateArgs {
                checkpoint,
                music,
                seed_motion,
                length_s: length_s.unwrap_or(cfg.generation.length_s),
                seed: cli.seed.unwrap_or(cfg.generation.seed),
                out_dir: out,
            };
            println!("{}", cmd_generate(&args)?.display());
        }
        Command::Evaluate { generated, reference } => {
            let report = cmd_evaluate(&cfg, &generated, &reference, Some(&out))?;
            println!(
                "FID_k {:.4} FID_g {} Dist_k {:.4} Dist_g {} BeatAlign {:.4} freezing {:.4}",
                report.fid_k,
                report.fid_g.map_or("n/a".into(), |v| format!("{v:.4}")),
                report.dist_k,
                report.dist_g.map_or("n/a".into(), |v| format!("{v:.4}")),
                report.beat_align,
                report.freezing_rate
            );
        }
        Command::Export { motion, format } => {
            let skel = cfg.data.skeleton.resolve(std::path::Path::new("."))?;
            let files = cmd_export(&skel, &motion, format.parse::<ExportFormat>()?, &out)?;
            println!("wrote {} files to {}", files.len(), out.display());
        }
        Command::CalibrateFreezing { reference, target } => {
            let cal = cmd_calibrate_freezing(reference.as_deref(), target, Some(&out))?;
            println!(
                "tau_pose {:e} tau_trans {:e} achieved {:.4} (target {:.4})",
                cal.thresholds.tau_pose, cal.thresholds.tau_trans, cal.achieved_rate, cal.target_rate
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
