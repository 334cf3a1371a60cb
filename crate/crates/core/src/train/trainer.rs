use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use candle_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::WindowDataset;
use super::losses::{
    mi_loss, perceptual_losses, recon_loss, scalar, total_loss, LossValues, LossWeights,
    MotionDistributionSummary,
};
use super::optim::{Adam, AdamConfig, OptimizerKind};
use crate::diffusion::{gaussian, partial_noise, NoiseSchedule};
use crate::error::{Error, Result};
use crate::model::{save_checkpoint, CheckpointMeta, DanceDenoiser, Normalizer};
use crate::motion::Skeleton;

/// `training.*` config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub steps: usize,
    /// `adam` or `adamw`.
    pub optimizer: String,
    pub weight_decay: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub grad_clip: f64,
    /// Checkpoint period in steps; 0 writes only the final checkpoint.
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch: 16,
            steps: 2000,
            optimizer: "adam".into(),
            weight_decay: 0.0,
            grad_clip: 1.0,
            checkpoint_every: 500,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn paper() -> Self {
        Self { batch: 126, ..Self::default() }
    }
}

/// One line of the loss log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossRow {
    pub step: usize,
    /// Mean diffusion step of the batch.
    pub t: f64,
    #[serde(flatten)]
    pub values: LossValues,
}

pub const LOSS_LOG_HEADER: &str = "step,t,L_recon,L_MI,L_pos,L_vel,L_contact,total";

impl LossRow {
    pub fn csv_line(&self) -> String {
        let v = &self.values;
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step, self.t, v.recon, v.mi, v.pos, v.vel, v.contact, v.total
        )
    }
}

/// Everything the loop needs besides the model.
pub struct TrainSetup<'a> {
    pub config: &'a TrainConfig,
    pub weights: &'a LossWeights,
    pub schedule: &'a NoiseSchedule,
    pub normalizer: &'a Normalizer,
    pub skeleton: &'a Skeleton,
    pub data: &'a WindowDataset,
    /// Where checkpoints and `loss_log.csv` go; `None` keeps everything in memory.
    pub out_dir: Option<&'a Path>,
    /// Run configuration echoed into checkpoints.
    pub run_echo: serde_json::Value,
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub log: Vec<LossRow>,
    pub checkpoints: Vec<PathBuf>,
}

/// Loss components of one batch, with the graph attached to `total`.
pub struct StepLosses {
    pub total: Tensor,
    pub values: LossValues,
}

/// Forward pass and every loss term for a noised batch.
pub fn compute_losses(
    model: &DanceDenoiser,
    setup: &TrainSetup<'_>,
    clean: &crate::diffusion::ConditioningContext,
    noised: &crate::diffusion::ConditioningContext,
    contacts: &Tensor,
) -> Result<StepLosses> {
    let w = setup.weights;
    let pred = model.forward(noised)?;
    let target = clean.future.to_dtype(pred.dtype())?;
    let recon = recon_loss(&target, &pred)?;

    // The past is summarized over its most recent frames, a window as long
    // as the future, so the divergence does not just reflect window length.
    let past_feat = model.embed_motion_detached(&clean.past)?;
    let (_, past_len, _) = past_feat.dims3()?;
    let recent = pred.dim(1)?.min(past_len);
    let past = MotionDistributionSummary::from_features(&past_feat.narrow(1, past_len - recent, recent)?)?.detach();
    let fut = MotionDistributionSummary::from_features(&model.embed_motion_detached(&pred)?)?;
    let mi = mi_loss(&past, &fut, w.mi_clamp)?;

    let target_raw = setup.normalizer.denormalize_motion_tensor(&target)?;
    let pred_raw = setup.normalizer.denormalize_motion_tensor(&pred)?;
    let perc = perceptual_losses(
        setup.skeleton,
        setup.data.layout(),
        &target_raw,
        &pred_raw,
        &target,
        &pred,
        &contacts.to_dtype(pred.dtype())?,
    )?;
    let total = total_loss(w, &recon, &mi, &perc)?;
    let values = LossValues {
        recon: scalar(&recon)?,
        mi: scalar(&mi)?,
        pos: scalar(&perc.pos)?,
        vel: scalar(&perc.vel)?,
        contact: scalar(&perc.contact)?,
        total: scalar(&total)?,
    };
    Ok(StepLosses { total, values })
}

/// Runs the diffusion training loop on `model` in place.
pub fn train(model: &DanceDenoiser, setup: &TrainSetup<'_>) -> Result<TrainReport> {
    let cfg = setup.config;
    setup.weights.validate()?;
    if cfg.batch == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Config(format!("batch {} and lr {} must be positive", cfg.batch, cfg.lr)));
    }
    let kind: OptimizerKind = cfg.optimizer.parse()?;
    let mut opt = Adam::new(
        kind,
        AdamConfig { lr: cfg.lr, weight_decay: cfg.weight_decay, ..AdamConfig::default() },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sched = setup.schedule;
    let mut log_file = match setup.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join("loss_log.csv");
            let mut f = File::create(&path).map_err(|e| Error::io(&path, e))?;
            writeln!(f, "{LOSS_LOG_HEADER}").map_err(|e| Error::io(&path, e))?;
            Some((f, path))
        }
        None => None,
    };
    let mut report = TrainReport::default();
    for step in 1..=cfg.steps {
        let batch = setup.data.sample_batch(cfg.batch, &mut rng, model.dtype(), model.device())?;
        let steps: Vec<usize> = (0..cfg.batch).map(|_| rng.random_range(1..=sched.steps())).collect();
        let noise = gaussian(batch.ctx.future.dims(), &mut rng, model.dtype(), model.device())?;
        let noised = partial_noise(&batch.ctx, &steps, &noise, sched)?;
        let losses = compute_losses(model, setup, &batch.ctx, &noised, &batch.contacts)?;
        let mean_t = steps.iter().sum::<usize>() as f64 / steps.len() as f64;
        if !losses.values.is_finite() {
            let v = losses.values;
            return Err(Error::NonFiniteLoss {
                step,
                t: mean_t,
                components: format!(
                    "recon={} mi={} pos={} vel={} contact={} total={}",
                    v.recon, v.mi, v.pos, v.vel, v.contact, v.total
                ),
            });
        }
        let grads = losses.total.backward()?;
        let scale = if cfg.grad_clip > 0.0 {
            let norm = Adam::grad_norm(model.params(), &grads)?;
            if norm > cfg.grad_clip { cfg.grad_clip / norm } else { 1.0 }
        } else {
            1.0
        };
        opt.apply(model.params(), &grads, scale)?;
        let row = LossRow { step, t: mean_t, values: losses.values };
        if let Some((f, path)) = log_file.as_mut() {
            writeln!(f, "{}", row.csv_line()).map_err(|e| Error::io(path.as_path(), e))?;
        }
        if step % 100 == 0 {
            log::info!("step {step}: total {:.5} recon {:.5}", row.values.total, row.values.recon);
        }
        report.log.push(row);
        let periodic = cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0;
        if let Some(dir) = setup.out_dir {
            if periodic || step == cfg.steps {
                let meta = CheckpointMeta {
                    schedule: sched.config(),
                    normalizer: setup.normalizer.clone(),
                    step: step as u64,
                    optimizer: Some(opt.export()),
                    run: setup.run_echo.clone(),
                };
                let path = dir.join(format!("checkpoint_{step:06}.safetensors"));
                save_checkpoint(&path, model, &meta)?;
                if step == cfg.steps {
                    save_checkpoint(dir.join("model.safetensors"), model, &meta)?;
                }
                report.checkpoints.push(path);
            }
        }
    }
    Ok(report)
}

/// Mean of `values[start..start + n]`, clipped to the slice.
pub fn moving_average(values: &[f64], start: usize, n: usize) -> f64 {
    let end = (start + n).min(values.len());
    let s = &values[start.min(end)..end];
    s.iter().sum::<f64>() / s.len().max(1) as f64
}
