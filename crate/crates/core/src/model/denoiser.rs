use candle_core::{DType, Device, Tensor};

use super::config::DenoiserConfig;
use super::gtm::{gtm_modulate, GtmLayer};
use super::attention::attention;
use super::ops::{gelu, layer_norm, Dense};
use super::params::{Init, ParamStore};
use crate::diffusion::{ConditioningContext, Denoiser, NoiseSchedule};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
struct Norm {
    gain: Tensor,
    bias: Tensor,
}

impl Norm {
    fn new(params: &mut ParamStore, prefix: &str, width: usize) -> Result<Self> {
        Ok(Self {
            gain: params.create(&format!("{prefix}.gain"), &[width], Init::Const(1.0))?,
            bias: params.create(&format!("{prefix}.bias"), &[width], Init::Zeros)?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        layer_norm(x, &self.gain, &self.bias, LN_EPS)
    }
}

fn dense(params: &mut ParamStore, prefix: &str, inp: usize, out: usize) -> Result<Dense> {
    let a = 1.0 / (inp as f64).sqrt();
    Ok(Dense {
        weight: params.create(&format!("{prefix}.weight"), &[out, inp], Init::Uniform(a))?,
        bias: params.create(&format!("{prefix}.bias"), &[out], Init::Uniform(a))?,
    })
}

#[derive(Debug, Clone)]
struct Block {
    ln1: Norm,
    qkv: Dense,
    proj: Dense,
    ln2: Norm,
    fc1: Dense,
    fc2: Dense,
    gtm: GtmLayer,
}

impl Block {
    fn new(params: &mut ParamStore, prefix: &str, cfg: &DenoiserConfig) -> Result<Self> {
        let w = cfg.model_width;
        Ok(Self {
            ln1: Norm::new(params, &format!("{prefix}.ln1"), w)?,
            qkv: dense(params, &format!("{prefix}.qkv"), w, 3 * w)?,
            proj: dense(params, &format!("{prefix}.proj"), w, w)?,
            ln2: Norm::new(params, &format!("{prefix}.ln2"), w)?,
            fc1: dense(params, &format!("{prefix}.fc1"), w, cfg.mlp_ratio * w)?,
            fc2: dense(params, &format!("{prefix}.fc2"), cfg.mlp_ratio * w, w)?,
            gtm: GtmLayer::new(params, &format!("{prefix}.gtm"), w)?,
        })
    }

    /// Runs the block for the tokens from `query_start` on; every token
    /// still serves as a key and value.
    fn forward(&self, x: &Tensor, heads: usize, query_start: usize) -> Result<Tensor> {
        let (b, n, w) = x.dims3()?;
        let nq = n - query_start;
        let dh = w / heads;
        let split = |t: Tensor, rows: usize| -> Result<Tensor> {
            Ok(t.reshape((b, rows, heads, dh))?.transpose(1, 2)?.reshape((b * heads, rows, dh))?)
        };
        let h = self.ln1.forward(x)?;
        let qkv = self.qkv.forward(&h)?;
        let q = split(qkv.narrow(2, 0, w)?.narrow(1, query_start, nq)?, nq)?;
        let k = split(qkv.narrow(2, w, w)?, n)?;
        let v = split(qkv.narrow(2, 2 * w, w)?, n)?;
        let att = attention(&q, &k, &v, 1.0 / (dh as f64).sqrt())?
            .reshape((b, heads, nq, dh))?
            .transpose(1, 2)?
            .reshape((b, nq, w))?;
        let x = (x.narrow(1, query_start, nq)? + self.proj.forward(&att)?)?;
        let h = gelu(&self.fc1.forward(&self.ln2.forward(&x)?)?)?;
        Ok((&x + self.fc2.forward(&h)?)?)
    }
}

/// Sinusoidal table `[positions, width]`, sine in the first half of the
/// channels and cosine in the second.
pub fn sinusoidal_table(positions: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let mut out = vec![0.0; positions.len() * width];
    for (i, p) in positions.iter().enumerate() {
        for k in 0..half {
            let freq = (-(10_000f64.ln()) * k as f64 / half as f64).exp();
            out[i * width + k] = (p * freq).sin();
            out[i * width + half + k] = (p * freq).cos();
        }
    }
    out
}

/// Full-attention transformer over `[music | past | future]` tokens that
/// predicts the clean future window.
#[derive(Debug)]
pub struct DanceDenoiser {
    cfg: DenoiserConfig,
    max_step: usize,
    params: ParamStore,
    music_proj: Dense,
    motion_embed: Dense,
    segments: Tensor,
    positions: Tensor,
    time1: Dense,
    time2: Dense,
    blocks: Vec<Block>,
    final_ln: Norm,
    head: Dense,
    trajectory_channel: usize,
}

impl DanceDenoiser {
    /// `trajectory_channel` is the first of the three root-translation
    /// channels of a motion frame.
    pub fn new(
        cfg: DenoiserConfig,
        trajectory_channel: usize,
        schedule: &NoiseSchedule,
        seed: u64,
        dtype: DType,
        device: &Device,
    ) -> Result<Self> {
        cfg.validate()?;
        if trajectory_channel + 3 > cfg.motion_dim {
            return Err(Error::Config(format!(
                "trajectory channels {}..{} exceed motion_dim {}",
                trajectory_channel,
                trajectory_channel + 3,
                cfg.motion_dim
            )));
        }
        let w = cfg.model_width;
        let mut p = ParamStore::new(seed, dtype, device.clone());
        let music_proj = dense(&mut p, "music_proj", cfg.music_dim, w)?;
        let motion_embed = dense(
            &mut p,
            "motion_embed",
            cfg.temporal_conv_kernel * cfg.motion_dim,
            w,
        )?;
        let segments = p.create("segments", &[3, w], Init::Normal(0.02))?;
        let time1 = dense(&mut p, "time.fc1", w, w)?;
        let time2 = dense(&mut p, "time.fc2", w, w)?;
        let blocks = (0..cfg.num_blocks)
            .map(|i| Block::new(&mut p, &format!("blocks.{i}"), &cfg))
            .collect::<Result<Vec<_>>>()?;
        let final_ln = Norm::new(&mut p, "final_ln", w)?;
        let head = dense(&mut p, "head", w, cfg.motion_dim)?;
        let pos: Vec<f64> = (0..cfg.tokens()).map(|i| i as f64).collect();
        let positions =
            Tensor::from_vec(sinusoidal_table(&pos, w), (cfg.tokens(), w), device)?.to_dtype(dtype)?;
        Ok(Self {
            cfg,
            max_step: schedule.steps(),
            params: p,
            music_proj,
            motion_embed,
            segments,
            positions,
            time1,
            time2,
            blocks,
            final_ln,
            head,
            trajectory_channel,
        })
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.cfg
    }

    pub fn max_step(&self) -> usize {
        self.max_step
    }

    pub fn trajectory_channel(&self) -> usize {
        self.trajectory_channel
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn dtype(&self) -> DType {
        self.params.dtype()
    }

    pub fn device(&self) -> &Device {
        self.params.device()
    }

    /// Turns trajectory modulation on or off without touching parameters.
    pub fn set_gtm(&mut self, on: bool) {
        self.cfg.gtm = on;
    }

    /// Shared temporal convolution over `[B, F, motion_dim]`, same-length
    /// zero padding. The same weights embed past and future frames.
    pub fn embed_motion(&self, x: &Tensor) -> Result<Tensor> {
        self.conv_motion(x, &self.motion_embed)
    }

    fn conv_motion(&self, x: &Tensor, kernel: &Dense) -> Result<Tensor> {
        let (b, f, d) = x.dims3()?;
        if d != self.cfg.motion_dim {
            return Err(Error::LengthMismatch {
                what: "motion frame width",
                expected: self.cfg.motion_dim,
                got: d,
            });
        }
        let k = self.cfg.temporal_conv_kernel;
        let half = k / 2;
        let x = x.to_dtype(self.dtype())?;
        let pad = Tensor::zeros((b, half, d), x.dtype(), x.device())?;
        let padded = Tensor::cat(&[&pad, &x, &pad], 1)?;
        let taps: Vec<Tensor> = (0..k).map(|j| padded.narrow(1, j, f)).collect::<candle_core::Result<_>>()?;
        let stacked = Tensor::cat(&taps, 2)?;
        kernel.forward(&stacked)
    }

    /// [`Self::embed_motion`] with the embedder weights cut out of the
    /// gradient graph; gradients still reach `x`.
    pub fn embed_motion_detached(&self, x: &Tensor) -> Result<Tensor> {
        let frozen = Dense {
            weight: self.motion_embed.weight.detach(),
            bias: self.motion_embed.bias.detach(),
        };
        self.conv_motion(x, &frozen)
    }

    fn embed_music(&self, m: &Tensor) -> Result<Tensor> {
        let d = m.dim(2)?;
        if d != self.cfg.music_dim {
            return Err(Error::LengthMismatch {
                what: "music frame width",
                expected: self.cfg.music_dim,
                got: d,
            });
        }
        self.music_proj.forward(&m.to_dtype(self.dtype())?)
    }

    fn time_embedding(&self, steps: &[usize]) -> Result<Tensor> {
        let w = self.cfg.model_width;
        let t: Vec<f64> = steps.iter().map(|s| *s as f64).collect();
        let table = Tensor::from_vec(sinusoidal_table(&t, w), (steps.len(), w), self.device())?
            .to_dtype(self.dtype())?;
        let h = self.time1.forward(&table)?.silu()?;
        Ok(self.time2.forward(&h)?.unsqueeze(1)?)
    }

    fn check_ctx(&self, ctx: &ConditioningContext) -> Result<()> {
        ctx.check_batch()?;
        for (what, t, n) in [
            ("music window", &ctx.music, self.cfg.music_frames),
            ("past window", &ctx.past, self.cfg.past_frames),
            ("future window", &ctx.future, self.cfg.future_frames),
        ] {
            if t.dim(1)? != n {
                return Err(Error::LengthMismatch { what, expected: n, got: t.dim(1)? });
            }
        }
        Ok(())
    }

    /// Token sequence `[B, 380, W]`: projected music, embedded past and
    /// embedded future, plus positional, segment and timestep embeddings.
    pub fn embed_tokens(&self, ctx: &ConditioningContext) -> Result<Tensor> {
        self.check_ctx(ctx)?;
        let c = &self.cfg;
        let music = self.embed_music(&ctx.music)?;
        let past = self.embed_motion(&ctx.past)?;
        let future = self.embed_motion(&ctx.future)?;
        let seg = |i: usize, n: usize| -> Result<Tensor> {
            Ok(self.segments.narrow(0, i, 1)?.broadcast_as((n, c.model_width))?)
        };
        let segments = Tensor::cat(
            &[seg(0, c.music_frames)?, seg(1, c.past_frames)?, seg(2, c.future_frames)?],
            0,
        )?;
        let tokens = Tensor::cat(&[&music, &past, &future], 1)?;
        let tokens = tokens.broadcast_add(&(&self.positions + segments)?)?;
        Ok(tokens.broadcast_add(&self.time_embedding(&ctx.steps)?)?)
    }

    /// Predicted clean future `[B, future_frames, motion_dim]`.
    pub fn forward(&self, ctx: &ConditioningContext) -> Result<Tensor> {
        for &t in &ctx.steps {
            if t < 1 || t > self.max_step() {
                return Err(Error::StepOutOfRange { t, lo: 1, hi: self.max_step() });
            }
        }
        let c = &self.cfg;
        let mut x = self.embed_tokens(ctx)?;
        let lead = c.music_frames + c.past_frames;
        let trajectory = ctx
            .future
            .to_dtype(self.dtype())?
            .narrow(2, self.trajectory_channel, 3)?;
        let last = self.blocks.len() - 1;
        for (i, block) in self.blocks.iter().enumerate() {
            // Only future tokens are read out, so the last block skips the
            // other queries.
            if i == last {
                x = block.forward(&x, c.num_heads, lead)?;
                if c.gtm {
                    x = gtm_modulate(&x, &trajectory, &block.gtm)?;
                }
            } else {
                x = block.forward(&x, c.num_heads, 0)?;
                if c.gtm {
                    let cond = x.narrow(1, 0, lead)?;
                    let fut = gtm_modulate(&x.narrow(1, lead, c.future_frames)?, &trajectory, &block.gtm)?;
                    x = Tensor::cat(&[&cond, &fut], 1)?;
                }
            }
        }
        Ok(self.head.forward(&self.final_ln.forward(&x)?)?)
    }
}

impl Denoiser for DanceDenoiser {
    fn predict_x0(&self, ctx: &ConditioningContext) -> Result<Tensor> {
        let out = self.forward(ctx)?;
        Ok(out.to_dtype(ctx.future.dtype())?)
    }
}
