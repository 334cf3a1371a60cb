use candle_core::{DType, Device, Tensor};
use rand::Rng;
use rand_distr::StandardNormal;

use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};

/// Standard normal tensor drawn from an explicit random source.
pub fn gaussian(shape: &[usize], rng: &mut impl Rng, dtype: DType, device: &Device) -> Result<Tensor> {
    let n: usize = shape.iter().product();
    let values: Vec<f32> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    Ok(Tensor::from_vec(values, shape, device)?.to_dtype(dtype)?)
}

/// One window of model input: music, clean past motion and (noised) future
/// motion, batched along the first axis.
///
/// `steps[b]` is the diffusion step of `future[b]`; 0 means clean.
#[derive(Debug, Clone)]
pub struct ConditioningContext {
    pub music: Tensor,
    pub past: Tensor,
    pub future: Tensor,
    pub steps: Vec<usize>,
}

impl ConditioningContext {
    pub fn clean(music: Tensor, past: Tensor, future: Tensor) -> Result<Self> {
        let b = future.dim(0)?;
        let ctx = Self {
            music,
            past,
            future,
            steps: vec![0; b],
        };
        ctx.check_batch()?;
        Ok(ctx)
    }

    pub fn batch_size(&self) -> usize {
        self.steps.len()
    }

    pub fn check_batch(&self) -> Result<()> {
        let b = self.steps.len();
        for (name, t) in [("music", &self.music), ("past", &self.past), ("future", &self.future)] {
            if t.rank() != 3 || t.dim(0)? != b {
                return Err(Error::Shape(format!(
                    "{name} has shape {:?}, expected [{b}, frames, features]",
                    t.dims()
                )));
            }
        }
        if self.past.dim(2)? != self.future.dim(2)? {
            return Err(Error::Shape(format!(
                "past feature width {} differs from future width {}",
                self.past.dim(2)?,
                self.future.dim(2)?
            )));
        }
        Ok(())
    }
}

/// Per-batch-element scale, broadcastable over `[B, ...]`.
fn per_sample(values: &[f64], like: &Tensor) -> Result<Tensor> {
    let mut shape = vec![values.len()];
    shape.extend(std::iter::repeat_n(1, like.rank() - 1));
    let v: Vec<f32> = values.iter().map(|x| *x as f32).collect();
    Ok(Tensor::from_vec(v, shape, like.device())?.to_dtype(like.dtype())?)
}

/// Closed-form forward noising, `sqrt(ab_t) * x0 + sqrt(1 - ab_t) * noise`.
/// `t = 0` returns `x0`.
pub fn q_sample(x0: &Tensor, t: usize, noise: &Tensor, sched: &NoiseSchedule) -> Result<Tensor> {
    sched.check_step(t, 0)?;
    if x0.dims() != noise.dims() {
        return Err(Error::Shape(format!("x0 {:?} vs noise {:?}", x0.dims(), noise.dims())));
    }
    let ab = sched.alpha_bar(t);
    Ok(((x0 * ab.sqrt())? + (noise * (1.0 - ab).sqrt())?)?)
}

/// [`q_sample`] with a separate step for every element of the leading axis.
pub fn q_sample_batch(x0: &Tensor, steps: &[usize], noise: &Tensor, sched: &NoiseSchedule) -> Result<Tensor> {
    if x0.dims() != noise.dims() || x0.dim(0)? != steps.len() {
        return Err(Error::Shape(format!(
            "x0 {:?}, noise {:?}, {} steps",
            x0.dims(),
            noise.dims(),
            steps.len()
        )));
    }
    for &t in steps {
        sched.check_step(t, 0)?;
    }
    let signal: Vec<f64> = steps.iter().map(|&t| sched.alpha_bar(t).sqrt()).collect();
    let spread: Vec<f64> = steps.iter().map(|&t| (1.0 - sched.alpha_bar(t)).sqrt()).collect();
    let a = x0.broadcast_mul(&per_sample(&signal, x0)?)?;
    let b = noise.broadcast_mul(&per_sample(&spread, x0)?)?;
    Ok((a + b)?)
}

/// One step of the forward Markov chain, `sqrt(a_t) * x + sqrt(1 - a_t) * noise`.
pub fn q_step(x_prev: &Tensor, t: usize, noise: &Tensor, sched: &NoiseSchedule) -> Result<Tensor> {
    sched.check_step(t, 1)?;
    let a = sched.alpha(t);
    Ok(((x_prev * a.sqrt())? + (noise * (1.0 - a).sqrt())?)?)
}

/// Noises only the future segment; music and past are passed through untouched.
pub fn partial_noise(
    ctx: &ConditioningContext,
    steps: &[usize],
    noise: &Tensor,
    sched: &NoiseSchedule,
) -> Result<ConditioningContext> {
    if ctx.steps.iter().any(|s| *s != 0) {
        return Err(Error::InvalidArgument("partial_noise expects a clean future".into()));
    }
    for &t in steps {
        sched.check_step(t, 1)?;
    }
    Ok(ConditioningContext {
        music: ctx.music.clone(),
        past: ctx.past.clone(),
        future: q_sample_batch(&ctx.future, steps, noise, sched)?,
        steps: steps.to_vec(),
    })
}

/// Coefficients `(c_x0, c_xt, variance)` of the Gaussian posterior
/// `q(x_{t-1} | x_t, x0)` for one step with the given schedule values.
pub fn posterior_coefficients(alpha_t: f64, alpha_bar_t: f64, alpha_bar_prev: f64) -> (f64, f64, f64) {
    let beta = 1.0 - alpha_t;
    let denom = 1.0 - alpha_bar_t;
    let c_x0 = alpha_bar_prev.sqrt() * beta / denom;
    let c_xt = alpha_t.sqrt() * (1.0 - alpha_bar_prev) / denom;
    let var = beta * (1.0 - alpha_bar_prev) / denom;
    (c_x0, c_xt, var)
}

/// Ancestral step from `x_t` to `x_{t-1}` given a clean-signal estimate.
/// At `t = 1` the posterior mean is returned without noise.
pub fn posterior_sample(
    x_t: &Tensor,
    x0_hat: &Tensor,
    t: usize,
    sched: &NoiseSchedule,
    noise: &Tensor,
) -> Result<Tensor> {
    sched.check_step(t, 1)?;
    if x_t.dims() != x0_hat.dims() {
        return Err(Error::Shape(format!("x_t {:?} vs x0_hat {:?}", x_t.dims(), x0_hat.dims())));
    }
    let (c_x0, c_xt, var) =
        posterior_coefficients(sched.alpha(t), sched.alpha_bar(t), sched.alpha_bar(t - 1));
    let mean = ((x0_hat * c_x0)? + (x_t * c_xt)?)?;
    if t == 1 {
        return Ok(mean);
    }
    Ok((mean + (noise * var.sqrt())?)?)
}

/// A clean-signal predictor `f(x_t, t, music, past)`.
pub trait Denoiser {
    fn predict_x0(&self, ctx: &ConditioningContext) -> Result<Tensor>;
}

impl<F> Denoiser for F
where
    F: Fn(&ConditioningContext) -> Result<Tensor>,
{
    fn predict_x0(&self, ctx: &ConditioningContext) -> Result<Tensor> {
        self(ctx)
    }
}

/// Reverse diffusion of one future window, from pure noise at `t = T` down
/// to `t = 1`, conditioned on `music` and `past` (both batched).
pub fn sample_window(
    denoiser: &impl Denoiser,
    music: &Tensor,
    past: &Tensor,
    future_frames: usize,
    sched: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<Tensor> {
    let (b, _, dim) = past.dims3()?;
    let shape = [b, future_frames, dim];
    let mut x = gaussian(&shape, rng, past.dtype(), past.device())?;
    for t in (1..=sched.steps()).rev() {
        let ctx = ConditioningContext {
            music: music.clone(),
            past: past.clone(),
            future: x.clone(),
            steps: vec![t; b],
        };
        let x0_hat = denoiser.predict_x0(&ctx)?;
        if x0_hat.dims() != shape {
            return Err(Error::Shape(format!(
                "denoiser returned {:?}, expected {:?}",
                x0_hat.dims(),
                shape
            )));
        }
        let noise = if t > 1 {
            gaussian(&shape, rng, past.dtype(), past.device())?
        } else {
            x.zeros_like()?
        };
        x = posterior_sample(&x, &x0_hat, t, sched, &noise)?;
    }
    Ok(x)
}
