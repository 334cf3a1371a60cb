use candle_core::{Tensor, D};
use serde::{Deserialize, Serialize};

use super::geometry::frame_positions;
use crate::error::{Error, Result};
use crate::motion::{FrameLayout, Skeleton};

/// Floor applied to summary variances.
pub const VAR_FLOOR: f64 = 1e-6;

/// `loss.*` config keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub mi: f64,
    pub mp: f64,
    pub pos: f64,
    pub vel: f64,
    pub contact: f64,
    /// Upper bound on the per-window divergence rewarded by the MI term.
    pub mi_clamp: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            mi: 0.1,
            mp: 1.0,
            pos: 1.0,
            vel: 1.0,
            contact: 1.0,
            mi_clamp: 5.0,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self {
            mi: 0.0,
            mp: 0.0,
            pos: 0.0,
            vel: 0.0,
            contact: 0.0,
            mi_clamp: 5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.mi, self.mp, self.pos, self.vel, self.contact, self.mi_clamp];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config(format!("loss weights must be finite and non-negative: {self:?}")));
        }
        Ok(())
    }
}

fn check_same(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Shape(format!("{what}: {:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

/// Mean squared error over every element.
pub fn recon_loss(target: &Tensor, pred: &Tensor) -> Result<Tensor> {
    check_same(target, pred, "recon_loss")?;
    Ok((target - pred)?.sqr()?.mean_all()?)
}

/// Per-window Gaussian summary (mean and diagonal variance over time) of
/// embedded motion features.
#[derive(Debug, Clone)]
pub struct MotionDistributionSummary {
    /// `[B, C]`
    pub mean: Tensor,
    /// `[B, C]`, floored at [`VAR_FLOOR`].
    pub var: Tensor,
}

impl MotionDistributionSummary {
    /// Summarizes features `[B, F, C]` over the frame axis.
    pub fn from_features(features: &Tensor) -> Result<Self> {
        let (_, f, _) = features.dims3()?;
        if f < 2 {
            return Err(Error::TooShort { what: "distribution summary", needed: 2, got: f });
        }
        let mean = features.mean(1)?;
        let var = features
            .broadcast_sub(&mean.unsqueeze(1)?)?
            .sqr()?
            .mean(1)?
            .clamp(VAR_FLOOR, f64::INFINITY)?;
        Ok(Self { mean, var })
    }

    pub fn detach(&self) -> Self {
        Self {
            mean: self.mean.detach(),
            var: self.var.detach(),
        }
    }
}

/// `KL(N(mu_p, var_p) || N(mu_q, var_q))` per window, summed over channels; `[B]`.
pub fn gaussian_kl(p: &MotionDistributionSummary, q: &MotionDistributionSummary) -> Result<Tensor> {
    check_same(&p.mean, &q.mean, "summary means")?;
    check_same(&p.var, &q.var, "summary variances")?;
    for v in [&p.var, &q.var] {
        let min = v.flatten_all()?.min(0)?.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?;
        if !(min > 0.0) {
            return Err(Error::InvalidArgument(format!("summary variance {min} is not positive")));
        }
    }
    let ratio = (&p.var / &q.var)?;
    let diff = (&p.mean - &q.mean)?.sqr()?;
    let terms = ((ratio.clone() - ratio.log()? + (diff / &q.var)?)? - 1.0)?;
    Ok((terms.sum(D::Minus1)? * 0.5)?)
}

/// `-clamp(KL(past || future) / C, 0, clamp)` averaged over windows, with
/// `C` the feature channels; lies in `[-clamp, 0]`. Per channel, the clamp
/// does not depend on the embedding width.
pub fn mi_loss(past: &MotionDistributionSummary, future: &MotionDistributionSummary, clamp: f64) -> Result<Tensor> {
    let channels = past.mean.dim(D::Minus1)? as f64;
    let kl = (gaussian_kl(past, future)? / channels)?.clamp(0.0, clamp)?;
    Ok(kl.mean_all()?.neg()?)
}

/// Position, velocity and foot-contact terms of a predicted window.
#[derive(Debug, Clone)]
pub struct PerceptualLosses {
    pub pos: Tensor,
    pub vel: Tensor,
    pub contact: Tensor,
}

/// Perceptual losses for windows `[B, F, dim]`.
///
/// `target_raw`/`pred_raw` are in physical units and feed forward
/// kinematics; `target_feat`/`pred_feat` are the representation the network
/// regresses and feed the velocity term. `contacts` is `[B, F, C]` from the
/// ground truth, ordered like the skeleton's foot joints.
///
/// - `pos`: mean over frames of the squared distance between joint position
///   sets, summed over joints.
/// - `vel`: mean over frame pairs and channels of the squared difference of
///   temporal differences.
/// - `contact`: mean over frame pairs of the squared predicted foot
///   displacement, masked by the ground-truth contact at the earlier frame.
#[allow(clippy::too_many_arguments)]
pub fn perceptual_losses(
    skel: &Skeleton,
    layout: FrameLayout,
    target_raw: &Tensor,
    pred_raw: &Tensor,
    target_feat: &Tensor,
    pred_feat: &Tensor,
    contacts: &Tensor,
) -> Result<PerceptualLosses> {
    check_same(target_raw, pred_raw, "perceptual_losses")?;
    check_same(target_feat, pred_feat, "perceptual_losses features")?;
    let (b, f, _) = target_raw.dims3()?;
    if f < 2 {
        return Err(Error::TooShort { what: "velocity and contact losses", needed: 2, got: f });
    }
    let feet = skel.foot_joints();
    let (cb, cf, cc) = contacts.dims3()?;
    if cb != b || cf != f || cc != feet.len() {
        return Err(Error::Shape(format!(
            "contacts {:?}, expected [{b}, {f}, {}]",
            contacts.dims(),
            feet.len()
        )));
    }
    let p_true = frame_positions(skel, layout, target_raw)?;
    let p_pred = frame_positions(skel, layout, pred_raw)?;
    let pos = (&p_true - &p_pred)?.sqr()?.sum((2, 3))?.mean_all()?;

    let dt = (target_feat.narrow(1, 1, f - 1)? - target_feat.narrow(1, 0, f - 1)?)?;
    let dp = (pred_feat.narrow(1, 1, f - 1)? - pred_feat.narrow(1, 0, f - 1)?)?;
    let vel = (dt - dp)?.sqr()?.mean_all()?;

    let contact = if feet.is_empty() {
        pos.zeros_like()?
    } else {
        let idx: Vec<u32> = feet.iter().map(|j| *j as u32).collect();
        let idx = Tensor::new(idx.as_slice(), pred_raw.device())?;
        let foot = p_pred.contiguous()?.index_select(&idx, 2)?;
        let step = (foot.narrow(1, 1, f - 1)? - foot.narrow(1, 0, f - 1)?)?;
        let mask = contacts.narrow(1, 0, f - 1)?.to_dtype(step.dtype())?;
        step.sqr()?.sum(3)?.mul(&mask)?.sum(2)?.mean_all()?
    };
    Ok(PerceptualLosses { pos, vel, contact })
}

/// Scalar loss components of one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossValues {
    pub recon: f64,
    pub mi: f64,
    pub pos: f64,
    pub vel: f64,
    pub contact: f64,
    pub total: f64,
}

impl LossValues {
    pub fn is_finite(&self) -> bool {
        [self.recon, self.mi, self.pos, self.vel, self.contact, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// `recon + w.mi * mi + w.mp * (w.pos * pos + w.vel * vel + w.contact * contact)`.
pub fn total_loss(
    w: &LossWeights,
    recon: &Tensor,
    mi: &Tensor,
    perceptual: &PerceptualLosses,
) -> Result<Tensor> {
    let mp = ((&perceptual.pos * w.pos)? + (&perceptual.vel * w.vel)?)?;
    let mp = (mp + (&perceptual.contact * w.contact)?)?;
    Ok(((recon + (mi * w.mi)?)? + (mp * w.mp)?)?)
}

pub fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?)
}
