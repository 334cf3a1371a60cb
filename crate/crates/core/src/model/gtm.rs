//! Global-trajectory modulation: a per-frame, per-channel affine transform
//! of future-token features driven by the root trajectory.

use candle_core::Tensor;

use super::ops::Dense;
use super::params::{Init, ParamStore};
use crate::error::{Error, Result};

/// Scale map `f_gamma` and shift map `h_beta`, both linear in the 3-vector
/// trajectory point.
#[derive(Debug, Clone)]
pub struct GtmLayer {
    pub scale: Dense,
    pub shift: Dense,
}

impl GtmLayer {
    /// Identity at initialization: `gamma = 1`, `beta = 0` for every input.
    pub fn new(params: &mut ParamStore, prefix: &str, width: usize) -> Result<Self> {
        Ok(Self {
            scale: Dense {
                weight: params.create(&format!("{prefix}.scale.weight"), &[width, 3], Init::Zeros)?,
                bias: params.create(&format!("{prefix}.scale.bias"), &[width], Init::Const(1.0))?,
            },
            shift: Dense {
                weight: params.create(&format!("{prefix}.shift.weight"), &[width, 3], Init::Zeros)?,
                bias: params.create(&format!("{prefix}.shift.bias"), &[width], Init::Zeros)?,
            },
        })
    }

    pub fn width(&self) -> usize {
        self.scale.out_dim()
    }
}

/// `gamma(r_j) * F_j + beta(r_j)` for features `[B, F, W]` and trajectory
/// `[B, F, 3]`.
pub fn gtm_modulate(features: &Tensor, trajectory: &Tensor, layer: &GtmLayer) -> Result<Tensor> {
    let (b, f, w) = features.dims3()?;
    let (tb, tf, tc) = trajectory.dims3()?;
    if tb != b || tf != f {
        return Err(Error::LengthMismatch {
            what: "trajectory frames",
            expected: f,
            got: tf,
        });
    }
    if tc != 3 || layer.width() != w {
        return Err(Error::Shape(format!(
            "trajectory {:?} and layer width {} for features {:?}",
            trajectory.dims(),
            layer.width(),
            features.dims()
        )));
    }
    let gamma = layer.scale.forward(trajectory)?;
    let beta = layer.shift.forward(trajectory)?;
    Ok(((features * gamma)? + beta)?)
}
