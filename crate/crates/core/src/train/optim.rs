//! Adaptive-moment optimizers with checkpointable state.

use std::collections::BTreeMap;
use std::str::FromStr;

use candle_core::backprop::GradStore;
use candle_core::Tensor;

use crate::error::{Error, Result};
use crate::model::{OptimizerState, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    /// Adam with decoupled weight decay.
    AdamW,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(Self::Adam),
            "adamw" => Ok(Self::AdamW),
            other => Err(Error::Unknown { what: "optimizer", name: other.to_string() }),
        }
    }
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Adam => "adam",
            Self::AdamW => "adamw",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 }
    }
}

#[derive(Debug)]
pub struct Adam {
    kind: OptimizerKind,
    cfg: AdamConfig,
    step: u64,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
}

impl Adam {
    pub fn new(kind: OptimizerKind, cfg: AdamConfig) -> Self {
        Self { kind, cfg, step: 0, m: BTreeMap::new(), v: BTreeMap::new() }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.cfg.lr = lr;
    }

    /// Global L2 norm of the gradients of every parameter in `params`.
    pub fn grad_norm(params: &ParamStore, grads: &GradStore) -> Result<f64> {
        let mut total = 0.0;
        for (_, var) in params.iter() {
            if let Some(g) = grads.get(var.as_tensor()) {
                total += g.sqr()?.sum_all()?.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?;
            }
        }
        Ok(total.sqrt())
    }

    /// One update; gradients are multiplied by `grad_scale` first.
    pub fn apply(&mut self, params: &ParamStore, grads: &GradStore, grad_scale: f64) -> Result<()> {
        self.step += 1;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for (name, var) in params.iter() {
            let Some(g) = grads.get(var.as_tensor()) else {
                continue;
            };
            let g = (g.detach() * grad_scale)?;
            let m = match self.m.get(name) {
                Some(m) => ((m * c.beta1)? + (&g * (1.0 - c.beta1))?)?,
                None => (&g * (1.0 - c.beta1))?,
            };
            let v = match self.v.get(name) {
                Some(v) => ((v * c.beta2)? + (g.sqr()? * (1.0 - c.beta2))?)?,
                None => (g.sqr()? * (1.0 - c.beta2))?,
            };
            let denom = ((&v / bc2)?.sqrt()? + c.eps)?;
            let update = ((&m / bc1)? / denom)?;
            let mut w = var.as_tensor().detach();
            if self.kind == OptimizerKind::AdamW && c.weight_decay > 0.0 {
                w = (&w * (1.0 - c.lr * c.weight_decay))?;
            }
            var.set(&(w - (update * c.lr)?)?)?;
            self.m.insert(name.clone(), m);
            self.v.insert(name.clone(), v);
        }
        Ok(())
    }

    pub fn export(&self) -> OptimizerState {
        let mut slots = BTreeMap::new();
        for (n, t) in &self.m {
            slots.insert(format!("m/{n}"), t.clone());
        }
        for (n, t) in &self.v {
            slots.insert(format!("v/{n}"), t.clone());
        }
        OptimizerState { kind: self.kind.name().to_string(), step: self.step, slots }
    }

    pub fn restore(state: &OptimizerState, cfg: AdamConfig) -> Result<Self> {
        let kind = state.kind.parse()?;
        let mut out = Self::new(kind, cfg);
        out.step = state.step;
        for (k, t) in &state.slots {
            if let Some(n) = k.strip_prefix("m/") {
                out.m.insert(n.to_string(), t.clone());
            } else if let Some(n) = k.strip_prefix("v/") {
                out.v.insert(n.to_string(), t.clone());
            } else {
                return Err(Error::Checkpoint(format!("unknown optimizer slot `{k}`")));
            }
        }
        Ok(out)
    }
}
