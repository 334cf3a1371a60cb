use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    #[default]
    Cosine,
    Linear,
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Self::Cosine),
            "linear" => Ok(Self::Linear),
            other => Err(Error::Unknown {
                what: "schedule kind",
                name: other.to_string(),
            }),
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cosine => "cosine",
            Self::Linear => "linear",
        })
    }
}

/// `diffusion.*` config keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(rename = "T")]
    pub steps: usize,
    pub kind: ScheduleKind,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            kind: ScheduleKind::Cosine,
        }
    }
}

impl ScheduleConfig {
    pub fn paper() -> Self {
        Self {
            steps: 1000,
            kind: ScheduleKind::Cosine,
        }
    }

    pub fn build(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::new(self.steps, self.kind)
    }
}

const MAX_BETA: f64 = 0.999;

/// Per-step noise coefficients.
///
/// `alpha(t)` for `t` in `1..=T`; `alpha_bar(t)` for `t` in `0..=T` with
/// `alpha_bar(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    kind: ScheduleKind,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

pub fn make_schedule(steps: usize, kind: &str) -> Result<NoiseSchedule> {
    NoiseSchedule::new(steps, kind.parse()?)
}

impl NoiseSchedule {
    pub fn new(steps: usize, kind: ScheduleKind) -> Result<Self> {
        if steps < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 diffusion steps, got {steps}")));
        }
        let betas: Vec<f64> = match kind {
            ScheduleKind::Cosine => {
                let s = 0.008;
                let f = |t: f64| (((t / steps as f64) + s) / (1.0 + s) * FRAC_PI_2).cos().powi(2);
                let f0 = f(0.0);
                (1..=steps)
                    .map(|t| {
                        let ab = f(t as f64) / f0;
                        let ab_prev = f((t - 1) as f64) / f0;
                        (1.0 - ab / ab_prev).min(MAX_BETA)
                    })
                    .collect()
            }
            ScheduleKind::Linear => {
                let scale = 1000.0 / steps as f64;
                let start = 1e-4 * scale;
                let end = (0.02 * scale).min(MAX_BETA);
                (0..steps)
                    .map(|i| start + (end - start) * i as f64 / (steps - 1) as f64)
                    .collect()
            }
        };
        let alpha: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(steps + 1);
        alpha_bar.push(1.0);
        for a in &alpha {
            alpha_bar.push(alpha_bar.last().unwrap() * a);
        }
        Ok(Self {
            kind,
            alpha,
            alpha_bar,
        })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn steps(&self) -> usize {
        self.alpha.len()
    }

    pub fn config(&self) -> ScheduleConfig {
        ScheduleConfig {
            steps: self.steps(),
            kind: self.kind,
        }
    }

    pub fn check_step(&self, t: usize, lo: usize) -> Result<()> {
        if t < lo || t > self.steps() {
            return Err(Error::StepOutOfRange {
                t,
                lo,
                hi: self.steps(),
            });
        }
        Ok(())
    }

    /// `alpha_t`, `t` in `1..=T`.
    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    pub fn beta(&self, t: usize) -> f64 {
        1.0 - self.alpha(t)
    }

    /// `prod_{s<=t} alpha_s`, `t` in `0..=T`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_step_count_reaches_noise() {
        let s = make_schedule(1000, "cosine").unwrap();
        assert!(s.alpha_bar(1000) < 1e-3);
        assert!(s.alphas().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn two_step_linear_is_cumulative_product() {
        let s = make_schedule(2, "linear").unwrap();
        assert_eq!(s.alpha_bars(), &[1.0, s.alpha(1), s.alpha(1) * s.alpha(2)]);
    }

    #[test]
    fn strictly_decreasing_for_every_kind_and_size() {
        for kind in ["cosine", "linear"] {
            for steps in [2, 3, 10, 50, 100, 1000] {
                let s = make_schedule(steps, kind).unwrap();
                for t in 1..steps {
                    assert!(s.alpha(t + 1) < s.alpha(t), "{kind} T={steps} t={t}");
                    assert!(s.alpha(t) > 0.0 && s.alpha(t) < 1.0);
                }
                assert!(s.alpha_bar(steps) < 1e-3, "{kind} T={steps}");
            }
        }
    }

    #[test]
    fn unknown_kind_and_tiny_t_are_errors() {
        assert!(matches!(make_schedule(10, "sigmoid"), Err(Error::Unknown { .. })));
        assert!(make_schedule(1, "cosine").is_err());
    }
}
