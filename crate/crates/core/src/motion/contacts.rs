use serde::{Deserialize, Serialize};

use super::rotation::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UpAxis {
    X,
    #[default]
    Y,
    Z,
}

impl UpAxis {
    pub fn index(self) -> usize {
        match self {
            UpAxis::X => 0,
            UpAxis::Y => 1,
            UpAxis::Z => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactConfig {
    /// Meters above the ground plane.
    pub height_thresh: f64,
    /// Meters per second.
    pub speed_thresh: f64,
    pub up_axis: UpAxis,
    pub ground: f64,
}

impl Default for ContactConfig {
    fn default() -> Self {
        Self {
            height_thresh: 0.05,
            speed_thresh: 0.15,
            up_axis: UpAxis::Y,
            ground: 0.0,
        }
    }
}

/// Binary contact labels for each frame and foot joint.
///
/// A foot is in contact when it is below `height_thresh` and its forward
/// difference speed is below `speed_thresh`. The last frame reuses the
/// previous speed; a single frame has speed zero.
pub fn label_foot_contacts(
    feet: &[Vec<Vec3>],
    fps: f64,
    cfg: &ContactConfig,
) -> Vec<Vec<bool>> {
    let n = feet.len();
    let axis = cfg.up_axis.index();
    (0..n)
        .map(|i| {
            let (a, b) = match n {
                1 => (0, 0),
                _ if i + 1 < n => (i, i + 1),
                _ => (i - 1, i),
            };
            feet[i]
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let speed = (feet[b][k] - feet[a][k]).norm() * fps;
                    p[axis] - cfg.ground < cfg.height_thresh && speed < cfg.speed_thresh
                })
                .collect()
        })
        .collect()
}
