use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rotation::Vec3;
use crate::error::{Error, Result};

const SMPL24_JSON: &str = include_str!("../../assets/smpl24.json");

/// On-disk skeleton description. `parents[0]` is `-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkeletonFile {
    pub joint_names: Vec<String>,
    pub parents: Vec<i64>,
    pub offsets: Vec<[f64; 3]>,
    pub foot_joints: Vec<usize>,
}

/// Joint hierarchy with local rest offsets (meters).
///
/// Joints are stored in topological order: every parent index is smaller
/// than the index of its child, and joint 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    joint_names: Vec<String>,
    parents: Vec<Option<usize>>,
    offsets: Vec<Vec3>,
    foot_joints: Vec<usize>,
}

impl Skeleton {
    pub fn new(
        joint_names: Vec<String>,
        parents: Vec<Option<usize>>,
        offsets: Vec<Vec3>,
        foot_joints: Vec<usize>,
    ) -> Result<Self> {
        let n = joint_names.len();
        if n == 0 {
            return Err(Error::InvalidSkeleton("no joints".into()));
        }
        if parents.len() != n || offsets.len() != n {
            return Err(Error::InvalidSkeleton(format!(
                "{n} names but {} parents and {} offsets",
                parents.len(),
                offsets.len()
            )));
        }
        if parents[0].is_some() {
            return Err(Error::InvalidSkeleton("joint 0 must be the root".into()));
        }
        for (j, p) in parents.iter().enumerate().skip(1) {
            match p {
                None => {
                    return Err(Error::InvalidSkeleton(format!("joint {j} has no parent")));
                }
                Some(p) if *p >= j => {
                    return Err(Error::InvalidSkeleton(format!(
                        "joint {j} has parent {p}; parents must precede children"
                    )));
                }
                _ => {}
            }
        }
        if offsets[0].norm() != 0.0 {
            return Err(Error::InvalidSkeleton("root offset must be zero".into()));
        }
        if offsets.iter().any(|o| !o.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidSkeleton("non-finite offset".into()));
        }
        if foot_joints.is_empty() {
            return Err(Error::InvalidSkeleton("no foot joints".into()));
        }
        if let Some(f) = foot_joints.iter().find(|f| **f >= n) {
            return Err(Error::InvalidSkeleton(format!("foot joint {f} out of range")));
        }
        Ok(Self {
            joint_names,
            parents,
            offsets,
            foot_joints,
        })
    }

    /// SMPL-style 24-joint body with approximate neutral-shape offsets, y up,
    /// facing +z. Feet are left heel, left toe, right heel, right toe.
    pub fn smpl24() -> Self {
        let file: SkeletonFile =
            serde_json::from_str(SMPL24_JSON).expect("bundled skeleton parses");
        Self::try_from(file).expect("bundled skeleton is valid")
    }

    /// Five-joint toy body used by small tests:
    ///
    /// ```text
    /// 0 pelvis
    /// ├── 1 left_knee   (+0.1, -0.45, 0)
    /// │   └── 2 left_foot  (0, -0.45, 0.05)
    /// └── 3 right_knee  (-0.1, -0.45, 0)
    ///     └── 4 right_foot (0, -0.45, 0.05)
    /// ```
    pub fn toy5() -> Self {
        let names = ["pelvis", "left_knee", "left_foot", "right_knee", "right_foot"];
        Self::new(
            names.iter().map(|s| s.to_string()).collect(),
            vec![None, Some(0), Some(1), Some(0), Some(3)],
            vec![
                Vec3::zeros(),
                Vec3::new(0.1, -0.45, 0.0),
                Vec3::new(0.0, -0.45, 0.05),
                Vec3::new(-0.1, -0.45, 0.0),
                Vec3::new(0.0, -0.45, 0.05),
            ],
            vec![2, 4],
        )
        .expect("toy skeleton is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: SkeletonFile = serde_json::from_str(&text)?;
        Self::try_from(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_file())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn to_file(&self) -> SkeletonFile {
        SkeletonFile {
            joint_names: self.joint_names.clone(),
            parents: self
                .parents
                .iter()
                .map(|p| p.map_or(-1, |p| p as i64))
                .collect(),
            offsets: self.offsets.iter().map(|o| [o.x, o.y, o.z]).collect(),
            foot_joints: self.foot_joints.clone(),
        }
    }

    pub fn num_joints(&self) -> usize {
        self.joint_names.len()
    }

    pub fn num_contacts(&self) -> usize {
        self.foot_joints.len()
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn offsets(&self) -> &[Vec3] {
        &self.offsets
    }

    pub fn foot_joints(&self) -> &[usize] {
        &self.foot_joints
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| n == name)
    }

    /// Height of the root above the ground plane that puts the lowest foot
    /// joint `clearance` meters above the ground in the rest pose.
    pub fn standing_root_height(&self, clearance: f64) -> f64 {
        let mut pos = vec![Vec3::zeros(); self.num_joints()];
        for j in 1..self.num_joints() {
            let p = self.parents[j].unwrap();
            pos[j] = pos[p] + self.offsets[j];
        }
        let lowest = self
            .foot_joints
            .iter()
            .map(|f| pos[*f].y)
            .fold(f64::INFINITY, f64::min);
        clearance - lowest
    }
}

impl TryFrom<SkeletonFile> for Skeleton {
    type Error = Error;

    fn try_from(file: SkeletonFile) -> Result<Self> {
        let parents = file
            .parents
            .iter()
            .map(|p| match *p {
                -1 => Ok(None),
                p if p >= 0 => Ok(Some(p as usize)),
                p => Err(Error::InvalidSkeleton(format!("bad parent index {p}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            file.joint_names,
            parents,
            file.offsets.iter().map(|o| Vec3::new(o[0], o[1], o[2])).collect(),
            file.foot_joints,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_skeletons_validate() {
        let smpl = Skeleton::smpl24();
        assert_eq!(smpl.num_joints(), 24);
        assert_eq!(smpl.num_contacts(), 4);
        assert_eq!(smpl.joint_index("right_hand"), Some(23));
        assert_eq!(Skeleton::toy5().num_joints(), 5);
    }

    #[test]
    fn rejects_bad_trees() {
        let names = || vec!["a".to_string(), "b".to_string()];
        let offs = || vec![Vec3::zeros(), Vec3::x()];
        assert!(Skeleton::new(names(), vec![None, Some(1)], offs(), vec![1]).is_err());
        assert!(Skeleton::new(names(), vec![Some(0), Some(0)], offs(), vec![1]).is_err());
        assert!(Skeleton::new(names(), vec![None, Some(0)], offs(), vec![]).is_err());
        assert!(Skeleton::new(names(), vec![None, Some(0)], offs(), vec![2]).is_err());
        let shifted_root = vec![Vec3::x(), Vec3::x()];
        assert!(Skeleton::new(names(), vec![None, Some(0)], shifted_root, vec![1]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("skel.json");
        let smpl = Skeleton::smpl24();
        smpl.save(&path).unwrap();
        assert_eq!(Skeleton::load(&path).unwrap(), smpl);
    }
}
