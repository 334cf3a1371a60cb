//! Continuous 6D rotation representation.
//!
//! A rotation is stored as the first two columns of its matrix, column-major:
//! `(c1.x, c1.y, c1.z, c2.x, c2.y, c2.z)`. Decoding re-orthonormalizes the two
//! columns with Gram-Schmidt and recovers the third as their cross product.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Columns shorter than this are treated as degenerate.
pub const DEGENERATE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation6D(pub [f64; 6]);

impl Rotation6D {
    pub const IDENTITY: Self = Self([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);

    pub fn from_slice(v: &[f32]) -> Result<Self> {
        if v.len() != 6 {
            return Err(Error::LengthMismatch {
                what: "rotation6d",
                expected: 6,
                got: v.len(),
            });
        }
        let mut out = [0.0; 6];
        for (o, x) in out.iter_mut().zip(v) {
            *o = f64::from(*x);
        }
        Ok(Self(out))
    }

    pub fn to_f32(self) -> [f32; 6] {
        self.0.map(|x| x as f32)
    }

    pub fn decode(&self) -> Result<Mat3> {
        rot6d_decode(self)
    }
}

pub fn rot6d_decode(r: &Rotation6D) -> Result<Mat3> {
    let a1 = Vec3::new(r.0[0], r.0[1], r.0[2]);
    let a2 = Vec3::new(r.0[3], r.0[4], r.0[5]);
    let n1 = a1.norm();
    if !(n1 >= DEGENERATE_EPS) {
        return Err(Error::DegenerateRotation(format!("first column norm {n1:e}")));
    }
    let b1 = a1 / n1;
    let u = a2 - b1 * b1.dot(&a2);
    let nu = u.norm();
    if !(nu >= DEGENERATE_EPS) {
        return Err(Error::DegenerateRotation(format!(
            "second column has orthogonal residual {nu:e}"
        )));
    }
    let b2 = u / nu;
    let b3 = b1.cross(&b2);
    Ok(Mat3::from_columns(&[b1, b2, b3]))
}

/// Tolerance used to accept a matrix as a rotation in [`rot6d_encode`].
pub const ROTATION_TOL: f64 = 1e-5;

pub fn rot6d_encode(m: &Mat3) -> Result<Rotation6D> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::NotARotation("non-finite entries".into()));
    }
    let err = (m.transpose() * m - Mat3::identity()).amax();
    if err > ROTATION_TOL {
        return Err(Error::NotARotation(format!("|M^T M - I| = {err:e}")));
    }
    let det = m.determinant();
    if det <= 0.0 {
        return Err(Error::NotARotation(format!("determinant {det}")));
    }
    Ok(Rotation6D([
        m[(0, 0)],
        m[(1, 0)],
        m[(2, 0)],
        m[(0, 1)],
        m[(1, 1)],
        m[(2, 1)],
    ]))
}

/// Rotation about a unit axis by `angle` radians.
pub fn axis_angle(axis: &Vec3, angle: f64) -> Mat3 {
    let axis = nalgebra::Unit::new_normalize(*axis);
    *nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix()
}

/// `Rz(z) * Ry(y) * Rx(x)`.
pub fn euler_zyx(x: f64, y: f64, z: f64) -> Mat3 {
    axis_angle(&Vec3::z(), z) * axis_angle(&Vec3::y(), y) * axis_angle(&Vec3::x(), x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut impl Rng) -> Mat3 {
        let axis = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        axis_angle(&axis, rng.random_range(-3.1..3.1))
    }

    #[test]
    fn decode_canonical_basis_is_identity() {
        let m = rot6d_decode(&Rotation6D::IDENTITY).unwrap();
        assert!((m - Mat3::identity()).amax() < 1e-12);
    }

    #[test]
    fn decode_is_scale_invariant() {
        let m = rot6d_decode(&Rotation6D([2.0, 0.0, 0.0, 0.0, 3.0, 0.0])).unwrap();
        assert!((m - Mat3::identity()).amax() < 1e-12);
    }

    #[test]
    fn decode_random_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let r = Rotation6D(std::array::from_fn(|_| rng.random_range(-2.0..2.0)));
            let m = rot6d_decode(&r).unwrap();
            assert!((m.transpose() * m - Mat3::identity()).amax() < 1e-6);
            assert!((m.determinant() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn decode_rejects_degenerate() {
        let parallel = Rotation6D([1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        assert!(matches!(rot6d_decode(&parallel), Err(Error::DegenerateRotation(_))));
        let zero = Rotation6D([0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(rot6d_decode(&zero), Err(Error::DegenerateRotation(_))));
        let nan = Rotation6D([f64::NAN, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(rot6d_decode(&nan).is_err());
    }

    #[test]
    fn encode_identity_and_quarter_turn() {
        assert_eq!(rot6d_encode(&Mat3::identity()).unwrap(), Rotation6D::IDENTITY);
        let rz = axis_angle(&Vec3::z(), std::f64::consts::FRAC_PI_2);
        let r = rot6d_encode(&rz).unwrap();
        let expected = [0.0, 1.0, 0.0, -1.0, 0.0, 0.0];
        for (a, b) in r.0.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn encode_rejects_non_rotations() {
        let reflect = Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0));
        assert!(matches!(rot6d_encode(&reflect), Err(Error::NotARotation(_))));
        let scaled = Mat3::identity() * 2.0;
        assert!(matches!(rot6d_encode(&scaled), Err(Error::NotARotation(_))));
    }

    #[test]
    fn round_trip_random_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let m = random_rotation(&mut rng);
            let back = rot6d_decode(&rot6d_encode(&m).unwrap()).unwrap();
            worst = worst.max((back - m).amax());
        }
        assert!(worst < 1e-6, "max deviation {worst}");
    }
}
