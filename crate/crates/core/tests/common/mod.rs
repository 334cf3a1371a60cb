#![allow(dead_code)]

use candle_core::{DType, Device, Tensor, Var};
use longdance::diffusion::gaussian;
use longdance::model::DenoiserConfig;
use longdance::motion::{
    axis_angle, compose_sequence, rot6d_encode, ContactConfig, MotionSequence, Rotation6D, Skeleton, Vec3,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A network small enough for finite differences.
pub fn tiny_config(motion_dim: usize, music_dim: usize) -> DenoiserConfig {
    DenoiserConfig {
        model_width: 8,
        num_heads: 2,
        num_blocks: 2,
        mlp_ratio: 2,
        music_frames: 6,
        past_frames: 4,
        future_frames: 3,
        motion_dim,
        music_dim,
        temporal_conv_kernel: 3,
        gtm: true,
    }
}

pub fn randn(shape: &[usize], rng: &mut impl Rng, dtype: DType) -> Tensor {
    gaussian(shape, rng, dtype, &Device::Cpu).unwrap()
}

pub fn values(t: &Tensor) -> Vec<f64> {
    t.to_dtype(DType::F64).unwrap().flatten_all().unwrap().to_vec1().unwrap()
}

pub fn random_rotation(rng: &mut impl Rng, max_angle: f64) -> Rotation6D {
    let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let axis = if axis.norm() < 1e-3 { Vec3::y() } else { axis.normalize() };
    rot6d_encode(&axis_angle(&axis, rng.random_range(-max_angle..max_angle))).unwrap()
}

/// A smoothly wandering motion: per-joint rotations interpolate between
/// random keyframes every 10 frames.
pub fn random_motion(skel: &Skeleton, frames: usize, rng: &mut impl Rng) -> MotionSequence {
    let j = skel.num_joints();
    let keys: Vec<Vec<(Vec3, f64)>> = (0..frames / 10 + 2)
        .map(|_| {
            (0..j)
                .map(|_| {
                    let a = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    (a, rng.random_range(-0.6..0.6))
                })
                .collect()
        })
        .collect();
    let mut roots = Vec::with_capacity(frames);
    let mut rots = Vec::with_capacity(frames);
    for i in 0..frames {
        let (k, u) = (i / 10, (i % 10) as f64 / 10.0);
        let frame: Vec<Rotation6D> = (0..j)
            .map(|jj| {
                let (a0, t0) = keys[k][jj];
                let (a1, t1) = keys[k + 1][jj];
                let axis = a0 * (1.0 - u) + a1 * u;
                let axis = if axis.norm() < 1e-3 { Vec3::y() } else { axis.normalize() };
                rot6d_encode(&axis_angle(&axis, t0 * (1.0 - u) + t1 * u)).unwrap()
            })
            .collect();
        rots.push(frame);
        roots.push(Vec3::new(0.01 * i as f64, 0.9, 0.0));
    }
    compose_sequence(skel, 60.0, &roots, &rots, &ContactConfig::default()).unwrap()
}

/// Norm-wise relative error between the autodiff gradient of the scalar
/// `f(x)` and central differences, in double precision.
pub fn gradient_error(x: &Tensor, f: impl Fn(&Tensor) -> Tensor) -> f64 {
    let x = x.to_dtype(DType::F64).unwrap();
    let var = Var::from_tensor(&x).unwrap();
    let y = f(var.as_tensor());
    let grads = y.backward().unwrap();
    let analytic = values(grads.get(var.as_tensor()).expect("input receives a gradient"));

    let base = values(&x);
    let h = 1e-6;
    let eval = |v: &[f64]| -> f64 {
        let t = Tensor::from_vec(v.to_vec(), x.dims(), &Device::Cpu).unwrap();
        f(&t).to_scalar::<f64>().unwrap()
    };
    let mut numeric = Vec::with_capacity(base.len());
    let mut probe = base.clone();
    for i in 0..base.len() {
        probe[i] = base[i] + h;
        let up = eval(&probe);
        probe[i] = base[i] - h;
        let down = eval(&probe);
        probe[i] = base[i];
        numeric.push((up - down) / (2.0 * h));
    }
    relative_error(&analytic, &numeric)
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    assert!(scale > 1e-8, "reference gradient vanishes");
    diff / scale
}

/// `sum(w * t)` for a fixed random `w`, so every output element matters.
pub fn weighted_sum(t: &Tensor, seed: u64) -> Tensor {
    let w = randn(t.dims(), &mut rng(seed), t.dtype());
    (t * w).unwrap().sum_all().unwrap()
}
