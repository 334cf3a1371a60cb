mod common;

use candle_core::{DType, Device, Tensor, D};
use longdance::diffusion::{ConditioningContext, NoiseSchedule, ScheduleConfig, ScheduleKind};
use longdance::model::{attention, load_checkpoint, save_checkpoint, CheckpointMeta, DanceDenoiser, Normalizer};
use longdance::train::{Adam, AdamConfig, OptimizerKind};
use proptest::prelude::*;

use common::{gradient_error, randn, rng, tiny_config, values, weighted_sum};

fn naive_attention(q: &Tensor, k: &Tensor, v: &Tensor, scale: f64) -> Tensor {
    let s = (q.matmul(&k.t().unwrap()).unwrap() * scale).unwrap();
    let e = s.broadcast_sub(&s.max_keepdim(D::Minus1).unwrap()).unwrap().exp().unwrap();
    let p = e.broadcast_div(&e.sum_keepdim(D::Minus1).unwrap()).unwrap();
    p.matmul(v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fused_attention_matches_the_textbook_form(h in 1usize..4, nq in 1usize..9, nk in 1usize..9, d in 1usize..7, seed in 0u64..100) {
        let mut r = rng(seed);
        let q = randn(&[h, nq, d], &mut r, DType::F64);
        let k = randn(&[h, nk, d], &mut r, DType::F64);
        let v = randn(&[h, nk, d], &mut r, DType::F64);
        let scale = 1.0 / (d as f64).sqrt();
        let fused = values(&attention(&q, &k, &v, scale).unwrap());
        let naive = values(&naive_attention(&q, &k, &v, scale));
        prop_assert!(fused.iter().zip(&naive).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}

#[test]
fn fused_attention_gradients_match_finite_differences() {
    let mut r = rng(1);
    let q = randn(&[2, 5, 4], &mut r, DType::F64);
    let k = randn(&[2, 7, 4], &mut r, DType::F64);
    let v = randn(&[2, 7, 4], &mut r, DType::F64);
    let f = |q: &Tensor, k: &Tensor, v: &Tensor| weighted_sum(&attention(q, k, v, 0.5).unwrap(), 3);
    assert!(gradient_error(&q, |x| f(x, &k, &v)) < 1e-6);
    assert!(gradient_error(&k, |x| f(&q, x, &v)) < 1e-6);
    assert!(gradient_error(&v, |x| f(&q, &k, x)) < 1e-6);
}

fn context(cfg: &longdance::model::DenoiserConfig, seed: u64) -> ConditioningContext {
    let mut r = rng(seed);
    ConditioningContext {
        music: randn(&[2, cfg.music_frames, cfg.music_dim], &mut r, DType::F32),
        past: randn(&[2, cfg.past_frames, cfg.motion_dim], &mut r, DType::F32),
        future: randn(&[2, cfg.future_frames, cfg.motion_dim], &mut r, DType::F32),
        steps: vec![4, 17],
    }
}

#[test]
fn checkpoints_round_trip_parameters_and_optimizer_state() {
    let cfg = tiny_config(10, 3);
    let model = DanceDenoiser::new(cfg.clone(), 2, &NoiseSchedule::new(50, ScheduleKind::Cosine).unwrap(), 5, DType::F32, &Device::Cpu).unwrap();
    let ctx = context(&cfg, 2);
    let mut adam = Adam::new(OptimizerKind::Adam, AdamConfig { lr: 1e-2, ..AdamConfig::default() });
    for _ in 0..2 {
        let grads = weighted_sum(&model.forward(&ctx).unwrap(), 4).backward().unwrap();
        adam.apply(model.params(), &grads, 1.0).unwrap();
    }
    let normalizer = Normalizer::identity(10, 3);
    let meta = CheckpointMeta {
        schedule: ScheduleConfig::default(),
        normalizer: normalizer.clone(),
        step: 2,
        optimizer: Some(adam.export()),
        run: serde_json::json!({ "note": "round trip" }),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.safetensors");
    save_checkpoint(&path, &model, &meta).unwrap();
    let back = load_checkpoint(&path, &Device::Cpu).unwrap();

    assert_eq!(back.model.config(), model.config());
    assert_eq!(back.meta.step, 2);
    assert_eq!(back.meta.normalizer, normalizer);
    assert_eq!(back.meta.run, meta.run);
    for (name, var) in model.params().iter() {
        let loaded = back.model.params().get(name).unwrap();
        assert_eq!(values(var.as_tensor()), values(loaded.as_tensor()), "{name}");
    }
    let state = back.meta.optimizer.unwrap();
    let saved = adam.export();
    assert_eq!(state.step, saved.step);
    assert_eq!(state.slots.keys().collect::<Vec<_>>(), saved.slots.keys().collect::<Vec<_>>());
    for (k, t) in &saved.slots {
        assert_eq!(values(t), values(&state.slots[k]), "{k}");
    }
    assert_eq!(values(&model.forward(&ctx).unwrap()), values(&back.model.forward(&ctx).unwrap()));
}

#[test]
fn truncated_checkpoints_are_rejected() {
    let cfg = tiny_config(10, 3);
    let model = DanceDenoiser::new(cfg, 2, &NoiseSchedule::new(50, ScheduleKind::Cosine).unwrap(), 5, DType::F32, &Device::Cpu).unwrap();
    let meta = CheckpointMeta {
        schedule: ScheduleConfig::default(),
        normalizer: Normalizer::identity(10, 3),
        step: 0,
        optimizer: None,
        run: serde_json::Value::Null,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.safetensors");
    save_checkpoint(&path, &model, &meta).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    assert!(load_checkpoint(&path, &Device::Cpu).is_err());
}

#[test]
fn initialization_is_seeded() {
    let cfg = tiny_config(10, 3);
    let ctx = context(&cfg, 3);
    let out = |seed| {
        let m = DanceDenoiser::new(cfg.clone(), 2, &NoiseSchedule::new(50, ScheduleKind::Cosine).unwrap(), seed, DType::F32, &Device::Cpu).unwrap();
        values(&m.forward(&ctx).unwrap())
    };
    assert_eq!(out(1), out(1));
    assert_ne!(out(1), out(2));
}
