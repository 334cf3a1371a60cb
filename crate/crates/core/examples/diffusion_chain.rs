//! Forward noising with the cosine schedule, partial noising of a
//! conditioning context, and a reverse chain driven by an oracle.

use candle_core::{DType, Device, Tensor};
use longdance::diffusion::{
    gaussian, partial_noise, q_sample, sample_window, ConditioningContext, NoiseSchedule, ScheduleKind,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> longdance::Result<()> {
    let sched = NoiseSchedule::new(50, ScheduleKind::Cosine)?;
    for t in [1, 10, 25, 40, 50] {
        println!("t = {t:>2}: alpha_bar = {:.4}", sched.alpha_bar(t));
    }
    let dev = Device::Cpu;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x0 = Tensor::ones((1, 20, 4), DType::F32, &dev)?;
    let noise = gaussian(&[1, 20, 4], &mut rng, DType::F32, &dev)?;
    let xt = q_sample(&x0, 25, &noise, &sched)?;
    println!("mean of x_25 for x0 = 1: {:.3}", xt.mean_all()?.to_scalar::<f32>()?);

    let music = gaussian(&[1, 40, 3], &mut rng, DType::F32, &dev)?;
    let past = gaussian(&[1, 10, 4], &mut rng, DType::F32, &dev)?;
    let ctx = ConditioningContext::clean(music.clone(), past.clone(), x0.clone())?;
    let noised = partial_noise(&ctx, &[30], &noise, &sched)?;
    let same = (noised.past - &past)?.abs()?.max_all()?.to_scalar::<f32>()?;
    println!("past changed by partial noising: {same}");

    let oracle = |_: &ConditioningContext| -> longdance::Result<Tensor> { Ok(x0.clone()) };
    let out = sample_window(&oracle, &music, &past, 20, &sched, &mut rng)?;
    let err = (out - &x0)?.abs()?.max_all()?.to_scalar::<f32>()?;
    println!("oracle reverse chain, max error: {err:.2e}");
    Ok(())
}
