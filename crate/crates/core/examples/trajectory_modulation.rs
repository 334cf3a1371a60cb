//! Trajectory modulation: a fresh layer is the identity, and a nudged one
//! scales and shifts features by functions of the root trajectory.

use candle_core::{DType, Device, Tensor};
use longdance::model::{gtm_modulate, GtmLayer, ParamStore};

fn main() -> longdance::Result<()> {
    let dev = Device::Cpu;
    let mut params = ParamStore::new(0, DType::F32, dev.clone());
    let layer = GtmLayer::new(&mut params, "gtm", 4)?;
    let features = Tensor::arange(0f32, 24.0, &dev)?.reshape((1, 6, 4))?;
    let trajectory = Tensor::arange(0f32, 18.0, &dev)?.reshape((1, 6, 3))?.affine(0.1, 0.0)?;

    let out = gtm_modulate(&features, &trajectory, &layer)?;
    let diff = (&out - &features)?.abs()?.max_all()?.to_scalar::<f32>()?;
    println!("fresh layer, max change: {diff}");

    params.assign("gtm.scale.weight", &Tensor::full(0.5f32, (4, 3), &dev)?)?;
    params.assign("gtm.shift.bias", &Tensor::full(-1f32, 4, &dev)?)?;
    let out = gtm_modulate(&features, &trajectory, &layer)?;
    println!("nudged layer, first frame: {:?}", out.get(0)?.get(0)?.to_vec1::<f32>()?);
    println!("nudged layer, last frame:  {:?}", out.get(0)?.get(5)?.to_vec1::<f32>()?);
    Ok(())
}
