//! Self-describing checkpoint container: parameter and optimizer tensors in
//! safetensors, with configuration, schedule and normalizer in the header.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use safetensors::tensor::{Dtype, SafeTensors, TensorView};
use serde::{Deserialize, Serialize};

use super::{DanceDenoiser, DenoiserConfig, Normalizer};
use crate::diffusion::ScheduleConfig;
use crate::error::{Error, Result};
use crate::io_util::write_atomic;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
const META_KEY: &str = "longdance";
const PARAM_PREFIX: &str = "param/";
const OPT_PREFIX: &str = "opt/";

/// Adaptive-moment optimizer state as stored on disk; `slots` maps
/// `"<moment>/<param name>"` to a tensor shaped like the parameter.
#[derive(Debug, Clone, Default)]
pub struct OptimizerState {
    pub kind: String,
    pub step: u64,
    pub slots: BTreeMap<String, Tensor>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    denoiser: DenoiserConfig,
    trajectory_channel: usize,
    schedule: ScheduleConfig,
    normalizer: Normalizer,
    dtype: String,
    step: u64,
    optimizer_kind: Option<String>,
    optimizer_step: u64,
    #[serde(default)]
    run: serde_json::Value,
}

/// Everything stored next to the parameters.
#[derive(Debug, Clone)]
pub struct CheckpointMeta {
    pub schedule: ScheduleConfig,
    pub normalizer: Normalizer,
    pub step: u64,
    pub optimizer: Option<OptimizerState>,
    /// Free-form echo of the run configuration.
    pub run: serde_json::Value,
}

/// A loaded checkpoint.
#[derive(Debug)]
pub struct Checkpoint {
    pub model: DanceDenoiser,
    pub meta: CheckpointMeta,
}

fn dtype_name(d: DType) -> Result<&'static str> {
    match d {
        DType::F32 => Ok("f32"),
        DType::F64 => Ok("f64"),
        other => Err(Error::Checkpoint(format!("unsupported dtype {other:?}"))),
    }
}

fn tensor_bytes(t: &Tensor) -> Result<(Dtype, Vec<u8>)> {
    let flat = t.flatten_all()?;
    match t.dtype() {
        DType::F32 => Ok((
            Dtype::F32,
            flat.to_vec1::<f32>()?.iter().flat_map(|v| v.to_le_bytes()).collect(),
        )),
        DType::F64 => Ok((
            Dtype::F64,
            flat.to_vec1::<f64>()?.iter().flat_map(|v| v.to_le_bytes()).collect(),
        )),
        other => Err(Error::Checkpoint(format!("unsupported dtype {other:?}"))),
    }
}

fn view_tensor(view: &TensorView<'_>, device: &Device) -> Result<Tensor> {
    let shape = view.shape().to_vec();
    let data = view.data();
    let t = match view.dtype() {
        Dtype::F32 => {
            let v: Vec<f32> = data
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            Tensor::from_vec(v, shape, device)?
        }
        Dtype::F64 => {
            let v: Vec<f64> = data
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            Tensor::from_vec(v, shape, device)?
        }
        other => return Err(Error::Checkpoint(format!("unsupported stored dtype {other:?}"))),
    };
    Ok(t)
}

/// Writes atomically (temp file, then rename).
pub fn save_checkpoint(path: impl AsRef<Path>, model: &DanceDenoiser, ckpt: &CheckpointMeta) -> Result<()> {
    let path = path.as_ref();
    let header = Header {
        format_version: CHECKPOINT_FORMAT_VERSION,
        denoiser: model.config().clone(),
        trajectory_channel: model.trajectory_channel(),
        schedule: ckpt.schedule,
        normalizer: ckpt.normalizer.clone(),
        dtype: dtype_name(model.dtype())?.to_string(),
        step: ckpt.step,
        optimizer_kind: ckpt.optimizer.as_ref().map(|o| o.kind.clone()),
        optimizer_step: ckpt.optimizer.as_ref().map_or(0, |o| o.step),
        run: ckpt.run.clone(),
    };
    let mut blobs: Vec<(String, Dtype, Vec<usize>, Vec<u8>)> = Vec::new();
    for (name, var) in model.params().iter() {
        let (dt, bytes) = tensor_bytes(var.as_tensor())?;
        blobs.push((format!("{PARAM_PREFIX}{name}"), dt, var.dims().to_vec(), bytes));
    }
    if let Some(opt) = &ckpt.optimizer {
        for (name, t) in &opt.slots {
            let (dt, bytes) = tensor_bytes(t)?;
            blobs.push((format!("{OPT_PREFIX}{name}"), dt, t.dims().to_vec(), bytes));
        }
    }
    let views = blobs
        .iter()
        .map(|(n, dt, shape, bytes)| {
            TensorView::new(*dt, shape.clone(), bytes)
                .map(|v| (n.clone(), v))
                .map_err(|e| Error::Checkpoint(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = HashMap::from([(META_KEY.to_string(), serde_json::to_string(&header)?)]);
    let bytes =
        safetensors::serialize(views, Some(meta)).map_err(|e| Error::Checkpoint(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn load_checkpoint(path: impl AsRef<Path>, device: &Device) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let st = SafeTensors::deserialize(&bytes)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let (_, metadata) = SafeTensors::read_metadata(&bytes)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let raw = metadata
        .metadata()
        .as_ref()
        .and_then(|m| m.get(META_KEY))
        .ok_or_else(|| Error::Checkpoint(format!("{}: missing header", path.display())))?;
    let header: Header = serde_json::from_str(raw)?;
    if header.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {} is not supported (expected {CHECKPOINT_FORMAT_VERSION})",
            header.format_version
        )));
    }
    let dtype = match header.dtype.as_str() {
        "f32" => DType::F32,
        "f64" => DType::F64,
        other => return Err(Error::Checkpoint(format!("unsupported dtype `{other}`"))),
    };
    let model = DanceDenoiser::new(
        header.denoiser.clone(),
        header.trajectory_channel,
        &header.schedule.build()?,
        0,
        dtype,
        device,
    )?;
    let mut seen = 0;
    let mut slots = BTreeMap::new();
    for (name, view) in st.tensors() {
        let t = view_tensor(&view, device)?;
        if let Some(p) = name.strip_prefix(PARAM_PREFIX) {
            model.params().assign(p, &t)?;
            seen += 1;
        } else if let Some(s) = name.strip_prefix(OPT_PREFIX) {
            slots.insert(s.to_string(), t);
        } else {
            return Err(Error::Checkpoint(format!("unexpected tensor `{name}`")));
        }
    }
    if seen != model.params().len() {
        return Err(Error::Checkpoint(format!(
            "{} parameters stored, model has {}",
            seen,
            model.params().len()
        )));
    }
    let optimizer = header.optimizer_kind.map(|kind| OptimizerState {
        kind,
        step: header.optimizer_step,
        slots,
    });
    Ok(Checkpoint {
        model,
        meta: CheckpointMeta {
            schedule: header.schedule,
            normalizer: header.normalizer,
            step: header.step,
            optimizer,
            run: header.run,
        },
    })
}
