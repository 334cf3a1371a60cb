//! Differentiable building blocks that candle does not ship with a backward
//! pass: a last-axis softmax and layer normalization, plus a dense layer.

use candle_core::{CpuStorage, CustomOp1, CustomOp2, CustomOp3, Layout, Shape, Tensor, D};

use crate::error::Result;

/// `exp(x)` for `x <= 0` in single precision, written so the loop in
/// [`softmax_rows_f32`] vectorizes. Relative error is below 2e-7 on
/// `[-87, 0]`; inputs below -87 flush to `exp(-87)`.
#[inline(always)]
pub(crate) fn exp_nonpos_f32(x: f32) -> f32 {
    const LOG2E: f32 = std::f32::consts::LOG2_E;
    const LN2_HI: f32 = 0.693_359_4;
    const LN2_LO: f32 = -2.121_944_4e-4;
    const ROUND: f32 = 12_582_912.0; // 1.5 * 2^23
    let x = if x < -87.0 { -87.0 } else { x };
    let shifted = x * LOG2E + ROUND;
    let n = shifted - ROUND;
    let r = x - n * LN2_HI - n * LN2_LO;
    let p = 1.987_569_1e-4_f32;
    let p = p * r + 1.398_199_9e-3;
    let p = p * r + 8.333_452e-3;
    let p = p * r + 4.166_579_6e-2;
    let p = p * r + 0.166_666_66;
    let p = p * r + 0.5;
    let e = (p * r * r) + r + 1.0;
    // The integer n sits in the low mantissa bits of `shifted`.
    let ni = shifted.to_bits().wrapping_sub(ROUND.to_bits());
    let bits = ni.wrapping_add(127) << 23;
    e * f32::from_bits(bits)
}

const LANES: usize = 8;

pub(crate) fn row_max_f32(s: &[f32]) -> f32 {
    let mut acc = [f32::NEG_INFINITY; LANES];
    let chunks = s.chunks_exact(LANES);
    let tail = chunks.remainder();
    for c in chunks {
        for k in 0..LANES {
            acc[k] = if c[k] > acc[k] { c[k] } else { acc[k] };
        }
    }
    let mut m = acc.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    for v in tail {
        m = m.max(*v);
    }
    m
}

pub(crate) fn row_sum_f32(s: &[f32]) -> f32 {
    let mut acc = [0f32; LANES];
    let chunks = s.chunks_exact(LANES);
    let tail = chunks.remainder();
    for c in chunks {
        for k in 0..LANES {
            acc[k] += c[k];
        }
    }
    acc.iter().sum::<f32>() + tail.iter().sum::<f32>()
}

pub(crate) fn row_dot_f32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..LANES {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f32>() + tail
}

fn softmax_rows_f32(src: &[f32], dst: &mut [f32], width: usize, scale: f32) {
    for (s, d) in src.chunks_exact(width).zip(dst.chunks_exact_mut(width)) {
        let shift = row_max_f32(s) * scale;
        for (x, y) in s.iter().zip(d.iter_mut()) {
            *y = exp_nonpos_f32(*x * scale - shift);
        }
        let inv = 1.0 / row_sum_f32(d);
        for y in d.iter_mut() {
            *y *= inv;
        }
    }
}

fn softmax_rows_f64(src: &[f64], dst: &mut [f64], width: usize, scale: f64) {
    for (s, d) in src.chunks_exact(width).zip(dst.chunks_exact_mut(width)) {
        let shift = s.iter().copied().fold(f64::NEG_INFINITY, f64::max) * scale;
        let mut sum = 0.0;
        for (x, y) in s.iter().zip(d.iter_mut()) {
            *y = (*x * scale - shift).exp();
            sum += *y;
        }
        for y in d.iter_mut() {
            *y /= sum;
        }
    }
}

fn contiguous<'a, T>(data: &'a [T], layout: &Layout) -> candle_core::Result<&'a [T]> {
    match layout.contiguous_offsets() {
        Some((a, b)) => Ok(&data[a..b]),
        None => candle_core::bail!("input must be contiguous"),
    }
}

/// `softmax(scale * x)` over the last axis, `scale > 0`.
struct Softmax {
    scale: f64,
}

impl CustomOp1 for Softmax {
    fn name(&self) -> &'static str {
        "longdance-softmax"
    }

    fn cpu_fwd(&self, storage: &CpuStorage, layout: &Layout) -> candle_core::Result<(CpuStorage, Shape)> {
        let shape = layout.shape().clone();
        let width = shape.dims().last().copied().unwrap_or(1);
        match storage {
            CpuStorage::F32(v) => {
                let src = contiguous(v, layout)?;
                let mut dst = vec![0f32; src.len()];
                softmax_rows_f32(src, &mut dst, width, self.scale as f32);
                Ok((CpuStorage::F32(dst), shape))
            }
            CpuStorage::F64(v) => {
                let src = contiguous(v, layout)?;
                let mut dst = vec![0f64; src.len()];
                softmax_rows_f64(src, &mut dst, width, self.scale);
                Ok((CpuStorage::F64(dst), shape))
            }
            _ => candle_core::bail!("softmax: unsupported dtype"),
        }
    }

    fn bwd(&self, _arg: &Tensor, res: &Tensor, grad_res: &Tensor) -> candle_core::Result<Option<Tensor>> {
        let g = grad_res.contiguous()?;
        Ok(Some(res.apply_op2_no_bwd(&g, &SoftmaxGrad { scale: self.scale })?))
    }
}

/// `scale * y * (g - sum(g * y))` along the last axis.
struct SoftmaxGrad {
    scale: f64,
}

fn softmax_grad_rows_f32(y: &[f32], g: &[f32], width: usize, scale: f32) -> Vec<f32> {
    let mut out = vec![0f32; y.len()];
    for ((yr, gr), o) in y
        .chunks_exact(width)
        .zip(g.chunks_exact(width))
        .zip(out.chunks_exact_mut(width))
    {
        let dot = row_dot_f32(yr, gr);
        for ((a, b), o) in yr.iter().zip(gr).zip(o.iter_mut()) {
            *o = scale * *a * (*b - dot);
        }
    }
    out
}

fn softmax_grad_rows_f64(y: &[f64], g: &[f64], width: usize, scale: f64) -> Vec<f64> {
    let mut out = vec![0f64; y.len()];
    for ((yr, gr), o) in y
        .chunks_exact(width)
        .zip(g.chunks_exact(width))
        .zip(out.chunks_exact_mut(width))
    {
        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
        for ((a, b), o) in yr.iter().zip(gr).zip(o.iter_mut()) {
            *o = scale * a * (b - dot);
        }
    }
    out
}

impl CustomOp2 for SoftmaxGrad {
    fn name(&self) -> &'static str {
        "longdance-softmax-grad"
    }

    fn cpu_fwd(
        &self,
        s1: &CpuStorage,
        l1: &Layout,
        s2: &CpuStorage,
        l2: &Layout,
    ) -> candle_core::Result<(CpuStorage, Shape)> {
        let shape = l1.shape().clone();
        let width = shape.dims().last().copied().unwrap_or(1);
        match (s1, s2) {
            (CpuStorage::F32(y), CpuStorage::F32(g)) => Ok((
                CpuStorage::F32(softmax_grad_rows_f32(contiguous(y, l1)?, contiguous(g, l2)?, width, self.scale as f32)),
                shape,
            )),
            (CpuStorage::F64(y), CpuStorage::F64(g)) => Ok((
                CpuStorage::F64(softmax_grad_rows_f64(contiguous(y, l1)?, contiguous(g, l2)?, width, self.scale)),
                shape,
            )),
            _ => candle_core::bail!("softmax-grad: unsupported dtype"),
        }
    }
}

/// Softmax over the last axis, differentiable.
pub fn softmax_last_dim(x: &Tensor) -> Result<Tensor> {
    scaled_softmax_last_dim(x, 1.0)
}

/// `softmax(scale * x)` over the last axis, differentiable; `scale > 0`.
pub fn scaled_softmax_last_dim(x: &Tensor, scale: f64) -> Result<Tensor> {
    Ok(x.contiguous()?.apply_op1(Softmax { scale })?)
}

/// Gaussian error linear unit in its logistic form, `x * sigmoid(1.702 x)`.
struct Gelu;

const GELU_K: f32 = 1.702;

#[inline(always)]
fn sigmoid_f32(y: f32) -> f32 {
    let e = exp_nonpos_f32(-y.abs());
    let s = 1.0 / (1.0 + e);
    if y >= 0.0 {
        s
    } else {
        e * s
    }
}

fn sigmoid_f64(y: f64) -> f64 {
    1.0 / (1.0 + (-y).exp())
}

impl CustomOp1 for Gelu {
    fn name(&self) -> &'static str {
        "longdance-gelu"
    }

    fn cpu_fwd(&self, storage: &CpuStorage, layout: &Layout) -> candle_core::Result<(CpuStorage, Shape)> {
        let shape = layout.shape().clone();
        match storage {
            CpuStorage::F32(v) => {
                let out = contiguous(v, layout)?.iter().map(|x| x * sigmoid_f32(GELU_K * x)).collect();
                Ok((CpuStorage::F32(out), shape))
            }
            CpuStorage::F64(v) => {
                let k = GELU_K as f64;
                let out = contiguous(v, layout)?.iter().map(|x| x * sigmoid_f64(k * x)).collect();
                Ok((CpuStorage::F64(out), shape))
            }
            _ => candle_core::bail!("gelu: unsupported dtype"),
        }
    }

    fn bwd(&self, arg: &Tensor, _res: &Tensor, grad_res: &Tensor) -> candle_core::Result<Option<Tensor>> {
        let g = grad_res.contiguous()?;
        Ok(Some(arg.contiguous()?.apply_op2_no_bwd(&g, &GeluGrad)?))
    }
}

struct GeluGrad;

impl CustomOp2 for GeluGrad {
    fn name(&self) -> &'static str {
        "longdance-gelu-grad"
    }

    fn cpu_fwd(
        &self,
        s1: &CpuStorage,
        l1: &Layout,
        s2: &CpuStorage,
        l2: &Layout,
    ) -> candle_core::Result<(CpuStorage, Shape)> {
        let shape = l1.shape().clone();
        match (s1, s2) {
            (CpuStorage::F32(x), CpuStorage::F32(g)) => {
                let out = contiguous(x, l1)?
                    .iter()
                    .zip(contiguous(g, l2)?)
                    .map(|(x, g)| {
                        let s = sigmoid_f32(GELU_K * x);
                        g * (s + GELU_K * x * s * (1.0 - s))
                    })
                    .collect();
                Ok((CpuStorage::F32(out), shape))
            }
            (CpuStorage::F64(x), CpuStorage::F64(g)) => {
                let k = GELU_K as f64;
                let out = contiguous(x, l1)?
                    .iter()
                    .zip(contiguous(g, l2)?)
                    .map(|(x, g)| {
                        let s = sigmoid_f64(k * x);
                        g * (s + k * x * s * (1.0 - s))
                    })
                    .collect();
                Ok((CpuStorage::F64(out), shape))
            }
            _ => candle_core::bail!("gelu-grad: unsupported dtype"),
        }
    }
}

pub fn gelu(x: &Tensor) -> Result<Tensor> {
    Ok(x.contiguous()?.apply_op1(Gelu)?)
}

/// Layer normalization over the last axis with learned scale and shift.
pub fn layer_norm(x: &Tensor, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<Tensor> {
    let dims = x.dims().to_vec();
    let w = *dims.last().expect("rank >= 1");
    if gain.dims() != [w] || bias.dims() != [w] {
        return Err(crate::error::Error::Shape(format!(
            "layer norm over width {w} with gain {:?} and bias {:?}",
            gain.dims(),
            bias.dims()
        )));
    }
    let rows = x.elem_count() / w;
    let y = x
        .reshape((rows, w))?
        .contiguous()?
        .apply_op3(&gain.contiguous()?, &bias.contiguous()?, LayerNorm { eps })?;
    Ok(y.reshape(dims)?)
}

/// Composed-op reference for [`layer_norm`].
pub fn layer_norm_reference(x: &Tensor, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<Tensor> {
    let mean = x.mean_keepdim(D::Minus1)?;
    let centered = x.broadcast_sub(&mean)?;
    let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
    let normed = centered.broadcast_div(&(var + eps)?.sqrt()?)?;
    Ok(normed.broadcast_mul(gain)?.broadcast_add(bias)?)
}

trait LnFloat: Copy + Default + 'static {
    fn f(x: f64) -> Self;
    fn to(self) -> f64;
}

impl LnFloat for f32 {
    fn f(x: f64) -> Self {
        x as f32
    }
    fn to(self) -> f64 {
        self as f64
    }
}

impl LnFloat for f64 {
    fn f(x: f64) -> Self {
        x
    }
    fn to(self) -> f64 {
        self
    }
}

/// Row mean and inverse standard deviation, accumulated in f64.
fn row_stats<T: LnFloat>(row: &[T], eps: f64) -> (f64, f64) {
    let n = row.len() as f64;
    let mean = row.iter().map(|v| v.to()).sum::<f64>() / n;
    let var = row.iter().map(|v| (v.to() - mean).powi(2)).sum::<f64>() / n;
    (mean, 1.0 / (var + eps).sqrt())
}

fn ln_forward<T: LnFloat>(x: &[T], gain: &[T], bias: &[T], eps: f64) -> Vec<T> {
    let w = gain.len();
    let mut out = vec![T::default(); x.len()];
    for (row, o) in x.chunks_exact(w).zip(out.chunks_exact_mut(w)) {
        let (mean, inv) = row_stats(row, eps);
        for c in 0..w {
            o[c] = T::f((row[c].to() - mean) * inv * gain[c].to() + bias[c].to());
        }
    }
    out
}

/// Packed gradients: `rows` rows of dx, then one row of d_gain and one of d_bias.
fn ln_backward<T: LnFloat>(x: &[T], gain: &[T], g: &[T], eps: f64) -> Vec<T> {
    let w = gain.len();
    let rows = x.len() / w;
    let mut out = vec![T::default(); (rows + 2) * w];
    let mut dgain = vec![0f64; w];
    let mut dbias = vec![0f64; w];
    let mut xhat = vec![0f64; w];
    let mut gy = vec![0f64; w];
    for r in 0..rows {
        let row = &x[r * w..(r + 1) * w];
        let gr = &g[r * w..(r + 1) * w];
        let (mean, inv) = row_stats(row, eps);
        let (mut m1, mut m2) = (0.0, 0.0);
        for c in 0..w {
            xhat[c] = (row[c].to() - mean) * inv;
            gy[c] = gr[c].to() * gain[c].to();
            m1 += gy[c];
            m2 += gy[c] * xhat[c];
            dgain[c] += gr[c].to() * xhat[c];
            dbias[c] += gr[c].to();
        }
        m1 /= w as f64;
        m2 /= w as f64;
        let o = &mut out[r * w..(r + 1) * w];
        for c in 0..w {
            o[c] = T::f(inv * (gy[c] - m1 - xhat[c] * m2));
        }
    }
    for c in 0..w {
        out[rows * w + c] = T::f(dgain[c]);
        out[(rows + 1) * w + c] = T::f(dbias[c]);
    }
    out
}

struct LayerNorm {
    eps: f64,
}

impl CustomOp3 for LayerNorm {
    fn name(&self) -> &'static str {
        "longdance-layer-norm"
    }

    fn cpu_fwd(
        &self,
        s1: &CpuStorage,
        l1: &Layout,
        s2: &CpuStorage,
        l2: &Layout,
        s3: &CpuStorage,
        l3: &Layout,
    ) -> candle_core::Result<(CpuStorage, Shape)> {
        let shape = l1.shape().clone();
        match (s1, s2, s3) {
            (CpuStorage::F32(x), CpuStorage::F32(g), CpuStorage::F32(b)) => Ok((
                CpuStorage::F32(ln_forward(contiguous(x, l1)?, contiguous(g, l2)?, contiguous(b, l3)?, self.eps)),
                shape,
            )),
            (CpuStorage::F64(x), CpuStorage::F64(g), CpuStorage::F64(b)) => Ok((
                CpuStorage::F64(ln_forward(contiguous(x, l1)?, contiguous(g, l2)?, contiguous(b, l3)?, self.eps)),
                shape,
            )),
            _ => candle_core::bail!("layer norm: unsupported dtype"),
        }
    }

    fn bwd(
        &self,
        x: &Tensor,
        gain: &Tensor,
        _bias: &Tensor,
        _res: &Tensor,
        grad: &Tensor,
    ) -> candle_core::Result<(Option<Tensor>, Option<Tensor>, Option<Tensor>)> {
        let rows = x.dim(0)?;
        let packed = x.apply_op3_no_bwd(gain, &grad.contiguous()?, &LayerNormGrad { eps: self.eps })?;
        Ok((
            Some(packed.narrow(0, 0, rows)?),
            Some(packed.get(rows)?),
            Some(packed.get(rows + 1)?),
        ))
    }
}

struct LayerNormGrad {
    eps: f64,
}

impl CustomOp3 for LayerNormGrad {
    fn name(&self) -> &'static str {
        "longdance-layer-norm-grad"
    }

    fn cpu_fwd(
        &self,
        s1: &CpuStorage,
        l1: &Layout,
        s2: &CpuStorage,
        l2: &Layout,
        s3: &CpuStorage,
        l3: &Layout,
    ) -> candle_core::Result<(CpuStorage, Shape)> {
        let (rows, w) = l1.shape().dims2()?;
        let shape = Shape::from((rows + 2, w));
        match (s1, s2, s3) {
            (CpuStorage::F32(x), CpuStorage::F32(g), CpuStorage::F32(d)) => Ok((
                CpuStorage::F32(ln_backward(contiguous(x, l1)?, contiguous(g, l2)?, contiguous(d, l3)?, self.eps)),
                shape,
            )),
            (CpuStorage::F64(x), CpuStorage::F64(g), CpuStorage::F64(d)) => Ok((
                CpuStorage::F64(ln_backward(contiguous(x, l1)?, contiguous(g, l2)?, contiguous(d, l3)?, self.eps)),
                shape,
            )),
            _ => candle_core::bail!("layer norm grad: unsupported dtype"),
        }
    }
}

/// Affine map over the last axis; weight is `[out, in]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let dims = x.dims().to_vec();
        let (inp, lead) = dims.split_last().expect("rank >= 1");
        let rows: usize = lead.iter().product();
        let out_dim = self.weight.dim(0)?;
        // The bias enters as a rank-one product so its gradient is a
        // matmul rather than a slow reduction over rows.
        let ones = Tensor::ones((rows, 1), x.dtype(), x.device())?;
        let y = (x.reshape((rows, *inp))?.matmul(&self.weight.t()?)?
            + ones.matmul(&self.bias.unsqueeze(0)?)?)?;
        let mut shape = lead.to_vec();
        shape.push(out_dim);
        Ok(y.reshape(shape)?)
    }

    pub fn out_dim(&self) -> usize {
        self.weight.dims()[0]
    }
}
