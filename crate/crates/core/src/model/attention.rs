//! Fused scaled dot-product attention. Each (batch, head) slice is handled
//! on its own so the score matrix stays in cache; the backward pass
//! recomputes the probabilities instead of storing them.

use candle_core::{CpuStorage, CustomOp3, Layout, Shape, Tensor};
use rayon::prelude::*;

use super::ops::{exp_nonpos_f32, row_dot_f32, row_max_f32, row_sum_f32};
use crate::error::{Error, Result};

trait Float: Copy + Send + Sync + Default + 'static {
    fn from_f64(x: f64) -> Self;
    fn softmax_row(row: &mut [Self], scale: f64);
    fn dot(a: &[Self], b: &[Self]) -> Self;
    fn sub_mul(y: Self, g: Self, dot: Self, scale: f64) -> Self;
}

impl Float for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }

    fn softmax_row(row: &mut [f32], scale: f64) {
        let scale = scale as f32;
        let shift = row_max_f32(row) * scale;
        for x in row.iter_mut() {
            *x = exp_nonpos_f32(*x * scale - shift);
        }
        let inv = 1.0 / row_sum_f32(row);
        for x in row.iter_mut() {
            *x *= inv;
        }
    }

    fn dot(a: &[f32], b: &[f32]) -> f32 {
        row_dot_f32(a, b)
    }

    fn sub_mul(y: f32, g: f32, dot: f32, scale: f64) -> f32 {
        scale as f32 * y * (g - dot)
    }
}

impl Float for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }

    fn softmax_row(row: &mut [f64], scale: f64) {
        let shift = row.iter().copied().fold(f64::NEG_INFINITY, f64::max) * scale;
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x * scale - shift).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn sub_mul(y: f64, g: f64, dot: f64, scale: f64) -> f64 {
        scale * y * (g - dot)
    }
}

/// Row-major matrix view: element `(r, c)` at `ptr + r * rs + c * cs`.
#[derive(Clone, Copy)]
struct View<T> {
    ptr: *const T,
    rs: isize,
    cs: isize,
}

fn rm<T>(s: &[T], cols: usize) -> View<T> {
    View { ptr: s.as_ptr(), rs: cols as isize, cs: 1 }
}

fn tr<T>(s: &[T], cols: usize) -> View<T> {
    View { ptr: s.as_ptr(), rs: 1, cs: cols as isize }
}

/// `dst (m×n, row-major) = lhs (m×k) · rhs (k×n)`.
fn matmul<T: Float>(dst: &mut [T], m: usize, n: usize, k: usize, lhs: View<T>, rhs: View<T>) {
    debug_assert_eq!(dst.len(), m * n);
    // SAFETY: all views address slices of at least the stated extents, and
    // `dst` is exclusively borrowed.
    unsafe {
        gemm::gemm(
            m,
            n,
            k,
            dst.as_mut_ptr(),
            1,
            n as isize,
            false,
            lhs.ptr,
            lhs.cs,
            lhs.rs,
            rhs.ptr,
            rhs.cs,
            rhs.rs,
            T::default(),
            T::from_f64(1.0),
            false,
            false,
            false,
            gemm::Parallelism::None,
        );
    }
}

#[derive(Clone, Copy)]
struct Dims {
    heads: usize,
    nq: usize,
    nk: usize,
    dh: usize,
}

fn probabilities<T: Float>(p: &mut [T], q: &[T], k: &[T], d: Dims, scale: f64) {
    matmul(p, d.nq, d.nk, d.dh, rm(q, d.dh), tr(k, d.dh));
    for row in p.chunks_exact_mut(d.nk) {
        T::softmax_row(row, scale);
    }
}

fn forward<T: Float>(q: &[T], k: &[T], v: &[T], d: Dims, scale: f64) -> Vec<T> {
    let mut out = vec![T::default(); d.heads * d.nq * d.dh];
    out.par_chunks_mut(d.nq * d.dh).enumerate().for_each(|(h, o)| {
        let q = &q[h * d.nq * d.dh..(h + 1) * d.nq * d.dh];
        let k = &k[h * d.nk * d.dh..(h + 1) * d.nk * d.dh];
        let v = &v[h * d.nk * d.dh..(h + 1) * d.nk * d.dh];
        let mut p = vec![T::default(); d.nq * d.nk];
        probabilities(&mut p, q, k, d, scale);
        matmul(o, d.nq, d.dh, d.nk, rm(&p, d.nk), rm(v, d.dh));
    });
    out
}

/// Gradients packed per head as `[dq (nq rows) | dk (nk rows) | dv (nk rows)]`.
fn backward<T: Float>(q: &[T], g: &[T], k: &[T], v: &[T], d: Dims, scale: f64) -> Vec<T> {
    let rows = d.nq + 2 * d.nk;
    let mut out = vec![T::default(); d.heads * rows * d.dh];
    out.par_chunks_mut(rows * d.dh).enumerate().for_each(|(h, o)| {
        let q = &q[h * d.nq * d.dh..(h + 1) * d.nq * d.dh];
        let g = &g[h * d.nq * d.dh..(h + 1) * d.nq * d.dh];
        let k = &k[h * d.nk * d.dh..(h + 1) * d.nk * d.dh];
        let v = &v[h * d.nk * d.dh..(h + 1) * d.nk * d.dh];
        let mut p = vec![T::default(); d.nq * d.nk];
        probabilities(&mut p, q, k, d, scale);
        let (dq, rest) = o.split_at_mut(d.nq * d.dh);
        let (dk, dv) = rest.split_at_mut(d.nk * d.dh);
        matmul(dv, d.nk, d.dh, d.nq, tr(&p, d.nk), rm(g, d.dh));
        let mut ds = vec![T::default(); d.nq * d.nk];
        matmul(&mut ds, d.nq, d.nk, d.dh, rm(g, d.dh), tr(v, d.dh));
        for (dsr, pr) in ds.chunks_exact_mut(d.nk).zip(p.chunks_exact(d.nk)) {
            let dot = T::dot(dsr, pr);
            for (x, y) in dsr.iter_mut().zip(pr) {
                *x = T::sub_mul(*y, *x, dot, scale);
            }
        }
        matmul(dq, d.nq, d.dh, d.nk, rm(&ds, d.nk), rm(k, d.dh));
        matmul(dk, d.nk, d.dh, d.nq, tr(&ds, d.nk), rm(q, d.dh));
    });
    out
}

fn slice<'a, T>(data: &'a [T], l: &Layout) -> candle_core::Result<&'a [T]> {
    match l.contiguous_offsets() {
        Some((a, b)) => Ok(&data[a..b]),
        None => candle_core::bail!("attention inputs must be contiguous"),
    }
}

fn dims_of(lq: &Layout, lk: &Layout, q_rows_factor: usize) -> candle_core::Result<Dims> {
    let (hq, nq, dh) = lq.shape().dims3()?;
    let (hk, nk, dk) = lk.shape().dims3()?;
    if hq != hk || dh != dk {
        candle_core::bail!("attention shapes {:?} / {:?}", lq.shape(), lk.shape());
    }
    Ok(Dims { heads: hq, nq: nq / q_rows_factor, nk, dh })
}

struct Attention {
    scale: f64,
}

impl CustomOp3 for Attention {
    fn name(&self) -> &'static str {
        "longdance-attention"
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
        let d = dims_of(l1, l2, 1)?;
        if l3.shape() != l2.shape() {
            candle_core::bail!("attention value shape {:?} vs key {:?}", l3.shape(), l2.shape());
        }
        let shape = Shape::from((d.heads, d.nq, d.dh));
        match (s1, s2, s3) {
            (CpuStorage::F32(q), CpuStorage::F32(k), CpuStorage::F32(v)) => Ok((
                CpuStorage::F32(forward(slice(q, l1)?, slice(k, l2)?, slice(v, l3)?, d, self.scale)),
                shape,
            )),
            (CpuStorage::F64(q), CpuStorage::F64(k), CpuStorage::F64(v)) => Ok((
                CpuStorage::F64(forward(slice(q, l1)?, slice(k, l2)?, slice(v, l3)?, d, self.scale)),
                shape,
            )),
            _ => candle_core::bail!("attention: unsupported dtype"),
        }
    }

    fn bwd(
        &self,
        q: &Tensor,
        k: &Tensor,
        v: &Tensor,
        _res: &Tensor,
        grad: &Tensor,
    ) -> candle_core::Result<(Option<Tensor>, Option<Tensor>, Option<Tensor>)> {
        let nq = q.dim(1)?;
        let nk = k.dim(1)?;
        let qg = Tensor::cat(&[q, &grad.contiguous()?], 1)?;
        let packed = qg.apply_op3_no_bwd(k, v, &AttentionGrad { scale: self.scale })?;
        Ok((
            Some(packed.narrow(1, 0, nq)?),
            Some(packed.narrow(1, nq, nk)?),
            Some(packed.narrow(1, nq + nk, nk)?),
        ))
    }
}

fn split_rows<T: Copy>(qg: &[T], d: Dims) -> (Vec<T>, Vec<T>) {
    let mut q = Vec::with_capacity(d.heads * d.nq * d.dh);
    let mut g = Vec::with_capacity(d.heads * d.nq * d.dh);
    for h in qg.chunks_exact(2 * d.nq * d.dh) {
        q.extend_from_slice(&h[..d.nq * d.dh]);
        g.extend_from_slice(&h[d.nq * d.dh..]);
    }
    (q, g)
}

/// First argument is `q` and the output gradient stacked along rows.
struct AttentionGrad {
    scale: f64,
}

impl CustomOp3 for AttentionGrad {
    fn name(&self) -> &'static str {
        "longdance-attention-grad"
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
        let d = dims_of(l1, l2, 2)?;
        let shape = Shape::from((d.heads, d.nq + 2 * d.nk, d.dh));
        match (s1, s2, s3) {
            (CpuStorage::F32(qg), CpuStorage::F32(k), CpuStorage::F32(v)) => {
                let (q, g) = split_rows(slice(qg, l1)?, d);
                Ok((
                    CpuStorage::F32(backward(&q, &g, slice(k, l2)?, slice(v, l3)?, d, self.scale)),
                    shape,
                ))
            }
            (CpuStorage::F64(qg), CpuStorage::F64(k), CpuStorage::F64(v)) => {
                let (q, g) = split_rows(slice(qg, l1)?, d);
                Ok((
                    CpuStorage::F64(backward(&q, &g, slice(k, l2)?, slice(v, l3)?, d, self.scale)),
                    shape,
                ))
            }
            _ => candle_core::bail!("attention-grad: unsupported dtype"),
        }
    }
}

/// `softmax(scale * q k^T) v` for `q: [H, Nq, D]`, `k, v: [H, Nk, D]`,
/// where `H` runs over batch and heads.
pub fn attention(q: &Tensor, k: &Tensor, v: &Tensor, scale: f64) -> Result<Tensor> {
    if q.rank() != 3 || k.dims() != v.dims() || k.rank() != 3 {
        return Err(Error::Shape(format!(
            "attention q {:?}, k {:?}, v {:?}",
            q.dims(),
            k.dims(),
            v.dims()
        )));
    }
    Ok(q
        .contiguous()?
        .apply_op3(&k.contiguous()?, &v.contiguous()?, Attention { scale })?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ops::scaled_softmax_last_dim;
    use candle_core::{DType, Device, Var};

    fn reference(q: &Tensor, k: &Tensor, v: &Tensor, scale: f64) -> Tensor {
        let s = q.matmul(&k.t().unwrap().contiguous().unwrap()).unwrap();
        scaled_softmax_last_dim(&s, scale).unwrap().matmul(v).unwrap()
    }

    #[test]
    fn matches_composed_attention_and_its_gradients() {
        let dev = Device::Cpu;
        for (nq, nk) in [(7, 7), (3, 9)] {
            let q = Var::randn(0f64, 1.0, (2, nq, 5), &dev).unwrap();
            let k = Var::randn(0f64, 1.0, (2, nk, 5), &dev).unwrap();
            let v = Var::randn(0f64, 1.0, (2, nk, 5), &dev).unwrap();
            let w = Tensor::randn(0f64, 1.0, (2, nq, 5), &dev).unwrap();
            let fused = attention(&q, &k, &v, 0.4).unwrap();
            let plain = reference(&q, &k, &v, 0.4);
            let diff = (&fused - &plain).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f64>().unwrap();
            assert!(diff < 1e-12, "{diff}");
            let gf = (fused * &w).unwrap().sum_all().unwrap().backward().unwrap();
            let gp = (plain * &w).unwrap().sum_all().unwrap().backward().unwrap();
            for var in [&q, &k, &v] {
                let a = gf.get(var.as_tensor()).unwrap();
                let b = gp.get(var.as_tensor()).unwrap();
                let d = (a - b).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f64>().unwrap();
                assert!(d < 1e-12, "{d}");
            }
        }
    }

    #[test]
    fn single_precision_agrees() {
        let dev = Device::Cpu;
        let q = Tensor::randn(0f32, 1.0, (3, 11, 4), &dev).unwrap();
        let k = Tensor::randn(0f32, 1.0, (3, 11, 4), &dev).unwrap();
        let v = Tensor::randn(0f32, 1.0, (3, 11, 4), &dev).unwrap();
        let a = attention(&q, &k, &v, 0.5).unwrap();
        let b = reference(&q.to_dtype(DType::F64).unwrap(), &k.to_dtype(DType::F64).unwrap(), &v.to_dtype(DType::F64).unwrap(), 0.5);
        let d = (a.to_dtype(DType::F64).unwrap() - b).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f64>().unwrap();
        assert!(d < 1e-5, "{d}");
    }
}
