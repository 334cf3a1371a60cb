use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

fn check_set(set: &[Vec<f64>], what: &'static str) -> Result<usize> {
    if set.len() < 2 {
        return Err(Error::TooShort { what, needed: 2, got: set.len() });
    }
    let d = set[0].len();
    if let Some(bad) = set.iter().find(|v| v.len() != d) {
        return Err(Error::LengthMismatch { what: "feature vector length", expected: d, got: bad.len() });
    }
    Ok(d)
}

/// Sample mean and unbiased covariance.
pub fn mean_and_covariance(set: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = check_set(set, "covariance")?;
    let n = set.len();
    let mut mean = DVector::zeros(d);
    for v in set {
        mean += DVector::from_column_slice(v);
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for v in set {
        let c = DVector::from_column_slice(v) - &mean;
        cov += &c * c.transpose();
    }
    cov /= (n - 1) as f64;
    Ok((mean, cov))
}

/// Symmetric positive semi-definite square root; negative eigenvalues from
/// round-off are clipped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `Tr((A^1/2 B A^1/2)^1/2)`, which equals `Tr((AB)^1/2)` for PSD `A`, `B`.
fn trace_sqrt_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let ra = psd_sqrt(a);
    let inner = &ra * b * &ra;
    let sym = (&inner + inner.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum()
}

fn frechet_one_way(ma: &DVector<f64>, ca: &DMatrix<f64>, mb: &DVector<f64>, cb: &DMatrix<f64>) -> f64 {
    (ma - mb).norm_squared() + ca.trace() + cb.trace() - 2.0 * trace_sqrt_product(ca, cb)
}

/// Fréchet distance between Gaussians fitted to two feature sets,
/// `|mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^1/2)`.
///
/// The matrix square root term is evaluated in both argument orders and
/// averaged, so the result is exactly symmetric.
pub fn frechet_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    let da = check_set(a, "Frechet distance")?;
    let db = check_set(b, "Frechet distance")?;
    if da != db {
        return Err(Error::LengthMismatch { what: "feature dimension", expected: da, got: db });
    }
    let (ma, ca) = mean_and_covariance(a)?;
    let (mb, cb) = mean_and_covariance(b)?;
    Ok(0.5 * (frechet_one_way(&ma, &ca, &mb, &cb) + frechet_one_way(&mb, &cb, &ma, &ca)))
}

/// Mean Euclidean distance over all unordered pairs.
pub fn diversity(set: &[Vec<f64>]) -> Result<f64> {
    check_set(set, "diversity")?;
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            total += set[i]
                .iter()
                .zip(&set[j])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}
