//! Multivariate normal sampling through a symmetric eigen factorization.
//!
//! The factor `F = V * sqrt(max(Λ, 0))` satisfies `F F' = Σ` for any symmetric
//! positive semi-definite `Σ`, including singular ones, which a Cholesky
//! factorization would reject.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative tolerance for treating a negative eigenvalue as round-off.
const EIGEN_TOL: f64 = 1e-9;

fn symmetric_eigen(m: &DMatrix<f64>) -> nalgebra::SymmetricEigen<f64, nalgebra::Dyn> {
    // Symmetrize first so round-off in the input cannot skew the decomposition.
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetric_eigen(m)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Returns `F` with `F F' = cov`; fails when `cov` has a clearly negative eigenvalue.
pub fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = symmetric_eigen(cov);
    let scale = eig
        .eigenvalues
        .iter()
        .fold(1.0f64, |acc, v| acc.max(v.abs()));
    if eig.eigenvalues.iter().any(|&v| v < -EIGEN_TOL * scale) {
        return Err(Error::NotPsd);
    }
    let mut factor = eig.eigenvectors;
    for (j, &v) in eig.eigenvalues.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        factor.column_mut(j).scale_mut(s);
    }
    Ok(factor)
}

/// Projects a symmetric matrix onto a correlation matrix: eigenvalues are
/// clipped at zero and the diagonal is rescaled back to one.
pub fn repair_correlation(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = symmetric_eigen(m);
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    let psd = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    let d: DVector<f64> = psd.diagonal().map(|x| x.sqrt());
    if d.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::NotPsd);
    }
    let mut out = psd;
    for i in 0..out.nrows() {
        for j in 0..out.ncols() {
            out[(i, j)] /= d[i] * d[j];
        }
        out[(i, i)] = 1.0;
    }
    Ok((&out + out.transpose()) * 0.5)
}

/// Draws from `N(mean, F F')`.
#[derive(Clone, Debug)]
pub struct MvnSampler {
    mean: Vec<f64>,
    // Row-major copy of the factor for cache-friendly sampling.
    factor: Vec<f64>,
    dim: usize,
}

impl MvnSampler {
    pub fn new(mean: Vec<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Config(format!(
                "covariance is {}x{} but the mean has {} entries",
                cov.nrows(),
                cov.ncols(),
                mean.len()
            )));
        }
        let f = psd_factor(cov)?;
        Ok(Self::from_factor(mean, &f))
    }

    pub fn from_factor(mean: Vec<f64>, factor: &DMatrix<f64>) -> Self {
        let dim = mean.len();
        let mut rows = Vec::with_capacity(dim * factor.ncols());
        for i in 0..dim {
            rows.extend(factor.row(i).iter());
        }
        Self {
            mean,
            factor: rows,
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Writes one draw into `out`; `z` is scratch space of length `dim`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
        let k = self.factor.len() / self.dim.max(1);
        for zi in z.iter_mut().take(k) {
            *zi = rng.sample(StandardNormal);
        }
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            let row = &self.factor[i * k..(i + 1) * k];
            *o = self.mean[i] + row.iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.factor.len() / self.dim.max(1);
        let mut z = vec![0.0; k];
        let mut out = vec![0.0; self.dim];
        self.sample_into(rng, &mut z, &mut out);
        out
    }
}
