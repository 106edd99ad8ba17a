//! Empirical autocovariance and Bartlett-kernel long-run covariance.
//!
//! The long-run covariance
//!
//! ```text
//! omega_hat = S_0 + sum_{w=1..W} (1 - w/(W+1)) * (S_w + S_w')
//! ```
//!
//! sums triangular-weighted autocovariances `S_w` up to the bandwidth
//! `W = floor(log10(n))`, so that weak serial dependence enters the test
//! statistics through second-order properties only. The divisor of every
//! `S_w` is the full segment length `n`, not `n - w`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::series::{sample_mean, Segment, TimeSeries};

/// Eigenvalues at or below this are treated as singular.
pub const EPS_PD: f64 = 1e-12;

/// Square real matrix produced by the covariance estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    m: DMatrix<f64>,
}

impl CovMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "covariance matrix must be square");
        Self { m }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: DMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: DMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Largest absolute asymmetry `|m_ij - m_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for j in (i + 1)..self.dim() {
                worst = worst.max((self.m[(i, j)] - self.m[(j, i)]).abs());
            }
        }
        worst
    }

    /// Quadratic form `x' M x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let mut acc = 0.0;
        for i in 0..self.dim() {
            let mut row = 0.0;
            for (j, &xj) in x.iter().enumerate() {
                row += self.m[(i, j)] * xj;
            }
            acc += x[i] * row;
        }
        acc
    }

    /// Matrix-vector product `M x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim());
        (0..self.dim())
            .map(|i| x.iter().enumerate().map(|(j, &xj)| self.m[(i, j)] * xj).sum())
            .collect()
    }

    fn symmetric_eigen(&self) -> Result<(DMatrix<f64>, Vec<f64>)> {
        if self.asymmetry() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "matrix is not symmetric (asymmetry {:.3e})",
                self.asymmetry()
            )));
        }
        let eig = self.m.clone().symmetric_eigen();
        let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        if let Some(&min) = values.iter().min_by(|a, b| a.total_cmp(b)) {
            if min <= EPS_PD {
                return Err(Error::Singular { eigenvalue: min });
            }
        }
        Ok((eig.eigenvectors, values))
    }

    /// Inverse of a symmetric positive definite matrix.
    pub fn inverse(&self) -> Result<CovMatrix> {
        let (vectors, values) = self.symmetric_eigen()?;
        Ok(rebuild(&vectors, &values, |v| 1.0 / v))
    }
}

fn rebuild(vectors: &DMatrix<f64>, values: &[f64], f: impl Fn(f64) -> f64) -> CovMatrix {
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| f(v)),
    ));
    CovMatrix::from_matrix(vectors * d * vectors.transpose())
}

/// Symmetric inverse square root: returns `S` with `S * m * S = I`.
pub fn inverse_sqrt(m: &CovMatrix) -> Result<CovMatrix> {
    let (vectors, values) = m.symmetric_eigen()?;
    Ok(rebuild(&vectors, &values, |v| 1.0 / v.sqrt()))
}

/// Empirical autocovariance matrix of a segment at lag `w`.
///
/// The mean is taken over the same segment; the divisor is the full segment
/// length. For `w >= 1` the result is in general not symmetric.
pub fn autocovariance(series: &TimeSeries, seg: Segment, w: usize) -> Result<CovMatrix> {
    seg.check_within(series.len())?;
    let n = seg.len();
    if w >= n {
        return Err(Error::Range(format!("lag {w} must be below segment length {n}")));
    }
    let dim = series.dim();
    let mean = sample_mean(series, seg)?;
    let mut acc = DMatrix::<f64>::zeros(dim, dim);
    // Relative index k runs w+1..=n; absolute index is seg.start - 1 + k.
    for k in (w + 1)..=n {
        let x = series.row(seg.start - 1 + k);
        let x_lag = series.row(seg.start - 1 + k - w);
        for i in 0..dim {
            let di = x[i] - mean[i];
            for j in 0..dim {
                acc[(i, j)] += di * (x_lag[j] - mean[j]);
            }
        }
    }
    acc /= n as f64;
    Ok(CovMatrix::from_matrix(acc))
}

/// Bandwidth used by [`bartlett_long_run`].
pub fn bartlett_bandwidth(n: usize) -> usize {
    debug_assert!(n >= 1);
    (n as f64).log10().floor() as usize
}

/// Triangular kernel weight, `1 - |x|` inside the unit interval.
pub fn bartlett_weight(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        1.0 - x.abs()
    } else {
        0.0
    }
}

/// Long-run covariance estimate plus a degeneracy flag.
///
/// A constant segment produces a zero matrix flagged `degenerate` instead of
/// an error, so callers can report "no test possible" themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRunCov {
    pub cov: CovMatrix,
    pub degenerate: bool,
}

/// Bartlett-kernel long-run covariance of a segment.
pub fn bartlett_long_run(series: &TimeSeries, seg: Segment) -> Result<LongRunCov> {
    seg.check_within(series.len())?;
    let n = seg.len();
    if n < 2 {
        return Err(Error::Range(format!("segment length {n} below 2")));
    }
    let lag0 = autocovariance(series, seg, 0)?;
    let mean = sample_mean(series, seg)?;
    let scale = 1.0 + mean.iter().map(|m| m * m).sum::<f64>();
    let trace: f64 = (0..lag0.dim()).map(|i| lag0.get(i, i)).sum();
    if trace.abs() <= 1e-20 * scale {
        return Ok(LongRunCov { cov: CovMatrix::zeros(series.dim()), degenerate: true });
    }
    let w_max = bartlett_bandwidth(n);
    let mut acc = lag0.m;
    for w in 1..=w_max {
        let k = bartlett_weight(w as f64 / (w_max as f64 + 1.0));
        let sw = autocovariance(series, seg, w)?.m;
        acc += k * (&sw + sw.transpose());
    }
    Ok(LongRunCov { cov: CovMatrix::from_matrix(acc), degenerate: false })
}
