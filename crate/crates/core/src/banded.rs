//! Symmetric banded matrices and their LDLᵀ factorization.
//!
//! The band is stored by diagonal offset: `bands[d][i]` holds entry
//! `(i + d, i)` for `d = 0..=bandwidth`. Factorization costs
//! `O(n · bandwidth²)` and each solve `O(n · bandwidth)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandedSymMatrix {
    dim: usize,
    bandwidth: usize,
    bands: Vec<Vec<f64>>,
}

impl BandedSymMatrix {
    pub fn zeros(dim: usize, bandwidth: usize) -> Self {
        let bandwidth = bandwidth.min(dim.saturating_sub(1));
        let bands = (0..=bandwidth).map(|d| vec![0.0; dim - d.min(dim)]).collect();
        Self { dim, bandwidth, bands }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, 0);
        m.bands[0].iter_mut().for_each(|x| *x = 1.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn band(&self, offset: usize) -> &[f64] {
        &self.bands[offset]
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.bands[0]
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d > self.bandwidth {
            0.0
        } else {
            self.bands[d][lo]
        }
    }

    /// Adds `value` to entries `(i, j)` and `(j, i)`.
    ///
    /// Panics when `(i, j)` lies outside the stored band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        assert!(d <= self.bandwidth, "entry ({i}, {j}) outside bandwidth {}", self.bandwidth);
        self.bands[d][lo] += value;
    }

    pub fn add_to_diagonal(&mut self, shift: f64) {
        self.bands[0].iter_mut().for_each(|x| *x += shift);
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        self.bands[0].iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let mut y: Vec<f64> = self.bands[0].iter().zip(x).map(|(a, b)| a * b).collect();
        for d in 1..=self.bandwidth {
            for (i, &a) in self.bands[d].iter().enumerate() {
                y[i + d] += a * x[i];
                y[i] += a * x[i + d];
            }
        }
        Ok(y)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

/// `M = L D Lᵀ` with unit lower-triangular banded `L` and positive diagonal `D`.
#[derive(Debug, Clone)]
pub struct BandCholeskyFactor {
    dim: usize,
    bandwidth: usize,
    // Row r holds L[r][r-bandwidth..r] contiguously (leading slots zero near the top).
    lower: Vec<f64>,
    diag: Vec<f64>,
}

impl BandCholeskyFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn d(&self) -> &[f64] {
        &self.diag
    }

    /// `L[i][j]` for `j <= i`.
    pub fn l(&self, i: usize, j: usize) -> f64 {
        match i.checked_sub(j) {
            Some(0) => 1.0,
            Some(d) if d <= self.bandwidth => self.lower[i * self.bandwidth + self.bandwidth - d],
            _ => 0.0,
        }
    }

    /// `L D Lᵀ` restricted to the band.
    pub fn reconstruct(&self) -> BandedSymMatrix {
        let p = self.bandwidth;
        let mut m = BandedSymMatrix::zeros(self.dim, p);
        for d in 0..=p {
            for i in 0..self.dim - d {
                let r = i + d;
                let lo = r.saturating_sub(p);
                let s: f64 = (lo..=i).map(|k| self.l(r, k) * self.l(i, k) * self.diag[k]).sum();
                m.bands[d][i] = s;
            }
        }
        m
    }
}

/// Factors a symmetric banded matrix without pivoting.
///
/// A pivot that is not strictly positive, or that falls below
/// `ridge_floor · max|diag|`, aborts with [`Error::NotPositiveDefinite`].
pub fn factor(m: &BandedSymMatrix, ridge_floor: f64) -> Result<BandCholeskyFactor> {
    let n = m.dim;
    let p = m.bandwidth;
    let floor = ridge_floor.max(0.0) * m.max_abs_diagonal();
    let mut lower = vec![0.0; n * p];
    let mut diag = vec![0.0; n];
    // scratch: L[i][k] * D[k] for the current column i
    let mut ld = vec![0.0; p];

    for i in 0..n {
        let lo = i.saturating_sub(p);
        let mut di = m.bands[0][i];
        for k in lo..i {
            let lik = lower[i * p + p - (i - k)];
            ld[p - (i - k)] = lik * diag[k];
            di -= lik * ld[p - (i - k)];
        }
        if !(di > floor) || !di.is_finite() {
            return Err(Error::NotPositiveDefinite { index: i, pivot: di });
        }
        diag[i] = di;

        for r in i + 1..=(i + p).min(n - 1) {
            let d = r - i;
            let mut s = m.bands[d][i];
            // columns k in max(lo_r, lo)..i shared by rows r and i
            let k0 = r.saturating_sub(p).max(lo);
            let row_r = &mut lower[r * p..(r + 1) * p];
            for k in k0..i {
                s -= row_r[p - (r - k)] * ld[p - (i - k)];
            }
            row_r[p - d] = s / di;
        }
    }
    Ok(BandCholeskyFactor {
        dim: n,
        bandwidth: p,
        lower,
        diag,
    })
}

/// Solves `M x = rhs` given the factor of `M`.
pub fn solve(f: &BandCholeskyFactor, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = f.dim;
    let p = f.bandwidth;
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rhs.len(),
        });
    }
    let mut x = rhs.to_vec();
    // L y = b
    for r in 0..n {
        let row = &f.lower[r * p..(r + 1) * p];
        let lo = r.saturating_sub(p);
        let mut s = x[r];
        for k in lo..r {
            s -= row[p - (r - k)] * x[k];
        }
        x[r] = s;
    }
    for (xi, di) in x.iter_mut().zip(&f.diag) {
        *xi /= di;
    }
    // Lᵀ x = z
    for r in (0..n).rev() {
        let xr = x[r];
        if xr == 0.0 {
            continue;
        }
        let row = &f.lower[r * p..(r + 1) * p];
        let lo = r.saturating_sub(p);
        for k in lo..r {
            x[k] -= row[p - (r - k)] * xr;
        }
    }
    Ok(x)
}
