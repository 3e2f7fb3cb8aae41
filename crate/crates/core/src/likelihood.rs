//! Penalized negative log-likelihood of a piecewise-constant hazard in the
//! log-hazard parametrization `η = log λ`.
//!
//! For events `O` and exposure `R`,
//!
//! ```text
//! ℓ(η)      = Σ exp(η_jk) R_jk − O_jk η_jk
//! ℓ_κ(η)    = ℓ(η) + κ/2 Σ v_jk (η_j+1,k − η_jk)² + κ/2 Σ w_jk (η_j,k+1 − η_jk)²
//! ```
//!
//! No penalty acts across the grid boundary. The Hessian is banded once the
//! cells are vectorized along the shorter grid axis first; see [`CellOrder`].

use serde::{Deserialize, Serialize};

use crate::banded::BandedSymMatrix;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lexis::{ExhaustiveStats, GridSpec};

/// A J×K grid of finite log-hazards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHazardGrid {
    values: Grid<f64>,
    grid: GridSpec,
}

impl LogHazardGrid {
    pub fn new(values: Grid<f64>, grid: GridSpec) -> Result<Self> {
        values.check_shape(grid.shape())?;
        check_finite(&values)?;
        Ok(Self { values, grid })
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        let (j, k) = grid.shape();
        Self {
            values: Grid::filled(j, k, 0.0),
            grid: grid.clone(),
        }
    }

    pub(crate) fn from_parts_unchecked(values: Grid<f64>, grid: GridSpec) -> Self {
        Self { values, grid }
    }

    pub fn values(&self) -> &Grid<f64> {
        &self.values
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn hazard(&self) -> Grid<f64> {
        self.values.map(|e| e.exp())
    }
}

fn check_finite(values: &Grid<f64>) -> Result<()> {
    match values.indexed_iter().find(|(_, v)| !v.is_finite()) {
        Some(((row, col), _)) => Err(Error::NonFiniteEta { row, col }),
        None => Ok(()),
    }
}

/// Difference weights: `v` couples cohort neighbours ((J−1)×K) and `w`
/// couples age neighbours (J×(K−1)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    v: Grid<f64>,
    w: Grid<f64>,
}

impl PenaltyWeights {
    pub fn new(v: Grid<f64>, w: Grid<f64>) -> Result<Self> {
        let (j, k) = (w.rows(), v.cols());
        if v.rows() + 1 != j || w.cols() + 1 != k {
            return Err(Error::InvalidWeights(format!(
                "v is {:?} and w is {:?}; expected (J-1)xK and Jx(K-1)",
                v.shape(),
                w.shape()
            )));
        }
        if let Some(x) = v.iter().chain(w.iter()).find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::InvalidWeights(format!("weights must be positive and finite, got {x}")));
        }
        Ok(Self { v, w })
    }

    /// Unit weights (the L2/ridge penalty) for a J×K grid.
    pub fn ones(rows: usize, cols: usize) -> Self {
        Self {
            v: Grid::filled(rows.saturating_sub(1), cols, 1.0),
            w: Grid::filled(rows, cols.saturating_sub(1), 1.0),
        }
    }

    pub(crate) fn from_parts_unchecked(v: Grid<f64>, w: Grid<f64>) -> Self {
        Self { v, w }
    }

    pub fn v(&self) -> &Grid<f64> {
        &self.v
    }

    pub fn w(&self) -> &Grid<f64> {
        &self.w
    }

    /// Shape (J, K) of the grid the weights apply to.
    pub fn grid_shape(&self) -> (usize, usize) {
        (self.w.rows(), self.v.cols())
    }

    fn check(&self, shape: (usize, usize)) -> Result<()> {
        if self.grid_shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape,
                found: self.grid_shape(),
            });
        }
        Ok(())
    }
}

/// Vectorization of grid cells for the Hessian.
///
/// Cells are enumerated with the shorter axis varying fastest, so neighbours
/// along the shorter axis sit at offset 1 and neighbours along the longer axis
/// at offset `min(J, K)`, which is the stored bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellOrder {
    rows: usize,
    cols: usize,
    age_fastest: bool,
}

impl CellOrder {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            age_fastest: cols <= rows,
        }
    }

    pub fn index(&self, j: usize, k: usize) -> usize {
        if self.age_fastest {
            j * self.cols + k
        } else {
            k * self.rows + j
        }
    }

    pub fn bandwidth(&self) -> usize {
        self.rows.min(self.cols)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Permutes a row-major grid vector into Hessian order.
    pub fn to_hessian_order(&self, grid_vec: &[f64]) -> Vec<f64> {
        if self.age_fastest {
            return grid_vec.to_vec();
        }
        let mut out = vec![0.0; grid_vec.len()];
        for j in 0..self.rows {
            for k in 0..self.cols {
                out[k * self.rows + j] = grid_vec[j * self.cols + k];
            }
        }
        out
    }

    /// Inverse of [`CellOrder::to_hessian_order`].
    pub fn to_grid_order(&self, hess_vec: &[f64]) -> Vec<f64> {
        if self.age_fastest {
            return hess_vec.to_vec();
        }
        let mut out = vec![0.0; hess_vec.len()];
        for j in 0..self.rows {
            for k in 0..self.cols {
                out[j * self.cols + k] = hess_vec[k * self.rows + j];
            }
        }
        out
    }
}

/// Penalized Hessian together with the cell order it is expressed in.
#[derive(Debug, Clone)]
pub struct GridHessian {
    pub matrix: BandedSymMatrix,
    pub order: CellOrder,
}

/// Borrowed view of one penalized problem; slices are row-major over the grid.
#[derive(Clone, Copy)]
pub(crate) struct Objective<'a> {
    pub rows: usize,
    pub cols: usize,
    pub events: &'a [f64],
    pub exposure: &'a [f64],
    pub v: &'a [f64],
    pub w: &'a [f64],
    pub kappa: f64,
}

impl<'a> Objective<'a> {
    pub fn new(stats: &'a ExhaustiveStats, weights: &'a PenaltyWeights, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidKappa(kappa));
        }
        weights.check(stats.shape())?;
        let (rows, cols) = stats.shape();
        Ok(Self {
            rows,
            cols,
            events: stats.events().as_slice(),
            exposure: stats.exposure().as_slice(),
            v: weights.v.as_slice(),
            w: weights.w.as_slice(),
            kappa,
        })
    }

    pub fn likelihood(&self, eta: &[f64]) -> f64 {
        eta.iter()
            .zip(self.exposure)
            .zip(self.events)
            .map(|((&e, &r), &o)| cell_nll(e, o, r))
            .sum()
    }

    /// `κ/2 Σ v Δ² + κ/2 Σ w Δ²`.
    pub fn penalty(&self, eta: &[f64]) -> f64 {
        if self.kappa == 0.0 {
            return 0.0;
        }
        let (rows, cols) = (self.rows, self.cols);
        let mut s = 0.0;
        for j in 0..rows.saturating_sub(1) {
            for k in 0..cols {
                let d = eta[(j + 1) * cols + k] - eta[j * cols + k];
                s += self.v[j * cols + k] * d * d;
            }
        }
        let wc = cols.saturating_sub(1);
        for j in 0..rows {
            for k in 0..wc {
                let d = eta[j * cols + k + 1] - eta[j * cols + k];
                s += self.w[j * wc + k] * d * d;
            }
        }
        0.5 * self.kappa * s
    }

    pub fn value(&self, eta: &[f64]) -> f64 {
        self.likelihood(eta) + self.penalty(eta)
    }

    /// `value(to) − value(from)`, summed term by term so that small changes
    /// are resolved without cancellation against the objective's magnitude.
    pub fn difference(&self, from: &[f64], to: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..from.len() {
            let d = to[i] - from[i];
            if d == 0.0 {
                continue;
            }
            if self.exposure[i] != 0.0 {
                s += self.exposure[i] * from[i].exp() * d.exp_m1();
            }
            s -= self.events[i] * d;
        }
        if self.kappa == 0.0 {
            return s;
        }
        let (rows, cols) = (self.rows, self.cols);
        let mut p = 0.0;
        let term = |a: usize, b: usize| {
            let (df, dt) = (from[b] - from[a], to[b] - to[a]);
            (dt - df) * (dt + df)
        };
        for j in 0..rows.saturating_sub(1) {
            for k in 0..cols {
                p += self.v[j * cols + k] * term(j * cols + k, (j + 1) * cols + k);
            }
        }
        let wc = cols.saturating_sub(1);
        for j in 0..rows {
            for k in 0..wc {
                p += self.w[j * wc + k] * term(j * cols + k, j * cols + k + 1);
            }
        }
        s + 0.5 * self.kappa * p
    }

    pub fn gradient_into(&self, eta: &[f64], out: &mut [f64]) {
        let (rows, cols) = (self.rows, self.cols);
        for (i, g) in out.iter_mut().enumerate() {
            *g = eta[i].exp() * self.exposure[i] - self.events[i];
        }
        if self.kappa == 0.0 {
            return;
        }
        let kappa = self.kappa;
        for j in 0..rows.saturating_sub(1) {
            for k in 0..cols {
                let (a, b) = (j * cols + k, (j + 1) * cols + k);
                let t = kappa * self.v[a] * (eta[b] - eta[a]);
                out[a] -= t;
                out[b] += t;
            }
        }
        let wc = cols.saturating_sub(1);
        for j in 0..rows {
            for k in 0..wc {
                let (a, b) = (j * cols + k, j * cols + k + 1);
                let t = kappa * self.w[j * wc + k] * (eta[b] - eta[a]);
                out[a] -= t;
                out[b] += t;
            }
        }
    }

    pub fn hessian(&self, eta: &[f64], order: &CellOrder) -> BandedSymMatrix {
        let (rows, cols) = (self.rows, self.cols);
        let mut m = BandedSymMatrix::zeros(rows * cols, order.bandwidth());
        for j in 0..rows {
            for k in 0..cols {
                let i = j * cols + k;
                let idx = order.index(j, k);
                m.add(idx, idx, eta[i].exp() * self.exposure[i]);
            }
        }
        if self.kappa == 0.0 {
            return m;
        }
        let kappa = self.kappa;
        for j in 0..rows.saturating_sub(1) {
            for k in 0..cols {
                let c = kappa * self.v[j * cols + k];
                let (a, b) = (order.index(j, k), order.index(j + 1, k));
                m.add(a, a, c);
                m.add(b, b, c);
                m.add(a, b, -c);
            }
        }
        let wc = cols.saturating_sub(1);
        for j in 0..rows {
            for k in 0..wc {
                let c = kappa * self.w[j * wc + k];
                let (a, b) = (order.index(j, k), order.index(j, k + 1));
                m.add(a, a, c);
                m.add(b, b, c);
                m.add(a, b, -c);
            }
        }
        m
    }
}

#[inline]
pub(crate) fn cell_nll(eta: f64, events: f64, exposure: f64) -> f64 {
    let mut s = 0.0;
    if exposure != 0.0 {
        s += eta.exp() * exposure;
    }
    if events != 0.0 {
        s -= events * eta;
    }
    s
}

fn check_eta(eta: &LogHazardGrid, stats: &ExhaustiveStats) -> Result<()> {
    eta.values.check_shape(stats.shape())?;
    check_finite(&eta.values)
}

/// `Σ exp(η) R − O η`; cells without data contribute nothing.
pub fn neg_log_likelihood(eta: &LogHazardGrid, stats: &ExhaustiveStats) -> Result<f64> {
    check_eta(eta, stats)?;
    let weights = PenaltyWeights::ones(stats.shape().0, stats.shape().1);
    Ok(Objective::new(stats, &weights, 0.0)?.likelihood(eta.values.as_slice()))
}

/// The difference penalty `κ/2 Σ v Δ² + κ/2 Σ w Δ²` alone.
pub fn penalty_term(eta: &LogHazardGrid, weights: &PenaltyWeights, kappa: f64) -> Result<f64> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidKappa(kappa));
    }
    weights.check(eta.shape())?;
    check_finite(&eta.values)?;
    let obj = Objective {
        rows: eta.shape().0,
        cols: eta.shape().1,
        events: &[],
        exposure: &[],
        v: weights.v.as_slice(),
        w: weights.w.as_slice(),
        kappa,
    };
    Ok(obj.penalty(eta.values.as_slice()))
}

pub fn penalized_nll(eta: &LogHazardGrid, weights: &PenaltyWeights, kappa: f64, stats: &ExhaustiveStats) -> Result<f64> {
    check_eta(eta, stats)?;
    Ok(Objective::new(stats, weights, kappa)?.value(eta.values.as_slice()))
}

/// Gradient of [`penalized_nll`], row-major over the grid.
pub fn gradient(eta: &LogHazardGrid, weights: &PenaltyWeights, kappa: f64, stats: &ExhaustiveStats) -> Result<Vec<f64>> {
    check_eta(eta, stats)?;
    let obj = Objective::new(stats, weights, kappa)?;
    let mut g = vec![0.0; eta.values.len()];
    obj.gradient_into(eta.values.as_slice(), &mut g);
    Ok(g)
}

/// Hessian of [`penalized_nll`] in banded form.
pub fn hessian(eta: &LogHazardGrid, weights: &PenaltyWeights, kappa: f64, stats: &ExhaustiveStats) -> Result<GridHessian> {
    check_eta(eta, stats)?;
    let obj = Objective::new(stats, weights, kappa)?;
    let (rows, cols) = stats.shape();
    let order = CellOrder::new(rows, cols);
    Ok(GridHessian {
        matrix: obj.hessian(eta.values.as_slice(), &order),
        order,
    })
}

/// Status of a closed-form estimate `O / R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateStatus {
    Estimated,
    /// `O = 0` with `R > 0`: the estimate is λ = 0 (η = −∞).
    ZeroHazard,
    /// `R = 0`: no estimate.
    NoData,
}

impl EstimateStatus {
    pub fn classify(events: f64, exposure: f64) -> Self {
        if exposure <= 0.0 {
            EstimateStatus::NoData
        } else if events == 0.0 {
            EstimateStatus::ZeroHazard
        } else {
            EstimateStatus::Estimated
        }
    }
}

/// Unpenalized maximum likelihood estimate with per-cell status.
///
/// `eta` is `−∞` for zero-hazard cells and NaN (as is `hazard`) for cells
/// without data.
#[derive(Debug, Clone, PartialEq)]
pub struct MleGrid {
    pub hazard: Grid<f64>,
    pub eta: Grid<f64>,
    pub status: Grid<EstimateStatus>,
}

pub fn mle(stats: &ExhaustiveStats) -> MleGrid {
    let (rows, cols) = stats.shape();
    let mut hazard = Grid::filled(rows, cols, f64::NAN);
    let mut status = Grid::filled(rows, cols, EstimateStatus::NoData);
    for (((j, k), &o), &r) in stats.events().indexed_iter().zip(stats.exposure().iter()) {
        let s = EstimateStatus::classify(o, r);
        status[(j, k)] = s;
        if s != EstimateStatus::NoData {
            hazard[(j, k)] = o / r;
        }
    }
    let eta = hazard.map(|h| h.ln());
    MleGrid { hazard, eta, status }
}
