//! Additive age-cohort comparator `log λ_jk = μ + a_j + b_k`, fitted by
//! damped Newton on the Poisson likelihood of the exhaustive statistics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lexis::ExhaustiveStats;
use crate::likelihood::LogHazardGrid;

/// Which level of each effect is pinned to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constraint {
    #[default]
    First,
    Last,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgeCohortFit {
    pub intercept: f64,
    /// One per cohort interval; the reference level is 0.
    pub cohort_effect: Vec<f64>,
    /// One per age interval; the reference level is 0.
    pub age_effect: Vec<f64>,
    pub eta: LogHazardGrid,
    pub iterations: usize,
    pub converged: bool,
}

impl AgeCohortFit {
    pub fn hazard(&self) -> Grid<f64> {
        self.eta.hazard()
    }
}

const MAX_ITER: usize = 200;
const GRAD_TOL: f64 = 1e-9;

struct Layout {
    rows: usize,
    cols: usize,
    cohort_ref: usize,
    age_ref: usize,
}

impl Layout {
    fn n_params(&self) -> usize {
        1 + (self.rows - 1) + (self.cols - 1)
    }

    /// Parameter slot of cohort level `j`, if free.
    fn cohort_slot(&self, j: usize) -> Option<usize> {
        match j.cmp(&self.cohort_ref) {
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Less => Some(1 + j),
            std::cmp::Ordering::Greater => Some(j),
        }
    }

    fn age_slot(&self, k: usize) -> Option<usize> {
        let base = self.rows;
        match k.cmp(&self.age_ref) {
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Less => Some(base + k),
            std::cmp::Ordering::Greater => Some(base + k - 1),
        }
    }

    fn eta(&self, theta: &DVector<f64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for j in 0..self.rows {
            let a = self.cohort_slot(j).map_or(0.0, |s| theta[s]);
            for k in 0..self.cols {
                let b = self.age_slot(k).map_or(0.0, |s| theta[s]);
                out.push(theta[0] + a + b);
            }
        }
        out
    }
}

fn objective(eta: &[f64], o: &[f64], r: &[f64]) -> f64 {
    eta.iter().zip(o).zip(r).map(|((&e, &o), &r)| e.exp() * r - o * e).sum()
}

/// Fits the additive model. Every cohort row and age column needs exposure,
/// otherwise its effect is undefined.
pub fn fit_age_cohort(stats: &ExhaustiveStats, constraint: Constraint) -> Result<AgeCohortFit> {
    let (rows, cols) = stats.shape();
    let o = stats.events().as_slice();
    let r = stats.exposure().as_slice();
    for j in 0..rows {
        if (0..cols).all(|k| r[j * cols + k] == 0.0) {
            return Err(Error::UndefinedEffect { axis: "cohort", index: j });
        }
    }
    for k in 0..cols {
        if (0..rows).all(|j| r[j * cols + k] == 0.0) {
            return Err(Error::UndefinedEffect { axis: "age", index: k });
        }
    }
    if stats.total_events() == 0.0 {
        return Err(Error::InvalidStats("the age-cohort model needs at least one event".into()));
    }
    let layout = match constraint {
        Constraint::First => Layout { rows, cols, cohort_ref: 0, age_ref: 0 },
        Constraint::Last => Layout { rows, cols, cohort_ref: rows - 1, age_ref: cols - 1 },
    };
    let p = layout.n_params();
    let mut theta = DVector::zeros(p);
    theta[0] = (stats.total_events() / stats.total_exposure()).ln();
    let mut eta = layout.eta(&theta);
    let mut f = objective(&eta, o, r);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITER {
        let mut g = DVector::zeros(p);
        let mut h = DMatrix::zeros(p, p);
        for j in 0..rows {
            let a = layout.cohort_slot(j);
            for k in 0..cols {
                let i = j * cols + k;
                let m = eta[i].exp() * r[i];
                let resid = m - o[i];
                let b = layout.age_slot(k);
                let slots = [Some(0), a, b];
                for (x, sx) in slots.iter().enumerate() {
                    let Some(sx) = *sx else { continue };
                    g[sx] += resid;
                    for sy in slots[..=x].iter().flatten() {
                        h[(sx, *sy)] += m;
                        if *sy != sx {
                            h[(*sy, sx)] += m;
                        }
                    }
                }
            }
        }
        if g.amax() <= GRAD_TOL * stats.total_events().max(1.0) {
            converged = true;
            break;
        }
        let step = solve_spd(h, &g)?;
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let cand = &theta - &step * t;
            let ce = layout.eta(&cand);
            let fc = objective(&ce, o, r);
            if fc <= f {
                theta = cand;
                eta = ce;
                f = fc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        if !moved {
            break;
        }
    }

    let cohort_effect = (0..rows).map(|j| layout.cohort_slot(j).map_or(0.0, |s| theta[s])).collect();
    let age_effect = (0..cols).map(|k| layout.age_slot(k).map_or(0.0, |s| theta[s])).collect();
    Ok(AgeCohortFit {
        intercept: theta[0],
        cohort_effect,
        age_effect,
        eta: LogHazardGrid::new(Grid::from_vec(rows, cols, eta)?, stats.grid().clone())?,
        iterations,
        converged,
    })
}

/// Cholesky solve, retrying with a growing ridge when the information matrix
/// is numerically singular (effects of event-free rows drifting to −∞).
fn solve_spd(h: DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = h.diagonal().amax().max(1.0);
    let mut shift = 0.0;
    loop {
        let mut m = h.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += shift;
        }
        if let Some(chol) = m.cholesky() {
            return Ok(chol.solve(g));
        }
        shift = if shift == 0.0 { 1e-12 * scale } else { shift * 10.0 };
        if shift > 1e-2 * scale {
            return Err(Error::HessianNotPositiveDefinite("age-cohort information matrix".into()));
        }
    }
}
