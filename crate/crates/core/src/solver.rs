//! Damped Newton-Raphson minimization of the penalized objective at fixed
//! difference weights.

use serde::{Deserialize, Serialize};

use crate::banded::{factor, solve, BandCholeskyFactor, BandedSymMatrix};
use crate::error::{Error, Result};
use crate::lexis::ExhaustiveStats;
use crate::likelihood::{CellOrder, LogHazardGrid, Objective, PenaltyWeights};
use crate::grid::Grid;

/// Bound on |η| inside the iteration; `e^40` exceeds any plausible hazard.
pub const ETA_BOUND: f64 = 40.0;

/// Largest diagonal shift tried, relative to `max(1, max diag)`.
const MAX_SHIFT: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub max_iter: usize,
    /// Bound on the ∞-norm of the gradient.
    pub grad_tol: f64,
    pub step_halvings_max: usize,
    /// First diagonal shift tried after a failed factorization.
    pub pd_shift: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: 1e-8,
            step_halvings_max: 20,
            pd_shift: 1e-10,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        if !(self.pd_shift > 0.0 && self.pd_shift <= MAX_SHIFT) {
            return Err(Error::InvalidConfig(format!("pd_shift must lie in (0, {MAX_SHIFT}], got {}", self.pd_shift)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Gradient ∞-norm reached `grad_tol`.
    Converged,
    MaxIterations,
    /// The predicted decrease is below the resolution of the objective, or no
    /// halved step decreased it.
    NoProgress,
}

/// One accepted Newton step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Objective after the step, accumulated from exact step differences.
    pub objective: f64,
    /// Gradient ∞-norm before the step.
    pub grad_norm: f64,
    pub step_halvings: usize,
    /// Absolute diagonal shift used to factor the Hessian (0 when none).
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub eta: LogHazardGrid,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub objective: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Number of cell updates cut back to ±[`ETA_BOUND`].
    pub clamp_events: usize,
    pub trace: Vec<IterationRecord>,
}

/// Minimizes the penalized negative log-likelihood starting from η = 0.
pub fn newton_raphson(stats: &ExhaustiveStats, kappa: f64, weights: &PenaltyWeights, config: &NewtonConfig) -> Result<FitResult> {
    let start = vec![0.0; stats.grid().n_cells()];
    newton_from(stats, kappa, weights, config, start)
}

/// As [`newton_raphson`], starting from `initial`.
pub fn newton_raphson_warm(
    stats: &ExhaustiveStats,
    kappa: f64,
    weights: &PenaltyWeights,
    config: &NewtonConfig,
    initial: &LogHazardGrid,
) -> Result<FitResult> {
    initial.values().check_shape(stats.shape())?;
    newton_from(stats, kappa, weights, config, initial.values().as_slice().to_vec())
}

/// Newton fit with unit difference weights (the ridge / L2 penalty).
pub fn ridge_fit(stats: &ExhaustiveStats, kappa: f64, config: &NewtonConfig) -> Result<FitResult> {
    let (rows, cols) = stats.shape();
    newton_raphson(stats, kappa, &PenaltyWeights::ones(rows, cols), config)
}

fn newton_from(
    stats: &ExhaustiveStats,
    kappa: f64,
    weights: &PenaltyWeights,
    config: &NewtonConfig,
    mut eta: Vec<f64>,
) -> Result<FitResult> {
    config.validate()?;
    let obj = Objective::new(stats, weights, kappa)?;
    let (rows, cols) = stats.shape();
    let order = CellOrder::new(rows, cols);
    let n = eta.len();

    // Without a penalty, cells without exposure carry a constant objective term.
    let frozen: Vec<bool> = if kappa == 0.0 {
        obj.exposure.iter().map(|&r| r == 0.0).collect()
    } else {
        vec![false; n]
    };
    let mut clamp_events = 0;
    for (e, &fz) in eta.iter_mut().zip(&frozen) {
        if fz {
            *e = 0.0;
        } else if !e.is_finite() || e.abs() > ETA_BOUND {
            *e = if e.is_nan() { 0.0 } else { e.clamp(-ETA_BOUND, ETA_BOUND) };
            clamp_events += 1;
        }
    }

    let mut f = obj.value(&eta);
    let mut g = vec![0.0; n];
    let mut cand = vec![0.0; n];
    let mut trace = Vec::new();
    let mut stop_reason = StopReason::MaxIterations;
    let mut grad_norm;
    let mut prev_grad_norm = f64::INFINITY;

    loop {
        obj.gradient_into(&eta, &mut g);
        for (gi, &fz) in g.iter_mut().zip(&frozen) {
            if fz {
                *gi = 0.0;
            }
        }
        grad_norm = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if grad_norm <= config.grad_tol {
            stop_reason = StopReason::Converged;
            break;
        }
        if trace.len() >= config.max_iter {
            break;
        }

        let mut h = obj.hessian(&eta, &order);
        for (i, &fz) in frozen.iter().enumerate() {
            if fz {
                let idx = order.index(i / cols, i % cols);
                h.add(idx, idx, 1.0);
            }
        }
        let (fac, shift) = factor_with_shift(&h, config.pd_shift)?;
        let step = order.to_grid_order(&solve(&fac, &order.to_hessian_order(&g))?);

        let decrement: f64 = step.iter().zip(&g).map(|(s, gi)| s * gi).sum();
        if !decrement.is_finite() {
            stop_reason = StopReason::NoProgress;
            break;
        }
        // Below this the objective cannot resolve the step; only a shrinking
        // gradient shows progress.
        let roundoff = decrement <= 16.0 * f64::EPSILON * (1.0 + f.abs());
        if roundoff && grad_norm >= prev_grad_norm {
            stop_reason = StopReason::NoProgress;
            break;
        }

        let mut t = 1.0;
        let mut accepted = None;
        for halvings in 0..=config.step_halvings_max {
            let mut clamped = 0;
            for i in 0..n {
                let x = eta[i] - t * step[i];
                cand[i] = if x > ETA_BOUND {
                    clamped += 1;
                    ETA_BOUND
                } else if x < -ETA_BOUND {
                    clamped += 1;
                    -ETA_BOUND
                } else {
                    x
                };
            }
            let delta = obj.difference(&eta, &cand);
            if delta <= 0.0 || (roundoff && halvings == 0) {
                accepted = Some((halvings, delta.min(0.0), clamped));
                break;
            }
            t *= 0.5;
        }
        let Some((step_halvings, delta, clamped)) = accepted else {
            stop_reason = StopReason::NoProgress;
            break;
        };
        std::mem::swap(&mut eta, &mut cand);
        clamp_events += clamped;
        f += delta;
        prev_grad_norm = grad_norm;
        trace.push(IterationRecord {
            objective: f,
            grad_norm,
            step_halvings,
            shift,
        });
    }

    let objective = obj.value(&eta);
    Ok(FitResult {
        eta: LogHazardGrid::from_parts_unchecked(Grid::from_vec(rows, cols, eta)?, stats.grid().clone()),
        iterations: trace.len(),
        final_grad_norm: grad_norm,
        objective,
        converged: stop_reason == StopReason::Converged,
        stop_reason,
        clamp_events,
        trace,
    })
}

/// Factors `h`, retrying with diagonal shifts `pd_shift·s, 10·pd_shift·s, …`
/// up to `MAX_SHIFT·s`, where `s = max(1, max diag)`.
fn factor_with_shift(h: &BandedSymMatrix, pd_shift: f64) -> Result<(BandCholeskyFactor, f64)> {
    let first_err = match factor(h, 0.0) {
        Ok(f) => return Ok((f, 0.0)),
        Err(e) => e,
    };
    let scale = h.max_abs_diagonal().max(1.0);
    let mut rel = pd_shift;
    while rel <= MAX_SHIFT * (1.0 + 1e-9) {
        let mut shifted = h.clone();
        shifted.add_to_diagonal(rel * scale);
        if let Ok(f) = factor(&shifted, 0.0) {
            return Ok((f, rel * scale));
        }
        rel *= 10.0;
    }
    Err(Error::HessianNotPositiveDefinite(first_err.to_string()))
}
