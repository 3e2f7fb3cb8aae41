//! Timing of the banded factor+solve against a dense Cholesky on grid
//! Hessians, for checking how cost scales with grid size.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::banded::{factor, solve, BandedSymMatrix};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lexis::{ExhaustiveStats, GridSpec};
use crate::likelihood::{hessian, LogHazardGrid, PenaltyWeights};

/// A penalized grid Hessian in solver ordering with a right-hand side.
#[derive(Debug, Clone)]
pub struct BenchSystem {
    pub rows: usize,
    pub cols: usize,
    pub matrix: BandedSymMatrix,
    pub rhs: Vec<f64>,
}

/// Hessian of the penalized objective (unit weights, κ = 1) at a random
/// log-hazard, on random counts and exposures.
pub fn grid_system(rows: usize, cols: usize, seed: u64) -> Result<BenchSystem> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let spec = GridSpec::uniform((0.0, rows as f64), rows, (0.0, cols as f64), cols)?;
    let n = rows * cols;
    let events = Grid::from_vec(rows, cols, (0..n).map(|_| rng.random_range(0..20) as f64).collect())?;
    let exposure = Grid::from_vec(rows, cols, (0..n).map(|_| rng.random_range(10.0..100.0)).collect())?;
    let stats = ExhaustiveStats::new(spec.clone(), events, exposure, None)?;
    let eta = LogHazardGrid::new(Grid::from_vec(rows, cols, (0..n).map(|_| rng.random_range(-3.0..-1.0)).collect())?, spec)?;
    let h = hessian(&eta, &PenaltyWeights::ones(rows, cols), 1.0, &stats)?;
    let rhs = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Ok(BenchSystem { rows, cols, matrix: h.matrix, rhs })
}

pub fn banded_solve(sys: &BenchSystem) -> Result<Vec<f64>> {
    solve(&factor(&sys.matrix, 0.0)?, &sys.rhs)
}

pub fn dense_solve(sys: &BenchSystem) -> Result<Vec<f64>> {
    let n = sys.matrix.dim();
    let m = DMatrix::from_fn(n, n, |i, j| sys.matrix.get(i, j));
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::HessianNotPositiveDefinite("dense benchmark matrix".into()))?;
    Ok(chol.solve(&DVector::from_column_slice(&sys.rhs)).as_slice().to_vec())
}

/// Mean per-call time of one batch that repeats `f` until `min_batch` has
/// elapsed.
fn batch<T>(min_batch: Duration, mut f: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    let start = Instant::now();
    let mut calls = 0u32;
    loop {
        let v = f()?;
        calls += 1;
        if start.elapsed() >= min_batch {
            return Ok((start.elapsed().as_secs_f64() / calls as f64, v));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub cols: usize,
    pub dense: bool,
    pub seed: u64,
    pub min_batch_seconds: f64,
    pub batches: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self { cols: 10, dense: true, seed: 0, min_batch_seconds: 0.02, batches: 9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub bandwidth: usize,
    pub banded_seconds: f64,
    pub dense_seconds: Option<f64>,
    /// Largest difference between the two solutions relative to the largest
    /// entry of the banded one.
    pub max_relative_difference: Option<f64>,
}

/// Times every size in interleaved rounds and keeps the fastest batch per
/// size, so that drift in machine load affects all sizes alike. The dense
/// path includes assembling the dense matrix, which is O(n²) and small next
/// to its factorization.
pub fn run_bench(sizes: &[usize], opts: &BenchOptions) -> Result<Vec<BenchRow>> {
    if sizes.is_empty() || sizes.contains(&0) || opts.cols == 0 {
        return Err(Error::InvalidConfig("benchmark sizes must be positive".into()));
    }
    let min_batch = Duration::from_secs_f64(opts.min_batch_seconds.max(0.0));
    let systems = sizes.iter().map(|&rows| grid_system(rows, opts.cols, opts.seed)).collect::<Result<Vec<_>>>()?;
    let mut banded = vec![f64::INFINITY; sizes.len()];
    let mut solutions = vec![Vec::new(); sizes.len()];
    for _ in 0..opts.batches.max(1) {
        for (i, sys) in systems.iter().enumerate() {
            let (t, x) = batch(min_batch, || banded_solve(sys))?;
            banded[i] = banded[i].min(t);
            solutions[i] = x;
        }
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for (i, sys) in systems.iter().enumerate() {
        let (dense_seconds, max_relative_difference) = if opts.dense {
            // One factorization of the largest system can take seconds; a
            // single batch per size suffices at that scale.
            let (t, y) = batch(min_batch, || dense_solve(sys))?;
            let x = &solutions[i];
            let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            let diff = x.iter().zip(&y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            (Some(t), Some(diff / scale))
        } else {
            (None, None)
        };
        rows.push(BenchRow {
            rows: sys.rows,
            cols: sys.cols,
            dim: sys.matrix.dim(),
            bandwidth: sys.matrix.bandwidth(),
            banded_seconds: banded[i],
            dense_seconds,
            max_relative_difference,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
