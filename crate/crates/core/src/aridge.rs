//! Adaptive ridge: an iteratively reweighted difference penalty whose weighted
//! squared differences polarize toward 0 or 1, approximating an L0 penalty on
//! neighbour differences. Differences near 0 fuse cells into constant areas,
//! which are then refitted without penalty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lexis::ExhaustiveStats;
use crate::likelihood::{EstimateStatus, LogHazardGrid, PenaltyWeights};
use crate::solver::{newton_raphson_warm, FitResult, NewtonConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AridgeConfig {
    pub epsilon_v: f64,
    pub epsilon_w: f64,
    /// Bound on the largest change of any weighted squared difference between
    /// two outer iterations.
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    /// Neighbours whose weighted squared difference is below this are fused.
    pub edge_threshold: f64,
    pub newton: NewtonConfig,
}

impl Default for AridgeConfig {
    fn default() -> Self {
        Self {
            epsilon_v: 1e-5,
            epsilon_w: 1e-5,
            outer_tol: 1e-8,
            outer_max_iter: 1000,
            edge_threshold: 1e-2,
            newton: NewtonConfig::default(),
        }
    }
}

impl AridgeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_v > 0.0 && self.epsilon_w > 0.0) {
            return Err(Error::InvalidConfig("epsilons must be positive".into()));
        }
        if !(self.edge_threshold > 0.0 && self.edge_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!("edge_threshold must lie in (0, 1), got {}", self.edge_threshold)));
        }
        if !(self.outer_tol > 0.0) || self.outer_max_iter == 0 {
            return Err(Error::InvalidConfig("outer_tol and outer_max_iter must be positive".into()));
        }
        self.newton.validate()
    }
}

/// `v = 1/(Δ_cohort² + ε_v²)`, `w = 1/(Δ_age² + ε_w²)`.
pub fn update_weights(eta: &LogHazardGrid, config: &AridgeConfig) -> PenaltyWeights {
    let e = eta.values();
    let (rows, cols) = e.shape();
    let mut v = Grid::filled(rows.saturating_sub(1), cols, 0.0);
    for j in 0..rows.saturating_sub(1) {
        for k in 0..cols {
            let d = e[(j + 1, k)] - e[(j, k)];
            v[(j, k)] = 1.0 / (d * d + config.epsilon_v * config.epsilon_v);
        }
    }
    let mut w = Grid::filled(rows, cols.saturating_sub(1), 0.0);
    for j in 0..rows {
        for k in 0..cols.saturating_sub(1) {
            let d = e[(j, k + 1)] - e[(j, k)];
            w[(j, k)] = 1.0 / (d * d + config.epsilon_w * config.epsilon_w);
        }
    }
    PenaltyWeights::from_parts_unchecked(v, w)
}

/// Weighted squared differences along both axes, shaped like the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeValues {
    /// `v_jk (η_j+1,k − η_jk)²`, (J−1)×K.
    pub cohort: Grid<f64>,
    /// `w_jk (η_j,k+1 − η_jk)²`, J×(K−1).
    pub age: Grid<f64>,
}

impl EdgeValues {
    fn max_abs_change(&self, other: &EdgeValues) -> f64 {
        self.cohort
            .iter()
            .zip(other.cohort.iter())
            .chain(self.age.iter().zip(other.age.iter()))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.cohort.iter().chain(self.age.iter())
    }
}

pub fn weighted_sq_diffs(eta: &LogHazardGrid, weights: &PenaltyWeights) -> EdgeValues {
    let e = eta.values();
    let (v, w) = (weights.v(), weights.w());
    let mut cohort = v.clone();
    for ((j, k), x) in v.indexed_iter() {
        let d = e[(j + 1, k)] - e[(j, k)];
        cohort[(j, k)] = x * d * d;
    }
    let mut age = w.clone();
    for ((j, k), x) in w.indexed_iter() {
        let d = e[(j, k + 1)] - e[(j, k)];
        age[(j, k)] = x * d * d;
    }
    EdgeValues { cohort, age }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Labels the connected components of the graph joining 4-adjacent cells
/// whose edge value is below `threshold`.
///
/// Ids run from 1 in row-major order of each component's first cell.
pub fn label_components(edges: &EdgeValues, threshold: f64) -> Result<Grid<usize>> {
    let rows = edges.age.rows();
    let cols = edges.cohort.cols();
    if edges.cohort.shape() != (rows.saturating_sub(1), cols) || edges.age.shape() != (rows, cols.saturating_sub(1)) {
        return Err(Error::ShapeMismatch {
            expected: (rows.saturating_sub(1), cols),
            found: edges.cohort.shape(),
        });
    }
    let mut sets = DisjointSets::new(rows * cols);
    for ((j, k), &x) in edges.cohort.indexed_iter() {
        if x < threshold {
            sets.union(j * cols + k, (j + 1) * cols + k);
        }
    }
    for ((j, k), &x) in edges.age.indexed_iter() {
        if x < threshold {
            sets.union(j * cols + k, j * cols + k + 1);
        }
    }
    let mut id_of_root = vec![0usize; rows * cols];
    let mut next = 0;
    let mut labels = Vec::with_capacity(rows * cols);
    for i in 0..rows * cols {
        let root = sets.find(i);
        if id_of_root[root] == 0 {
            next += 1;
            id_of_root[root] = next;
        }
        labels.push(id_of_root[root]);
    }
    Grid::from_vec(rows, cols, labels)
}

/// Thresholds the weighted squared differences of `eta` and labels the
/// resulting constant areas.
pub fn extract_components(eta: &LogHazardGrid, weights: &PenaltyWeights, config: &AridgeConfig) -> Result<Grid<usize>> {
    if weights.grid_shape() != eta.shape() {
        return Err(Error::ShapeMismatch {
            expected: eta.shape(),
            found: weights.grid_shape(),
        });
    }
    label_components(&weighted_sq_diffs(eta, weights), config.edge_threshold)
}

/// Pooled statistics and unpenalized estimate for one constant area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaFit {
    pub id: usize,
    pub cells: usize,
    pub events: f64,
    pub exposure: f64,
    /// `events / exposure`; absent without exposure.
    pub hazard: Option<f64>,
    pub status: EstimateStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub labels: Grid<usize>,
    pub q: usize,
    /// Indexed by `id − 1`.
    pub areas: Vec<AreaFit>,
    pub kappa: Option<f64>,
}

impl Segmentation {
    /// Per-cell refitted hazard; NaN in areas without exposure.
    pub fn hazard_grid(&self) -> Grid<f64> {
        self.labels.map(|&id| self.areas[id - 1].hazard.unwrap_or(f64::NAN))
    }

    /// Unpenalized negative log-likelihood at the refitted hazards,
    /// `Σ_r O_r − O_r ln(O_r / R_r)`, with zero-event areas contributing 0.
    pub fn refit_neg_log_likelihood(&self) -> f64 {
        self.areas
            .iter()
            .filter(|a| a.events > 0.0 && a.exposure > 0.0)
            .map(|a| a.events - a.events * (a.events / a.exposure).ln())
            .sum()
    }
}

/// Pools events and exposure over each labelled area and estimates its
/// hazard by `O / R`.
pub fn refit_areas(labels: &Grid<usize>, stats: &ExhaustiveStats) -> Result<Segmentation> {
    labels.check_shape(stats.shape())?;
    let q = labels.iter().copied().max().unwrap_or(0);
    let mut seen = vec![false; q];
    for &id in labels.iter() {
        if id == 0 {
            return Err(Error::InvalidConfig("area ids start at 1".into()));
        }
        seen[id - 1] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidConfig(format!("area ids are not contiguous: {} is unused", missing + 1)));
    }
    let mut areas: Vec<AreaFit> = (1..=q)
        .map(|id| AreaFit {
            id,
            cells: 0,
            events: 0.0,
            exposure: 0.0,
            hazard: None,
            status: EstimateStatus::NoData,
        })
        .collect();
    for ((&id, &o), &r) in labels.iter().zip(stats.events().iter()).zip(stats.exposure().iter()) {
        let a = &mut areas[id - 1];
        a.cells += 1;
        a.events += o;
        a.exposure += r;
    }
    for a in &mut areas {
        a.status = EstimateStatus::classify(a.events, a.exposure);
        if a.status != EstimateStatus::NoData {
            a.hazard = Some(a.events / a.exposure);
        }
    }
    Ok(Segmentation {
        labels: labels.clone(),
        q,
        areas,
        kappa: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AridgeOutcome {
    pub segmentation: Segmentation,
    /// Last inner fit; its `eta` is the converged penalized estimate.
    pub fit: FitResult,
    /// Weights recomputed from the final penalized estimate.
    pub weights: PenaltyWeights,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
}

/// Alternates Newton fits at fixed weights with weight updates until the
/// weighted squared differences settle, then segments and refits.
pub fn adaptive_ridge(stats: &ExhaustiveStats, kappa: f64, config: &AridgeConfig) -> Result<AridgeOutcome> {
    config.validate()?;
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidKappa(kappa));
    }
    let (rows, cols) = stats.shape();
    let mut weights = PenaltyWeights::ones(rows, cols);
    let mut eta = LogHazardGrid::zeros(stats.grid());
    let mut previous = weighted_sq_diffs(&eta, &weights);
    let mut converged = false;
    let mut outer_iterations = 0;
    let mut inner_iterations = 0;
    let mut fit;
    loop {
        fit = newton_raphson_warm(stats, kappa, &weights, &config.newton, &eta)?;
        outer_iterations += 1;
        inner_iterations += fit.iterations;
        eta = fit.eta.clone();
        weights = update_weights(&eta, config);
        let current = weighted_sq_diffs(&eta, &weights);
        let change = current.max_abs_change(&previous);
        previous = current;
        if change < config.outer_tol {
            converged = true;
            break;
        }
        if outer_iterations >= config.outer_max_iter {
            break;
        }
    }
    let labels = label_components(&previous, config.edge_threshold)?;
    let mut segmentation = refit_areas(&labels, stats)?;
    segmentation.kappa = Some(kappa);
    Ok(AridgeOutcome {
        segmentation,
        fit,
        weights,
        outer_iterations,
        inner_iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::lexis::GridSpec;

    fn stats(rows: usize, cols: usize, o: Vec<f64>, r: Vec<f64>) -> ExhaustiveStats {
        let grid = GridSpec::uniform((0.0, rows as f64), rows, (0.0, cols as f64), cols).unwrap();
        ExhaustiveStats::new(grid, Grid::from_vec(rows, cols, o).unwrap(), Grid::from_vec(rows, cols, r).unwrap(), None).unwrap()
    }

    /// 6×6 grid, hazard 0.02 on the left three age columns and 0.2 on the
    /// right three, with expected counts filled in exactly.
    fn two_block() -> ExhaustiveStats {
        let mut o = Vec::new();
        for _ in 0..6 {
            for k in 0..6 {
                o.push(if k < 3 { 2.0 } else { 20.0 });
            }
        }
        stats(6, 6, o, vec![100.0; 36])
    }

    fn partition(labels: &Grid<usize>) -> BTreeSet<BTreeSet<(usize, usize)>> {
        let mut groups = std::collections::BTreeMap::<usize, BTreeSet<(usize, usize)>>::new();
        for (jk, &id) in labels.indexed_iter() {
            groups.entry(id).or_default().insert(jk);
        }
        groups.into_values().collect()
    }

    fn edges_from(cohort: Vec<Vec<f64>>, age: Vec<Vec<f64>>) -> EdgeValues {
        EdgeValues {
            cohort: Grid::from_rows(cohort).unwrap(),
            age: Grid::from_rows(age).unwrap(),
        }
    }

    // Toy 3×3 grid, cells named row-major A B C / D E F / G H I.
    // Zero differences: A–D, D–G, G–H, B–C, C–F, E–F; all others are 1.
    fn toy_edges() -> EdgeValues {
        edges_from(
            // A–D, B–E, C–F / D–G, E–H, F–I
            vec![vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]],
            // A–B, B–C / D–E, E–F / G–H, H–I
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
        )
    }

    #[test]
    fn weight_examples() {
        let cfg = AridgeConfig::default();
        let grid = GridSpec::uniform((0.0, 1.0), 1, (0.0, 3.0), 3).unwrap();
        let eta = LogHazardGrid::new(Grid::from_rows(vec![vec![0.5, 0.5, 1.5]]).unwrap(), grid).unwrap();
        let w = update_weights(&eta, &cfg);
        assert!((w.w()[(0, 0)] - 1e10).abs() < 1e-3);
        assert!((w.w()[(0, 1)] - 1.0 / (1.0 + 1e-10)).abs() < 1e-8);
        assert_eq!(w.v().shape(), (0, 3));
    }

    #[test]
    fn toy_components() {
        let labels = label_components(&toy_edges(), 1e-2).unwrap();
        assert_eq!(labels.to_rows(), vec![vec![1, 2, 2], vec![1, 2, 2], vec![1, 1, 3]]);
        let mut sizes: Vec<usize> = partition(&labels).iter().map(BTreeSet::len).collect();
        sizes.sort();
        assert_eq!(sizes, vec![1, 4, 4]);
    }

    #[test]
    fn toy_through_extraction() {
        // Distinct log-hazards with weights chosen so that v·Δ² hits the toy's values.
        let eta_rows = vec![vec![0.0, 1.0, 3.0], vec![2.0, 5.0, 4.0], vec![7.0, 6.0, 10.0]];
        let grid = GridSpec::uniform((0.0, 3.0), 3, (0.0, 3.0), 3).unwrap();
        let eta = LogHazardGrid::new(Grid::from_rows(eta_rows.clone()).unwrap(), grid).unwrap();
        let target = toy_edges();
        let e = eta.values();
        let mut v = target.cohort.clone();
        for ((j, k), t) in target.cohort.indexed_iter() {
            let d = e[(j + 1, k)] - e[(j, k)];
            v[(j, k)] = t.max(1e-12) / (d * d);
        }
        let mut w = target.age.clone();
        for ((j, k), t) in target.age.indexed_iter() {
            let d = e[(j, k + 1)] - e[(j, k)];
            w[(j, k)] = t.max(1e-12) / (d * d);
        }
        let weights = PenaltyWeights::new(v, w).unwrap();
        let labels = extract_components(&eta, &weights, &AridgeConfig::default()).unwrap();
        assert_eq!(partition(&labels), partition(&label_components(&target, 1e-2).unwrap()));
    }

    #[test]
    fn all_fused_or_all_split() {
        let zeros = edges_from(vec![vec![0.0; 4]; 2], vec![vec![0.0; 3]; 3]);
        assert!(label_components(&zeros, 0.5).unwrap().iter().all(|&id| id == 1));
        let ones = edges_from(vec![vec![1.0; 4]; 2], vec![vec![1.0; 3]; 3]);
        let labels = label_components(&ones, 0.5).unwrap();
        assert_eq!(labels.into_vec(), (1..=12).collect::<Vec<_>>());
    }

    #[test]
    fn refit_examples() {
        let s = stats(2, 2, vec![1.0, 2.0, 0.0, 2.0], vec![10.0, 10.0, 20.0, 10.0]);
        let seg = refit_areas(&Grid::filled(2, 2, 1), &s).unwrap();
        assert_eq!(seg.q, 1);
        assert_eq!(seg.areas[0].hazard, Some(0.1));

        let s = stats(2, 2, vec![2.0, 0.0, 0.0, 0.0], vec![4.0, 1.0, 1.0, 1.0]);
        let labels = Grid::from_rows(vec![vec![1, 2], vec![2, 2]]).unwrap();
        let seg = refit_areas(&labels, &s).unwrap();
        assert_eq!(seg.areas[0].hazard, Some(0.5));
        assert_eq!(seg.areas[1].hazard, Some(0.0));
        assert_eq!(seg.areas[1].status, EstimateStatus::ZeroHazard);

        let s = stats(1, 2, vec![2.0, 0.0], vec![4.0, 0.0]);
        let seg = refit_areas(&Grid::from_rows(vec![vec![1, 2]]).unwrap(), &s).unwrap();
        assert_eq!(seg.areas[1].status, EstimateStatus::NoData);
        assert_eq!(seg.areas[1].hazard, None);
        assert!(seg.hazard_grid()[(0, 1)].is_nan());

        assert!(refit_areas(&Grid::from_rows(vec![vec![1, 3]]).unwrap(), &s).is_err());
    }

    #[test]
    fn infinite_penalty_gives_one_area() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r: Vec<f64> = (0..20).map(|_| rng.random_range(5.0..50.0)).collect();
        let o: Vec<f64> = r.iter().map(|x| (x * rng.random_range(0.0..0.3f64)).round()).collect();
        let s = stats(4, 5, o, r);
        let out = adaptive_ridge(&s, 1e12, &AridgeConfig::default()).unwrap();
        assert_eq!(out.segmentation.q, 1);
        let a = &out.segmentation.areas[0];
        assert_eq!(a.hazard, Some(s.total_events() / s.total_exposure()));
    }

    #[test]
    fn two_blocks_are_recovered_and_polarized() {
        let s = two_block();
        let out = adaptive_ridge(&s, 1.0, &AridgeConfig::default()).unwrap();
        assert!(out.converged);
        let seg = &out.segmentation;
        assert_eq!(seg.q, 2);
        for ((_, k), &id) in seg.labels.indexed_iter() {
            assert_eq!(id, if k < 3 { 1 } else { 2 });
        }
        assert_eq!(seg.areas[0].hazard, Some(0.02));
        assert_eq!(seg.areas[1].hazard, Some(0.2));

        let edges = weighted_sq_diffs(&out.fit.eta, &out.weights);
        let thr = AridgeConfig::default().edge_threshold;
        let total = edges.iter().count();
        let polar = edges.iter().filter(|&&x| x < thr || x > 1.0 - thr).count();
        assert!(polar as f64 >= 0.99 * total as f64, "{polar}/{total}");
        assert!(edges.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn refit_removes_shrinkage() {
        let s = two_block();
        let out = adaptive_ridge(&s, 5.0, &AridgeConfig::default()).unwrap();
        let penalized = out.fit.eta.values()[(0, 0)].exp();
        let refit = out.segmentation.hazard_grid()[(0, 0)];
        let area = &out.segmentation.areas[out.segmentation.labels[(0, 0)] - 1];
        assert_eq!(refit, area.events / area.exposure);
        assert!((refit - penalized).abs() > 1e-6, "{refit} vs {penalized}");
    }

    #[test]
    fn rejects_non_positive_kappa() {
        assert!(matches!(adaptive_ridge(&two_block(), 0.0, &AridgeConfig::default()), Err(Error::InvalidKappa(_))));
        let cfg = AridgeConfig { edge_threshold: 1.0, ..AridgeConfig::default() };
        assert!(adaptive_ridge(&two_block(), 1.0, &cfg).is_err());
    }

    fn random_edges(rng: &mut impl Rng, rows: usize, cols: usize) -> EdgeValues {
        let mut pick = |n: usize, m: usize| {
            Grid::from_vec(n, m, (0..n * m).map(|_| if rng.random_bool(0.6) { 0.0 } else { 1.0 }).collect()).unwrap()
        };
        let cohort = pick(rows - 1, cols);
        let age = pick(rows, cols - 1);
        EdgeValues { cohort, age }
    }

    fn transpose<T: Clone>(g: &Grid<T>) -> Grid<T> {
        let (r, c) = g.shape();
        let mut data = Vec::with_capacity(r * c);
        for k in 0..c {
            for j in 0..r {
                data.push(g[(j, k)].clone());
            }
        }
        Grid::from_vec(c, r, data).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn labels_are_connected_components(seed in any::<u64>(), rows in 2usize..8, cols in 2usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let edges = random_edges(&mut rng, rows, cols);
            let labels = label_components(&edges, 0.5).unwrap();
            let q = labels.iter().copied().max().unwrap();
            prop_assert_eq!(labels.iter().copied().collect::<BTreeSet<_>>(), (1..=q).collect::<BTreeSet<_>>());
            // Fused neighbours share a label.
            for ((j, k), &x) in edges.cohort.indexed_iter() {
                if x < 0.5 { prop_assert_eq!(labels[(j, k)], labels[(j + 1, k)]); }
            }
            for ((j, k), &x) in edges.age.indexed_iter() {
                if x < 0.5 { prop_assert_eq!(labels[(j, k)], labels[(j, k + 1)]); }
            }
            // Each label is reachable from its first cell through fused edges.
            for id in 1..=q {
                let cells: Vec<(usize, usize)> = labels.indexed_iter().filter(|(_, &l)| l == id).map(|(jk, _)| jk).collect();
                let mut reached = BTreeSet::from([cells[0]]);
                let mut stack = vec![cells[0]];
                while let Some((j, k)) = stack.pop() {
                    let mut nbrs = Vec::new();
                    if j + 1 < rows && edges.cohort[(j, k)] < 0.5 { nbrs.push((j + 1, k)); }
                    if j > 0 && edges.cohort[(j - 1, k)] < 0.5 { nbrs.push((j - 1, k)); }
                    if k + 1 < cols && edges.age[(j, k)] < 0.5 { nbrs.push((j, k + 1)); }
                    if k > 0 && edges.age[(j, k - 1)] < 0.5 { nbrs.push((j, k - 1)); }
                    for nb in nbrs {
                        if reached.insert(nb) { stack.push(nb); }
                    }
                }
                prop_assert_eq!(reached.len(), cells.len());
            }
        }

        #[test]
        fn partition_does_not_depend_on_cell_enumeration(seed in any::<u64>(), rows in 2usize..8, cols in 2usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let edges = random_edges(&mut rng, rows, cols);
            let labels = label_components(&edges, 0.5).unwrap();
            let swapped = EdgeValues { cohort: transpose(&edges.age), age: transpose(&edges.cohort) };
            let relabeled = transpose(&label_components(&swapped, 0.5).unwrap());
            prop_assert_eq!(partition(&labels), partition(&relabeled));
        }

        #[test]
        fn refit_conserves_totals(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let edges = random_edges(&mut rng, 5, 6);
            let labels = label_components(&edges, 0.5).unwrap();
            let r: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..40.0f64).floor()).collect();
            let o: Vec<f64> = r.iter().map(|&x| if x > 0.0 { rng.random_range(0..5) as f64 } else { 0.0 }).collect();
            let s = stats(5, 6, o, r);
            let seg = refit_areas(&labels, &s).unwrap();
            prop_assert_eq!(seg.areas.iter().map(|a| a.events).sum::<f64>(), s.total_events());
            prop_assert_eq!(seg.areas.iter().map(|a| a.exposure).sum::<f64>(), s.total_exposure());
            prop_assert_eq!(seg.areas.iter().map(|a| a.cells).sum::<usize>(), 30);
            for a in &seg.areas {
                if a.exposure > 0.0 { prop_assert_eq!(a.hazard, Some(a.events / a.exposure)); }
            }
        }

        #[test]
        fn weighted_differences_stay_in_unit_interval(seed in any::<u64>(), eps in 1e-6..1e-2f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let grid = GridSpec::uniform((0.0, 1.0), 4, (0.0, 1.0), 5).unwrap();
            let vals = Grid::from_vec(4, 5, (0..20).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
            let eta = LogHazardGrid::new(vals, grid).unwrap();
            let cfg = AridgeConfig { epsilon_v: eps, epsilon_w: eps, ..AridgeConfig::default() };
            let edges = weighted_sq_diffs(&eta, &update_weights(&eta, &cfg));
            prop_assert!(edges.iter().all(|&x| (0.0..1.0).contains(&x)));
        }
    }
}
