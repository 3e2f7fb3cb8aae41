//! Model scoring (AIC, BIC, EBIC) and penalty selection along a κ path,
//! including K-fold cross-validation over individuals.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::aridge::{adaptive_ridge, AridgeConfig, AridgeOutcome, Segmentation};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lexis::{tabulate, ExhaustiveStats, GridSpec, IndividualRecord};
use crate::likelihood::{cell_nll, EstimateStatus};
use crate::solver::{ridge_fit, FitResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    /// Adaptive ridge with segmentation and refit.
    L0,
    /// Ridge with unit weights.
    L2,
}

impl Penalty {
    pub fn name(self) -> &'static str {
        match self {
            Penalty::L0 => "l0",
            Penalty::L2 => "l2",
        }
    }
}

impl FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l0" => Ok(Penalty::L0),
            "l2" => Ok(Penalty::L2),
            _ => Err(Error::InvalidConfig(format!("unknown penalty {s:?}; expected l0 or l2"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
    Ebic,
    Cv,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
            Criterion::Ebic => "ebic",
            Criterion::Cv => "cv",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            "ebic" => Ok(Criterion::Ebic),
            "cv" => Ok(Criterion::Cv),
            _ => Err(Error::InvalidConfig(format!("unknown criterion {s:?}; expected aic, bic, ebic or cv"))),
        }
    }
}

/// `ln C(n, k)` through log-gamma.
pub fn ln_binomial(n: usize, k: usize) -> Result<f64> {
    if k > n {
        return Err(Error::InvalidConfig(format!("cannot choose {k} out of {n}")));
    }
    if k == 0 || k == n {
        return Ok(0.0);
    }
    let (n, k) = (n as f64, k as f64);
    Ok(ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0))
}

/// `2ℓ + 2q`.
pub fn aic_score(nll: f64, q: usize) -> f64 {
    2.0 * nll + 2.0 * q as f64
}

/// `2ℓ + q ln n`.
pub fn bic_score(nll: f64, q: usize, n: f64) -> f64 {
    2.0 * nll + q as f64 * n.ln()
}

/// `2ℓ + q ln n + 2 ln C(cells, q)`.
pub fn ebic_score(nll: f64, q: usize, n: f64, cells: usize) -> Result<f64> {
    Ok(bic_score(nll, q, n) + 2.0 * ln_binomial(cells, q)?)
}

pub fn aic(seg: &Segmentation, _stats: &ExhaustiveStats) -> f64 {
    aic_score(seg.refit_neg_log_likelihood(), seg.q)
}

/// Uses the number of individuals as sample size, or the total event count
/// for register data.
pub fn bic(seg: &Segmentation, stats: &ExhaustiveStats) -> f64 {
    bic_score(seg.refit_neg_log_likelihood(), seg.q, stats.sample_size())
}

pub fn ebic(seg: &Segmentation, stats: &ExhaustiveStats) -> Result<f64> {
    ebic_score(seg.refit_neg_log_likelihood(), seg.q, stats.sample_size(), stats.grid().n_cells())
}

/// `n` values log-spaced on `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || n == 0 {
        return Err(Error::InvalidConfig(format!("invalid log grid {lo}:{hi}:{n}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect())
}

/// 30 log-spaced values on `[1e-3, 1e4]`.
pub fn default_kappa_grid() -> Vec<f64> {
    log_spaced(1e-3, 1e4, 30).expect("valid default grid")
}

/// Parses `lo:hi:Nlog` or a comma-separated list into a strictly increasing grid.
pub fn parse_kappa_grid(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    let bad = |m: &str| Error::InvalidConfig(format!("invalid kappa grid {s:?}: {m}"));
    let mut values = if let Some(spec) = s.strip_suffix("log") {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected lo:hi:Nlog"));
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad("lo is not a number"))?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad("hi is not a number"))?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad("N is not a count"))?;
        log_spaced(lo, hi, n)?
    } else {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad(&format!("{p:?} is not a number"))))
            .collect::<Result<Vec<_>>>()?
    };
    if values.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
        return Err(bad("values must be finite and non-negative"));
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    if values.is_empty() {
        return Err(Error::EmptyKappaGrid);
    }
    Ok(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { folds: 10, seed: 0 }
    }
}

/// Fold id per record: a seeded permutation cut into `folds` near-equal
/// consecutive chunks.
pub fn assign_folds(n: usize, cv: &CvConfig) -> Result<Vec<usize>> {
    if cv.folds < 2 || cv.folds > n {
        return Err(Error::InvalidConfig(format!("folds must lie in [2, {n}], got {}", cv.folds)));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha20Rng::seed_from_u64(cv.seed));
    let mut fold = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold[i] = pos * cv.folds / n;
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelFit {
    L0(AridgeOutcome),
    L2(FitResult),
}

impl ModelFit {
    /// Penalized log-hazard.
    pub fn penalized_eta(&self) -> &Grid<f64> {
        match self {
            ModelFit::L0(o) => o.fit.eta.values(),
            ModelFit::L2(f) => f.eta.values(),
        }
    }

    pub fn segmentation(&self) -> Option<&Segmentation> {
        match self {
            ModelFit::L0(o) => Some(&o.segmentation),
            ModelFit::L2(_) => None,
        }
    }

    /// Log-hazard used for prediction: the per-area refit where it is a
    /// positive estimate, the penalized value elsewhere.
    pub fn predictive_eta(&self) -> Grid<f64> {
        match self {
            ModelFit::L2(f) => f.eta.values().clone(),
            ModelFit::L0(o) => {
                let seg = &o.segmentation;
                let mut eta = o.fit.eta.values().clone();
                for (&id, e) in seg.labels.iter().zip(eta.as_mut_slice()) {
                    let area = &seg.areas[id - 1];
                    if area.status == EstimateStatus::Estimated {
                        *e = area.hazard.expect("estimated area has a hazard").ln();
                    }
                }
                eta
            }
        }
    }

    pub fn predictive_hazard(&self) -> Grid<f64> {
        self.predictive_eta().map(|e| e.exp())
    }

    /// Hazard estimate: the per-area refit (zero included) for L0, with the
    /// penalized value in areas without exposure; `exp(η)` for L2.
    pub fn hazard_estimate(&self) -> Grid<f64> {
        match self {
            ModelFit::L2(f) => f.eta.hazard(),
            ModelFit::L0(o) => {
                let seg = &o.segmentation;
                let mut h = o.fit.eta.hazard();
                for (&id, x) in seg.labels.iter().zip(h.as_mut_slice()) {
                    if let Some(v) = seg.areas[id - 1].hazard {
                        *x = v;
                    }
                }
                h
            }
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            ModelFit::L0(o) => o.converged,
            ModelFit::L2(f) => f.converged,
        }
    }
}

pub fn fit_model(stats: &ExhaustiveStats, kappa: f64, penalty: Penalty, config: &AridgeConfig) -> Result<ModelFit> {
    match penalty {
        Penalty::L0 => adaptive_ridge(stats, kappa, config).map(ModelFit::L0),
        Penalty::L2 => ridge_fit(stats, kappa, &config.newton).map(ModelFit::L2),
    }
}

fn held_out_nll(eta: &Grid<f64>, stats: &ExhaustiveStats) -> f64 {
    eta.iter()
        .zip(stats.events().iter())
        .zip(stats.exposure().iter())
        .map(|((&e, &o), &r)| cell_nll(e, o, r))
        .sum()
}

/// Sum over folds of the held-out negative log-likelihood at the fit on the
/// remaining folds, one value per κ.
pub fn cross_validate(
    records: &[IndividualRecord],
    grid: &GridSpec,
    kappas: &[f64],
    penalty: Penalty,
    cv: &CvConfig,
    config: &AridgeConfig,
) -> Result<Vec<f64>> {
    if kappas.is_empty() {
        return Err(Error::EmptyKappaGrid);
    }
    let folds = assign_folds(records.len(), cv)?;
    let splits: Vec<(ExhaustiveStats, ExhaustiveStats)> = (0..cv.folds)
        .into_par_iter()
        .map(|l| {
            let pick = |held_out: bool| -> Vec<IndividualRecord> {
                records.iter().zip(&folds).filter(|(_, &f)| (f == l) == held_out).map(|(r, _)| *r).collect()
            };
            let (train, test) = (pick(false), pick(true));
            Ok((tabulate(&train, grid)?, tabulate(&test, grid)?))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..kappas.len()).flat_map(|i| (0..cv.folds).map(move |l| (i, l))).collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, l)| {
            let (train, test) = &splits[l];
            let fit = fit_model(train, kappas[i], penalty, config)?;
            Ok(held_out_nll(&fit.predictive_eta(), test))
        })
        .collect::<Result<_>>()?;
    Ok(scores.chunks(cv.folds).map(|c| c.iter().sum()).collect())
}

/// Data to select on: tabulated statistics, with the records they came from
/// when available.
#[derive(Debug, Clone, Copy)]
pub struct SelectInput<'a> {
    pub stats: &'a ExhaustiveStats,
    pub records: Option<&'a [IndividualRecord]>,
}

impl<'a> SelectInput<'a> {
    pub fn register(stats: &'a ExhaustiveStats) -> Self {
        Self { stats, records: None }
    }

    /// `stats` must be the tabulation of `records`.
    pub fn records(records: &'a [IndividualRecord], stats: &'a ExhaustiveStats) -> Self {
        Self {
            stats,
            records: Some(records),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    pub aridge: AridgeConfig,
    pub cv: CvConfig,
}

/// Scores of one κ; information criteria exist only for segmentations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathScores {
    pub kappa: f64,
    pub q: Option<usize>,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub ebic: Option<f64>,
    pub cv: Option<f64>,
}

impl PathScores {
    pub fn get(&self, criterion: Criterion) -> Option<f64> {
        match criterion {
            Criterion::Aic => self.aic,
            Criterion::Bic => self.bic,
            Criterion::Ebic => self.ebic,
            Criterion::Cv => self.cv,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyPath {
    pub penalty: Penalty,
    pub kappas: Vec<f64>,
    pub fits: Vec<ModelFit>,
    pub scores: Vec<PathScores>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub criterion: Criterion,
    pub index: usize,
    pub kappa: f64,
    pub path: PenaltyPath,
}

impl Selection {
    pub fn fit(&self) -> &ModelFit {
        &self.path.fits[self.index]
    }

    pub fn scores(&self) -> &PathScores {
        &self.path.scores[self.index]
    }
}

/// Index of the smallest score; ties go to the later (larger κ) entry and
/// NaN never wins.
pub fn argmin_prefer_last(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        if best.is_none_or(|b| s <= scores[b]) {
            best = Some(i);
        }
    }
    best
}

fn check_kappas(kappas: &[f64], penalty: Penalty) -> Result<Vec<f64>> {
    if kappas.is_empty() {
        return Err(Error::EmptyKappaGrid);
    }
    let mut kappas = kappas.to_vec();
    kappas.sort_by(f64::total_cmp);
    kappas.dedup();
    if let Some(&bad) = kappas.iter().find(|k| !(k.is_finite() && (**k > 0.0 || (penalty == Penalty::L2 && **k == 0.0)))) {
        return Err(Error::InvalidKappa(bad));
    }
    Ok(kappas)
}

/// Fits every κ and scores each fit; CV scores are computed only when
/// `with_cv` is set, which requires records.
pub fn fit_path(input: SelectInput<'_>, kappas: &[f64], penalty: Penalty, with_cv: bool, config: &SelectConfig) -> Result<PenaltyPath> {
    let kappas = check_kappas(kappas, penalty)?;
    let stats = input.stats;
    let cv = match (with_cv, input.records) {
        (false, _) => None,
        (true, None) => return Err(Error::CvRequiresRecords),
        (true, Some(recs)) => Some(cross_validate(recs, stats.grid(), &kappas, penalty, &config.cv, &config.aridge)?),
    };
    let fits: Vec<ModelFit> = kappas
        .par_iter()
        .map(|&k| fit_model(stats, k, penalty, &config.aridge))
        .collect::<Result<_>>()?;
    let n = stats.sample_size();
    let cells = stats.grid().n_cells();
    let mut scores = Vec::with_capacity(kappas.len());
    for (i, (fit, &kappa)) in fits.iter().zip(&kappas).enumerate() {
        let mut s = PathScores {
            kappa,
            q: None,
            aic: None,
            bic: None,
            ebic: None,
            cv: cv.as_ref().map(|c| c[i]),
        };
        if let Some(seg) = fit.segmentation() {
            let nll = seg.refit_neg_log_likelihood();
            s.q = Some(seg.q);
            s.aic = Some(aic_score(nll, seg.q));
            s.bic = Some(bic_score(nll, seg.q, n));
            s.ebic = Some(ebic_score(nll, seg.q, n, cells)?);
        }
        scores.push(s);
    }
    Ok(PenaltyPath {
        penalty,
        kappas,
        fits,
        scores,
    })
}

impl PenaltyPath {
    /// Index minimizing `criterion`, ties toward larger κ. A single-κ path
    /// selects its only entry.
    pub fn choose(&self, criterion: Criterion) -> Result<usize> {
        if self.kappas.len() == 1 {
            return Ok(0);
        }
        let values: Vec<f64> = self.scores.iter().map(|s| s.get(criterion).unwrap_or(f64::NAN)).collect();
        if values.iter().all(|v| v.is_nan()) && criterion != Criterion::Cv && self.penalty == Penalty::L2 {
            return Err(Error::CriterionUnavailable {
                criterion: criterion.name(),
                penalty: self.penalty.name(),
            });
        }
        argmin_prefer_last(&values).ok_or_else(|| Error::InvalidConfig(format!("no finite {criterion} score on the path")))
    }
}

/// Fits every κ, scores each fit, and picks the minimizer of `criterion`.
pub fn select(
    input: SelectInput<'_>,
    kappas: &[f64],
    penalty: Penalty,
    criterion: Criterion,
    config: &SelectConfig,
) -> Result<Selection> {
    let multi = check_kappas(kappas, penalty)?.len() > 1;
    if penalty == Penalty::L2 && criterion != Criterion::Cv && multi {
        return Err(Error::CriterionUnavailable {
            criterion: criterion.name(),
            penalty: penalty.name(),
        });
    }
    if criterion == Criterion::Cv && input.records.is_none() {
        return Err(Error::CvRequiresRecords);
    }
    let path = fit_path(input, kappas, penalty, criterion == Criterion::Cv && multi, config)?;
    let index = path.choose(criterion)?;
    Ok(Selection {
        criterion,
        index,
        kappa: path.kappas[index],
        path,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::aridge::refit_areas;

    fn stats(rows: usize, cols: usize, o: Vec<f64>, r: Vec<f64>, n: Option<usize>) -> ExhaustiveStats {
        let grid = GridSpec::uniform((0.0, rows as f64), rows, (0.0, cols as f64), cols).unwrap();
        ExhaustiveStats::new(grid, Grid::from_vec(rows, cols, o).unwrap(), Grid::from_vec(rows, cols, r).unwrap(), n).unwrap()
    }

    #[test]
    fn criterion_arithmetic() {
        assert_relative_eq!(bic_score(0.0, 1, std::f64::consts::E), 1.0);
        assert_eq!(aic_score(10.0, 3), 26.0);
        assert_relative_eq!(ln_binomial(400, 1).unwrap() * 2.0, 2.0 * 400f64.ln(), epsilon = 1e-9);
        assert_relative_eq!(2.0 * ln_binomial(400, 1).unwrap(), 11.983, epsilon = 1e-3);
        assert_eq!(ln_binomial(400, 400).unwrap(), 0.0);
        assert!(ln_binomial(3, 4).is_err());
        assert_relative_eq!(ln_binomial(10, 3).unwrap(), 120f64.ln(), epsilon = 1e-12);
        assert_eq!(ebic_score(3.0, 4, 10.0, 4).unwrap(), bic_score(3.0, 4, 10.0));
    }

    #[test]
    fn bic_hand_example() {
        let s = stats(1, 2, vec![2.0, 2.0], vec![4.0, 4.0], Some(4));
        let seg = refit_areas(&Grid::filled(1, 2, 1), &s).unwrap();
        // Each cell contributes 0.5·4 − 2 ln 0.5 = 2 + 2 ln 2.
        assert_relative_eq!(bic(&seg, &s), 2.0 * (4.0 + 4.0 * 2f64.ln()) + 4f64.ln(), epsilon = 1e-12);
        let eta = crate::likelihood::LogHazardGrid::new(Grid::filled(1, 2, 0.5f64.ln()), s.grid().clone()).unwrap();
        let nll = crate::likelihood::neg_log_likelihood(&eta, &s).unwrap();
        assert_relative_eq!(bic(&seg, &s), 2.0 * nll + 4f64.ln(), epsilon = 1e-12);
        let split = refit_areas(&Grid::from_rows(vec![vec![1, 2]]).unwrap(), &s).unwrap();
        // Same likelihood, more areas.
        assert_relative_eq!(split.refit_neg_log_likelihood(), seg.refit_neg_log_likelihood(), epsilon = 1e-12);
        assert!(bic(&seg, &s) < bic(&split, &s));
        assert!(aic(&seg, &s) < aic(&split, &s));
    }

    #[test]
    fn register_sample_size_falls_back_to_events() {
        let s = stats(1, 2, vec![3.0, 4.0], vec![10.0, 10.0], None);
        let seg = refit_areas(&Grid::filled(1, 2, 1), &s).unwrap();
        assert_relative_eq!(bic(&seg, &s), 2.0 * seg.refit_neg_log_likelihood() + 7f64.ln());
    }

    #[test]
    fn criteria_share_likelihood_term() {
        let s = stats(2, 3, vec![1.0, 4.0, 2.0, 0.0, 3.0, 5.0], vec![10.0, 10.0, 12.0, 8.0, 9.0, 11.0], Some(40));
        let seg = refit_areas(&Grid::from_rows(vec![vec![1, 1, 2], vec![3, 2, 2]]).unwrap(), &s).unwrap();
        let two_l = 2.0 * seg.refit_neg_log_likelihood();
        assert_relative_eq!(aic(&seg, &s) - two_l, 6.0, epsilon = 1e-12);
        assert_relative_eq!(bic(&seg, &s) - two_l, 3.0 * 40f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(ebic(&seg, &s).unwrap() - two_l, 3.0 * 40f64.ln() + 2.0 * 20f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn ebic_excess_peaks_in_the_middle() {
        let cells = 400;
        let excess: Vec<f64> = (1..=cells).map(|q| ln_binomial(cells, q).unwrap()).collect();
        let peak = argmin_prefer_last(&excess.iter().map(|x| -x).collect::<Vec<_>>()).unwrap() + 1;
        assert!(peak.abs_diff(cells / 2) <= 1);
        assert_eq!(excess[cells - 1], 0.0);
        assert!(excess.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn kappa_grid_parsing() {
        let g = parse_kappa_grid("1e-3:1e4:30log").unwrap();
        assert_eq!(g.len(), 30);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[29], 1e4);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g, default_kappa_grid());
        assert_eq!(parse_kappa_grid("10, 0.1,1").unwrap(), vec![0.1, 1.0, 10.0]);
        assert!(parse_kappa_grid("1:2").is_err());
        assert!(parse_kappa_grid("a,b").is_err());
        assert!(parse_kappa_grid("-1").is_err());
        assert!(matches!(parse_kappa_grid(""), Err(Error::EmptyKappaGrid)));
    }

    #[test]
    fn fold_assignment_is_balanced_and_seeded() {
        let cv = CvConfig { folds: 10, seed: 7 };
        let f = assign_folds(103, &cv).unwrap();
        let mut counts = [0usize; 10];
        for &x in &f {
            counts[x] += 1;
        }
        assert!(counts.iter().all(|&c| c == 10 || c == 11));
        assert_eq!(f, assign_folds(103, &cv).unwrap());
        assert_ne!(f, assign_folds(103, &CvConfig { folds: 10, seed: 8 }).unwrap());
        assert!(assign_folds(5, &cv).is_err());
        assert!(assign_folds(5, &CvConfig { folds: 1, seed: 0 }).is_err());
    }

    fn single_cell_records() -> (Vec<IndividualRecord>, GridSpec) {
        let recs = [(3.0, 1.0), (5.0, 0.0), (2.0, 1.0), (7.0, 1.0), (4.0, 0.0), (6.0, 1.0)]
            .iter()
            .enumerate()
            .map(|(i, &(t, d))| IndividualRecord::new(1950.0 + i as f64, t, d == 1.0).unwrap())
            .collect();
        (recs, GridSpec::uniform((1900.0, 2000.0), 1, (0.0, 10.0), 1).unwrap())
    }

    #[test]
    fn leave_one_out_matches_hand_enumeration() {
        let (recs, grid) = single_cell_records();
        let cv = CvConfig { folds: 6, seed: 1 };
        let got = cross_validate(&recs, &grid, &[0.0], Penalty::L2, &cv, &AridgeConfig::default()).unwrap();
        let (tt, dd): (f64, f64) = recs.iter().fold((0.0, 0.0), |(t, d), r| (t + r.time, d + r.event as u8 as f64));
        let expected: f64 = recs
            .iter()
            .map(|r| {
                let d = r.event as u8 as f64;
                let eta = ((dd - d) / (tt - r.time)).ln();
                eta.exp() * r.time - d * eta
            })
            .sum();
        assert_relative_eq!(got[0], expected, epsilon = 1e-8);
    }

    #[test]
    fn cv_requires_records() {
        let s = stats(1, 2, vec![3.0, 4.0], vec![10.0, 10.0], None);
        let err = select(SelectInput::register(&s), &[1.0, 2.0], Penalty::L0, Criterion::Cv, &SelectConfig::default()).unwrap_err();
        assert_eq!(err.to_string(), "CV requires individual-level records; use AIC/BIC/EBIC");
    }

    #[test]
    fn single_kappa_is_selected() {
        let s = stats(2, 2, vec![1.0, 2.0, 3.0, 4.0], vec![10.0; 4], Some(30));
        let sel = select(SelectInput::register(&s), &[3.0], Penalty::L0, Criterion::Ebic, &SelectConfig::default()).unwrap();
        assert_eq!(sel.kappa, 3.0);
        assert!(matches!(select(SelectInput::register(&s), &[], Penalty::L0, Criterion::Ebic, &SelectConfig::default()), Err(Error::EmptyKappaGrid)));
        assert!(matches!(
            select(SelectInput::register(&s), &[1.0, 2.0], Penalty::L2, Criterion::Bic, &SelectConfig::default()),
            Err(Error::CriterionUnavailable { .. })
        ));
    }

    #[test]
    fn two_block_path_selects_two_areas() {
        let mut o = Vec::new();
        for _ in 0..6 {
            for k in 0..6 {
                o.push(if k < 3 { 2.0 } else { 20.0 });
            }
        }
        let s = stats(6, 6, o, vec![100.0; 36], Some(4000));
        let sel = select(SelectInput::register(&s), &default_kappa_grid(), Penalty::L0, Criterion::Ebic, &SelectConfig::default()).unwrap();
        assert_eq!(sel.scores().q, Some(2));
        let qs: Vec<usize> = sel.path.scores.iter().map(|p| p.q.unwrap()).collect();
        assert_eq!(*qs.last().unwrap(), 1);
    }

    #[test]
    fn ties_prefer_larger_kappa() {
        assert_eq!(argmin_prefer_last(&[3.0, 1.0, 2.0, 1.0, 5.0]), Some(3));
        assert_eq!(argmin_prefer_last(&[f64::NAN, 2.0]), Some(1));
        assert_eq!(argmin_prefer_last(&[f64::NAN]), None);
    }

    proptest! {
        #[test]
        fn argmin_ignores_constant_shift(scores in proptest::collection::vec(-50i32..50, 1..20), shift in -1000i32..1000) {
            // Integer-valued scores keep the shift exact, ties included.
            let base: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
            let shifted: Vec<f64> = scores.iter().map(|&s| (s + shift) as f64).collect();
            prop_assert_eq!(argmin_prefer_last(&base), argmin_prefer_last(&shifted));
        }

        #[test]
        fn cv_invariant_to_record_order(seed in any::<u64>()) {
            let (recs, grid) = single_cell_records();
            let cv = CvConfig { folds: 3, seed: 5 };
            let folds = assign_folds(recs.len(), &cv).unwrap();
            let base = cross_validate(&recs, &grid, &[0.5], Penalty::L2, &cv, &AridgeConfig::default()).unwrap();
            // Permute records while carrying their fold ids: group by fold then shuffle within.
            let mut paired: Vec<(usize, IndividualRecord)> = folds.into_iter().zip(recs).collect();
            paired.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
            let got: f64 = (0..3).map(|l| {
                let train: Vec<_> = paired.iter().filter(|p| p.0 != l).map(|p| p.1).collect();
                let test: Vec<_> = paired.iter().filter(|p| p.0 == l).map(|p| p.1).collect();
                let fit = ridge_fit(&tabulate(&train, &grid).unwrap(), 0.5, &Default::default()).unwrap();
                held_out_nll(fit.eta.values(), &tabulate(&test, &grid).unwrap())
            }).sum();
            prop_assert!((got - base[0]).abs() <= 1e-9 * base[0].abs().max(1.0));
        }
    }
}
