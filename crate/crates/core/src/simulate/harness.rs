//! Replicated simulation: sample, tabulate, fit each method, and compare
//! against the cell-averaged true hazard.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::agecohort::{fit_age_cohort, Constraint};
use super::design::{Design, TrueHazard};
use super::sampler::{observed_fraction, replicate_rng, sample_dataset, Censoring, SimConfig};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lexis::{tabulate, GridSpec};
use crate::select::{default_kappa_grid, fit_path, Criterion, Penalty, PenaltyPath, SelectConfig, SelectInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Ridge with κ chosen by cross-validation.
    L2cv,
    Ebic,
    Aic,
    Bic,
    /// Adaptive ridge with κ chosen by cross-validation.
    L0cv,
    Agecohort,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::L2cv, Method::Ebic, Method::Aic, Method::Bic, Method::L0cv, Method::Agecohort];

    pub fn name(self) -> &'static str {
        match self {
            Method::L2cv => "l2cv",
            Method::Ebic => "ebic",
            Method::Aic => "aic",
            Method::Bic => "bic",
            Method::L0cv => "l0cv",
            Method::Agecohort => "agecohort",
        }
    }

    fn l0_criterion(self) -> Option<Criterion> {
        match self {
            Method::Ebic => Some(Criterion::Ebic),
            Method::Aic => Some(Criterion::Aic),
            Method::Bic => Some(Criterion::Bic),
            Method::L0cv => Some(Criterion::Cv),
            Method::L2cv | Method::Agecohort => None,
        }
    }

    /// Parses a comma-separated list, keeping first occurrences in order.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: Method = part.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidConfig("no methods given".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub sim: SimConfig,
    pub methods: Vec<Method>,
    pub kappas: Vec<f64>,
    pub select: SelectConfig,
    /// Adds per-method wall-clock times to the rows; reports then differ
    /// between runs.
    pub record_timings: bool,
}

impl HarnessConfig {
    pub fn new(sim: SimConfig, methods: Vec<Method>) -> Self {
        let seed = sim.seed;
        let mut select = SelectConfig::default();
        select.cv.seed = seed;
        Self {
            sim,
            methods,
            kappas: default_kappa_grid(),
            select,
            record_timings: false,
        }
    }
}

/// Mean hazard of `truth` over every cell of `grid`.
pub fn truth_grid(truth: &dyn TrueHazard, grid: &GridSpec) -> Grid<f64> {
    let (rows, cols) = grid.shape();
    let mut out = Grid::filled(rows, cols, 0.0);
    for j in 0..rows {
        for k in 0..cols {
            out[(j, k)] = truth.cell_mean(grid.cohort_interval(j), grid.age_interval(k));
        }
    }
    out
}

/// Mean squared difference over cells, on the hazard scale.
pub fn mse(estimate: &Grid<f64>, truth: &Grid<f64>) -> Result<f64> {
    estimate.check_shape(truth.shape())?;
    if estimate.is_empty() {
        return Err(Error::InvalidConfig("empty grid".into()));
    }
    if estimate.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidStats("estimate has non-finite cells".into()));
    }
    let s: f64 = estimate.iter().zip(truth.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(s / estimate.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub mse: Option<f64>,
    /// `mse / mse(l2cv)` in the same replicate.
    pub relative_mse: Option<f64>,
    pub kappa: Option<f64>,
    pub q: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub runtime_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub records: usize,
    pub observed_fraction: f64,
    pub excluded_records: usize,
    pub methods: Vec<MethodOutcome>,
}

impl ReplicateRow {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.methods.iter().find(|m| m.method == method)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub successes: usize,
    pub failures: usize,
    pub mean_mse: Option<f64>,
    pub mean_relative_mse: Option<f64>,
    pub q_quantiles: Option<Quantiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub replicates: usize,
    pub mean_observed_fraction: f64,
    pub methods: Vec<MethodSummary>,
}

impl Summary {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Settings echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub censoring: Option<Censoring>,
    pub cohort_range: (f64, f64),
    pub est_grid: GridSpec,
    pub methods: Vec<Method>,
    pub kappas: Vec<f64>,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub design: Design,
    pub config: ReportConfig,
    pub rows: Vec<ReplicateRow>,
    pub summary: Summary,
}

/// Linear interpolation between order statistics (the usual "type 7" rule).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn timed<T>(on: bool, f: impl FnOnce() -> T) -> (T, Option<f64>) {
    if on {
        let t = Instant::now();
        let v = f();
        (v, Some(t.elapsed().as_secs_f64()))
    } else {
        (f(), None)
    }
}

fn failed(method: Method, err: &Error) -> MethodOutcome {
    MethodOutcome {
        method,
        mse: None,
        relative_mse: None,
        kappa: None,
        q: None,
        runtime_seconds: None,
        error: Some(err.to_string()),
    }
}

/// Runs one replicate on its own random stream.
pub fn run_replicate(hazard: &dyn TrueHazard, config: &HarnessConfig, replicate: usize) -> ReplicateRow {
    let sim = &config.sim;
    let records = sample_dataset(hazard, sim.n, sim.censoring, sim.cohort_range, &mut replicate_rng(sim.seed, replicate));
    let mut row = ReplicateRow {
        replicate,
        records: records.len(),
        observed_fraction: observed_fraction(&records),
        excluded_records: 0,
        methods: Vec::with_capacity(config.methods.len()),
    };
    let stats = match tabulate(&records, &sim.est_grid) {
        Ok(s) => s,
        Err(e) => {
            row.methods = config.methods.iter().map(|&m| failed(m, &e)).collect();
            return row;
        }
    };
    row.excluded_records = stats.exclusions().excluded_records();
    let truth = truth_grid(hazard, &sim.est_grid);
    let input = SelectInput::records(&records, &stats);
    let timings = config.record_timings;

    let wants_l0: Vec<Method> = config.methods.iter().copied().filter(|m| m.l0_criterion().is_some()).collect();
    let l0_path: Option<(Result<PenaltyPath>, Option<f64>)> = (!wants_l0.is_empty()).then(|| {
        let with_cv = wants_l0.contains(&Method::L0cv);
        timed(timings, || fit_path(input, &config.kappas, Penalty::L0, with_cv, &config.select))
    });

    for &method in &config.methods {
        let outcome = match method {
            Method::Agecohort => {
                let (fit, secs) = timed(timings, || fit_age_cohort(&stats, Constraint::First));
                fit.and_then(|f| mse(&f.hazard(), &truth)).map(|m| MethodOutcome {
                    method,
                    mse: Some(m),
                    relative_mse: None,
                    kappa: None,
                    q: None,
                    runtime_seconds: secs,
                    error: None,
                })
            }
            Method::L2cv => {
                let (path, secs) = timed(timings, || fit_path(input, &config.kappas, Penalty::L2, true, &config.select));
                path.and_then(|p| {
                    let i = p.choose(Criterion::Cv)?;
                    Ok(MethodOutcome {
                        method,
                        mse: Some(mse(&p.fits[i].hazard_estimate(), &truth)?),
                        relative_mse: None,
                        kappa: Some(p.kappas[i]),
                        q: None,
                        runtime_seconds: secs,
                        error: None,
                    })
                })
            }
            _ => {
                let criterion = method.l0_criterion().expect("L0 method");
                let (path, secs) = l0_path.as_ref().expect("L0 path is fitted when an L0 method is requested");
                match path {
                    Err(e) => Err(Error::InvalidConfig(e.to_string())),
                    Ok(p) => p.choose(criterion).and_then(|i| {
                        Ok(MethodOutcome {
                            method,
                            mse: Some(mse(&p.fits[i].hazard_estimate(), &truth)?),
                            relative_mse: None,
                            kappa: Some(p.kappas[i]),
                            q: p.scores[i].q,
                            runtime_seconds: *secs,
                            error: None,
                        })
                    }),
                }
            }
        };
        row.methods.push(outcome.unwrap_or_else(|e| failed(method, &e)));
    }

    let baseline = row.outcome(Method::L2cv).and_then(|o| o.mse);
    if let Some(base) = baseline {
        for o in &mut row.methods {
            o.relative_mse = o.mse.map(|m| m / base);
        }
    }
    row
}

fn summarize(rows: &[ReplicateRow], methods: &[Method]) -> Summary {
    let fractions: Vec<f64> = rows.iter().map(|r| r.observed_fraction).filter(|f| f.is_finite()).collect();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let methods = methods
        .iter()
        .map(|&method| {
            let outcomes: Vec<&MethodOutcome> = rows.iter().filter_map(|r| r.outcome(method)).collect();
            let mses: Vec<f64> = outcomes.iter().filter_map(|o| o.mse).collect();
            let rel: Vec<f64> = outcomes.iter().filter_map(|o| o.relative_mse).collect();
            let mut qs: Vec<f64> = outcomes.iter().filter_map(|o| o.q.map(|q| q as f64)).collect();
            qs.sort_by(f64::total_cmp);
            MethodSummary {
                method,
                successes: mses.len(),
                failures: outcomes.len() - mses.len(),
                mean_mse: mean(&mses),
                mean_relative_mse: mean(&rel),
                q_quantiles: (!qs.is_empty()).then(|| Quantiles {
                    p10: quantile(&qs, 0.1),
                    p50: quantile(&qs, 0.5),
                    p90: quantile(&qs, 0.9),
                }),
            }
        })
        .collect();
    Summary {
        replicates: rows.len(),
        mean_observed_fraction: mean(&fractions).unwrap_or(f64::NAN),
        methods,
    }
}

/// Runs every replicate and summarizes per method. Failed fits are recorded
/// in their rows; only configuration errors abort the run.
pub fn run_replicates(design: &Design, config: &HarnessConfig) -> Result<Report> {
    config.sim.validate()?;
    if config.methods.is_empty() {
        return Err(Error::InvalidConfig("no methods given".into()));
    }
    if config.kappas.is_empty() {
        return Err(Error::EmptyKappaGrid);
    }
    config.select.aridge.validate()?;
    let hazard = design.build()?;
    let rows: Vec<ReplicateRow> = (0..config.sim.replicates)
        .into_par_iter()
        .map(|r| run_replicate(&hazard, config, r))
        .collect();
    let summary = summarize(&rows, &config.methods);
    Ok(Report {
        schema: 1,
        design: design.clone(),
        config: ReportConfig {
            n: config.sim.n,
            replicates: config.sim.replicates,
            seed: config.sim.seed,
            censoring: config.sim.censoring,
            cohort_range: config.sim.cohort_range,
            est_grid: config.sim.est_grid.clone(),
            methods: config.methods.clone(),
            kappas: config.kappas.clone(),
            folds: config.select.cv.folds,
        },
        rows,
        summary,
    })
}
