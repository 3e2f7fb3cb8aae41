use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use lexisseg::aridge::AreaFit;
use lexisseg::lexis::{load_records, load_register, shear_to_age_period, AgePeriodCell, Exclusions};
use lexisseg::select::{default_kappa_grid, parse_kappa_grid, select, CvConfig, Criterion, Penalty, PathScores, SelectConfig, SelectInput};
use lexisseg::{GridSpec, IndividualRecord};

use crate::output::{digest_file, write_json, Manifest, PhaseTimer, SCHEMA};

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Individual records, CSV with header `cohort,time,event`.
    #[arg(long, required_unless_present = "register", conflicts_with = "register")]
    pub input: Option<PathBuf>,
    /// Register counts, CSV with header `cohort_index,age_index,events,person_years`.
    #[arg(long)]
    pub register: Option<PathBuf>,
    /// Grid cuts, JSON `{"cohort_cuts":[...],"age_cuts":[...]}`.
    #[arg(long)]
    pub grid: PathBuf,
    /// l0 (adaptive ridge) or l2 (ridge).
    #[arg(long, default_value = "l0")]
    pub penalty: String,
    /// `lo:hi:Nlog` or a comma-separated list.
    #[arg(long, conflicts_with = "kappa")]
    pub kappa_grid: Option<String>,
    /// A single penalty constant.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// aic, bic, ebic or cv. Defaults to ebic for l0; for l2, cv with
    /// records and aic otherwise (only a single κ can be fitted then).
    #[arg(long)]
    pub criterion: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Also write the fitted hazard as age-period parallelograms.
    #[arg(long, value_parser = ["age-period"])]
    pub emit_plane: Option<String>,
    /// Add wall-clock times to the manifest.
    #[arg(long)]
    #[serde(skip)]
    pub record_timings: bool,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    schema: u32,
    manifest: Manifest,
    grid: &'a GridSpec,
    penalty: Penalty,
    criterion: Criterion,
    kappa_selected: f64,
    converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<usize>,
    /// Penalized log-hazard.
    eta: Vec<Vec<f64>>,
    /// Refitted per-area hazard for l0, exp(eta) for l2.
    hazard: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    areas: Option<&'a [AreaFit]>,
    path: &'a [PathScores],
    excluded_records: usize,
    exclusions: Exclusions,
    n_individuals: Option<usize>,
    total_events: f64,
    total_exposure: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    age_period: Option<Vec<AgePeriodCell>>,
}

pub fn run(args: FitArgs) -> Result<()> {
    let penalty: Penalty = args.penalty.parse()?;
    let criterion: Criterion = match &args.criterion {
        Some(c) => c.parse()?,
        None if penalty == Penalty::L0 => Criterion::Ebic,
        None if args.input.is_some() => Criterion::Cv,
        None => Criterion::Aic,
    };
    let kappas = match (args.kappa, &args.kappa_grid) {
        (Some(k), _) => vec![k],
        (None, Some(s)) => parse_kappa_grid(s)?,
        (None, None) => default_kappa_grid(),
    };
    let mut timer = PhaseTimer::new(args.record_timings);
    let mut manifest = Manifest::new("fit", Some(args.seed), &args)?;
    manifest.inputs.push(digest_file(&args.grid)?);

    let grid = timer.time("load", || GridSpec::from_json_file(&args.grid))?;
    let records: Option<Vec<IndividualRecord>>;
    let stats = if let Some(path) = &args.input {
        manifest.inputs.push(digest_file(path)?);
        let recs = timer.time("load", || load_records(path))?;
        let stats = timer.time("tabulate", || lexisseg::lexis::tabulate(&recs, &grid))?;
        records = Some(recs);
        stats
    } else {
        let path = args.register.as_ref().expect("clap requires input or register");
        manifest.inputs.push(digest_file(path)?);
        records = None;
        timer.time("load", || load_register(path, &grid))?
    };
    let input = match &records {
        Some(r) => SelectInput::records(r, &stats),
        None => SelectInput::register(&stats),
    };
    let config = SelectConfig {
        cv: CvConfig { folds: args.folds, seed: args.seed },
        ..SelectConfig::default()
    };
    let selection = timer.time("select", || select(input, &kappas, penalty, criterion, &config))?;
    let fit = selection.fit();
    let hazard = fit.hazard_estimate();
    let age_period = match args.emit_plane.as_deref() {
        Some(_) => Some(shear_to_age_period(&hazard, &grid)?),
        None => None,
    };
    let seg = fit.segmentation();
    manifest.wall_seconds = timer.into_map();
    let out = FitOutput {
        schema: SCHEMA,
        manifest,
        grid: &grid,
        penalty,
        criterion,
        kappa_selected: selection.kappa,
        converged: fit.converged(),
        q: seg.map(|s| s.q),
        eta: fit.penalized_eta().to_rows(),
        hazard: hazard.to_rows(),
        labels: seg.map(|s| s.labels.to_rows()),
        areas: seg.map(|s| s.areas.as_slice()),
        path: &selection.path.scores,
        excluded_records: stats.exclusions().excluded_records(),
        exclusions: *stats.exclusions(),
        n_individuals: stats.n_individuals(),
        total_events: stats.total_events(),
        total_exposure: stats.total_exposure(),
        age_period,
    };
    write_json(args.out.as_ref(), &out)
}
