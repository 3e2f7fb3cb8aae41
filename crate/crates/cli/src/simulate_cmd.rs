use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use lexisseg::select::{default_kappa_grid, parse_kappa_grid};
use lexisseg::simulate::{run_replicates, Censoring, Design, HarnessConfig, Method, Report, SimConfig};

use crate::output::{digest_file, write_json, Manifest, PhaseTimer, SCHEMA};

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// smooth, piecewise, or a design JSON file.
    #[arg(long, default_value = "piecewise")]
    pub design: String,
    /// Individuals per replicate.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    /// Comma-separated: l2cv, ebic, aic, bic, l0cv, agecohort.
    #[arg(long, default_value = "l2cv,ebic,aic,bic,agecohort")]
    pub methods: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `lo:hi:Nlog` or a comma-separated list.
    #[arg(long)]
    pub kappa_grid: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 75.0)]
    pub censor_low: f64,
    #[arg(long, default_value_t = 100.0)]
    pub censor_high: f64,
    /// Observe every event time.
    #[arg(long)]
    pub no_censoring: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Add per-method and per-phase wall-clock times.
    #[arg(long)]
    #[serde(skip)]
    pub record_timings: bool,
}

#[derive(Serialize)]
struct SimulateOutput {
    manifest: Manifest,
    #[serde(flatten)]
    report: Report,
}

pub fn run(args: SimulateArgs) -> Result<()> {
    let methods = Method::parse_list(&args.methods)?;
    let kappas = match &args.kappa_grid {
        Some(s) => parse_kappa_grid(s)?,
        None => default_kappa_grid(),
    };
    let mut manifest = Manifest::new("simulate", Some(args.seed), &args)?;
    if !matches!(args.design.as_str(), "smooth" | "piecewise") {
        manifest.inputs.push(digest_file(Path::new(&args.design))?);
    }
    let design = Design::from_name_or_path(&args.design)?;

    let mut sim = SimConfig::new(args.n, args.replicates, args.seed);
    sim.censoring = (!args.no_censoring).then_some(Censoring { low: args.censor_low, high: args.censor_high });
    let mut config = HarnessConfig::new(sim, methods);
    config.kappas = kappas;
    config.select.cv.folds = args.folds;
    config.record_timings = args.record_timings;

    let mut timer = PhaseTimer::new(args.record_timings);
    let report = timer.time("replicates", || run_replicates(&design, &config))?;
    debug_assert_eq!(report.schema, SCHEMA);
    manifest.wall_seconds = timer.into_map();
    write_json(args.out.as_ref(), &SimulateOutput { manifest, report })
}
