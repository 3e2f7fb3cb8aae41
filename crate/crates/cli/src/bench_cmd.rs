use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use serde::Serialize;

use lexisseg::bench::{log_log_slope, run_bench, BenchOptions, BenchRow};

use crate::output::{write_json, Manifest, SCHEMA};

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    /// Cohort counts J, comma-separated.
    #[arg(long, default_value = "50,100,200,400")]
    pub sizes: String,
    /// Age count K, held fixed.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Skip the dense Cholesky path.
    #[arg(long)]
    pub no_dense: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the table as JSON.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct BenchOutput {
    schema: u32,
    manifest: Manifest,
    rows: Vec<BenchRow>,
    banded_slope: Option<f64>,
    dense_slope: Option<f64>,
}

fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    let sizes = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if sizes.is_empty() || sizes.contains(&0) {
        bail!("sizes must be positive integers");
    }
    Ok(sizes)
}

pub fn run(args: BenchArgs) -> Result<()> {
    let sizes = parse_sizes(&args.sizes)?;
    let opts = BenchOptions {
        cols: args.k,
        dense: !args.no_dense,
        seed: args.seed,
        ..BenchOptions::default()
    };
    let rows = run_bench(&sizes, &opts)?;
    let xs: Vec<f64> = rows.iter().map(|r| r.rows as f64).collect();
    let slope = |ys: Option<Vec<f64>>| ys.filter(|_| xs.len() >= 2).map(|ys| log_log_slope(&xs, &ys));
    let banded_slope = slope(Some(rows.iter().map(|r| r.banded_seconds).collect()));
    let dense_slope = slope(rows.iter().map(|r| r.dense_seconds).collect());

    println!("{:>6} {:>4} {:>7} {:>14} {:>14} {:>10}", "J", "K", "dim", "banded_s", "dense_s", "max_rel");
    for r in &rows {
        let dense = r.dense_seconds.map_or("-".to_string(), |t| format!("{t:.6e}"));
        let diff = r.max_relative_difference.map_or("-".to_string(), |d| format!("{d:.1e}"));
        println!("{:>6} {:>4} {:>7} {:>14.6e} {:>14} {:>10}", r.rows, r.cols, r.dim, r.banded_seconds, dense, diff);
    }
    if let Some(s) = banded_slope {
        println!("banded log-log slope vs J: {s:.3}");
    }
    if let Some(s) = dense_slope {
        println!("dense log-log slope vs J: {s:.3}");
    }
    if args.out.is_some() {
        let output = BenchOutput {
            schema: SCHEMA,
            manifest: Manifest::new("bench", Some(args.seed), &args)?,
            rows,
            banded_slope,
            dense_slope,
        };
        write_json(args.out.as_ref(), &output)?;
    }
    Ok(())
}
