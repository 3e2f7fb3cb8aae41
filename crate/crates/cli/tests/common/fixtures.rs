//! Input files shared by the in-process and the end-to-end tests.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lexisseg::grid::Grid;
use lexisseg::simulate::{replicate_rng, sample_dataset, Censoring, PiecewiseHazard};
use lexisseg::IndividualRecord;

/// Hazard 0.02 on cohorts [0, 3) and 0.2 on [3, 6), ages [0, 6), censoring
/// uniform on [3, 6].
pub fn two_block_records(n: usize, seed: u64) -> Vec<IndividualRecord> {
    let hazard = PiecewiseHazard::new(vec![0.0, 3.0, 6.0], vec![0.0, 6.0], Grid::from_vec(2, 1, vec![0.02, 0.2]).unwrap()).unwrap();
    sample_dataset(&hazard, n, Some(Censoring { low: 3.0, high: 6.0 }), (0.0, 6.0), &mut replicate_rng(seed, 0))
}

pub fn write_records(dir: &Path, name: &str, records: &[IndividualRecord]) -> PathBuf {
    let mut text = String::from("cohort,time,event\n");
    for r in records {
        writeln!(text, "{},{},{}", r.cohort, r.time, u8::from(r.event)).unwrap();
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

pub fn write_grid(dir: &Path, name: &str, cohort_cuts: &[f64], age_cuts: &[f64]) -> PathBuf {
    let path = dir.join(name);
    let value = serde_json::json!({ "cohort_cuts": cohort_cuts, "age_cuts": age_cuts });
    fs::write(&path, value.to_string()).unwrap();
    path
}

pub fn unit_cuts(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64).collect()
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).expect("read output")).expect("valid JSON")
}

