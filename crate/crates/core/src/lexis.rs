//! Data ingestion and tabulation on the age-cohort plane.
//!
//! Individual follow-up is summarized by the exhaustive statistics: event
//! counts and person-time at risk per (cohort interval, age interval) cell.
//! All intervals are left-closed and right-open.

use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

const RECORDS_HEADER: [&str; 3] = ["cohort", "time", "event"];
const REGISTER_HEADER: [&str; 4] = ["cohort_index", "age_index", "events", "person_years"];
const TABULATE_CHUNK: usize = 16_384;

/// One subject: cohort (calendar time of origin), observed time since origin
/// and whether the event was observed (`false` means right-censored).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndividualRecord {
    pub cohort: f64,
    pub time: f64,
    pub event: bool,
}

impl IndividualRecord {
    pub fn new(cohort: f64, time: f64, event: bool) -> Result<Self> {
        let rec = Self {
            cohort,
            time,
            event,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.cohort.is_finite() {
            return Err(Error::InvalidRecord(format!("non-finite cohort {}", self.cohort)));
        }
        if !self.time.is_finite() {
            return Err(Error::InvalidRecord(format!("non-finite time {}", self.time)));
        }
        if self.time < 0.0 {
            return Err(Error::InvalidRecord("negative time".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct RawGridSpec {
    cohort_cuts: Vec<f64>,
    age_cuts: Vec<f64>,
}

/// Cut points of the cohort axis (`c_0 < … < c_J`) and the age axis
/// (`d_0 < … < d_K`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGridSpec")]
pub struct GridSpec {
    cohort_cuts: Vec<f64>,
    age_cuts: Vec<f64>,
}

impl TryFrom<RawGridSpec> for GridSpec {
    type Error = Error;

    fn try_from(raw: RawGridSpec) -> Result<Self> {
        GridSpec::new(raw.cohort_cuts, raw.age_cuts)
    }
}

fn check_cuts(axis: &str, cuts: &[f64]) -> Result<()> {
    if cuts.len() < 2 {
        return Err(Error::InvalidGrid(format!(
            "{axis} axis needs at least two cut points, got {}",
            cuts.len()
        )));
    }
    if let Some(c) = cuts.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidGrid(format!("{axis} cut {c} is not finite")));
    }
    if let Some(w) = cuts.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid(format!(
            "{axis} cuts must be strictly increasing ({} >= {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

fn interval_index(cuts: &[f64], x: f64) -> Option<usize> {
    if x < cuts[0] || x >= cuts[cuts.len() - 1] {
        return None;
    }
    Some(cuts.partition_point(|&c| c <= x) - 1)
}

impl GridSpec {
    pub fn new(cohort_cuts: Vec<f64>, age_cuts: Vec<f64>) -> Result<Self> {
        check_cuts("cohort", &cohort_cuts)?;
        check_cuts("age", &age_cuts)?;
        Ok(Self {
            cohort_cuts,
            age_cuts,
        })
    }

    /// Equally spaced grid with `n_cohorts` intervals over `cohorts` and
    /// `n_ages` intervals over `ages`.
    pub fn uniform(cohorts: (f64, f64), n_cohorts: usize, ages: (f64, f64), n_ages: usize) -> Result<Self> {
        let lin = |(lo, hi): (f64, f64), n: usize| -> Vec<f64> {
            (0..=n)
                .map(|i| if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 })
                .collect()
        };
        Self::new(lin(cohorts, n_cohorts), lin(ages, n_ages))
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn cohort_cuts(&self) -> &[f64] {
        &self.cohort_cuts
    }

    pub fn age_cuts(&self) -> &[f64] {
        &self.age_cuts
    }

    /// J, the number of cohort intervals.
    pub fn n_cohorts(&self) -> usize {
        self.cohort_cuts.len() - 1
    }

    /// K, the number of age intervals.
    pub fn n_ages(&self) -> usize {
        self.age_cuts.len() - 1
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_cohorts(), self.n_ages())
    }

    pub fn n_cells(&self) -> usize {
        self.n_cohorts() * self.n_ages()
    }

    pub fn cohort_index(&self, cohort: f64) -> Option<usize> {
        interval_index(&self.cohort_cuts, cohort)
    }

    pub fn age_index(&self, age: f64) -> Option<usize> {
        interval_index(&self.age_cuts, age)
    }

    pub fn cohort_interval(&self, j: usize) -> (f64, f64) {
        (self.cohort_cuts[j], self.cohort_cuts[j + 1])
    }

    pub fn age_interval(&self, k: usize) -> (f64, f64) {
        (self.age_cuts[k], self.age_cuts[k + 1])
    }
}

/// Counts of records (or parts of records) that fell outside the grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusions {
    /// Records whose cohort lies outside `[c_0, c_J)`; dropped entirely.
    pub cohort_out_of_range: usize,
    /// In-grid records whose observed event lies outside `[d_0, d_K)`.
    pub events_out_of_range: usize,
    /// In-grid records followed beyond `d_K`; the excess time is dropped.
    pub truncated_follow_up: usize,
}

impl Exclusions {
    /// Records that lost an event or were dropped altogether.
    pub fn excluded_records(&self) -> usize {
        self.cohort_out_of_range + self.events_out_of_range
    }

    fn merge(&mut self, other: &Exclusions) {
        self.cohort_out_of_range += other.cohort_out_of_range;
        self.events_out_of_range += other.events_out_of_range;
        self.truncated_follow_up += other.truncated_follow_up;
    }
}

/// Event counts `O` and person-time `R` on a J×K grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveStats {
    grid: GridSpec,
    events: Grid<f64>,
    exposure: Grid<f64>,
    n_individuals: Option<usize>,
    exclusions: Exclusions,
}

impl ExhaustiveStats {
    /// Validates the invariants: non-negative integral events, non-negative
    /// finite exposure, and no events in a cell without exposure.
    pub fn new(grid: GridSpec, events: Grid<f64>, exposure: Grid<f64>, n_individuals: Option<usize>) -> Result<Self> {
        events.check_shape(grid.shape())?;
        exposure.check_shape(grid.shape())?;
        for (((j, k), &o), &r) in events.indexed_iter().zip(exposure.iter()) {
            if !(o >= 0.0 && o.is_finite() && o.fract() == 0.0) {
                return Err(Error::InvalidStats(format!(
                    "events at cell ({}, {}) must be a non-negative integer, got {o}",
                    j + 1,
                    k + 1
                )));
            }
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::InvalidStats(format!(
                    "person-years at cell ({}, {}) must be non-negative, got {r}",
                    j + 1,
                    k + 1
                )));
            }
            if r == 0.0 && o > 0.0 {
                return Err(Error::InvalidStats(format!(
                    "events without exposure at cell ({}, {})",
                    j + 1,
                    k + 1
                )));
            }
        }
        Ok(Self {
            grid,
            events,
            exposure,
            n_individuals,
            exclusions: Exclusions::default(),
        })
    }

    fn empty(grid: &GridSpec) -> Self {
        let (j, k) = grid.shape();
        Self {
            grid: grid.clone(),
            events: Grid::filled(j, k, 0.0),
            exposure: Grid::filled(j, k, 0.0),
            n_individuals: Some(0),
            exclusions: Exclusions::default(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn shape(&self) -> (usize, usize) {
        self.grid.shape()
    }

    pub fn events(&self) -> &Grid<f64> {
        &self.events
    }

    pub fn exposure(&self) -> &Grid<f64> {
        &self.exposure
    }

    pub fn n_individuals(&self) -> Option<usize> {
        self.n_individuals
    }

    pub fn exclusions(&self) -> &Exclusions {
        &self.exclusions
    }

    pub fn total_events(&self) -> f64 {
        self.events.iter().sum()
    }

    pub fn total_exposure(&self) -> f64 {
        self.exposure.iter().sum()
    }

    /// Sample size used by the information criteria: the number of
    /// individuals when known, otherwise the total number of events.
    pub fn sample_size(&self) -> f64 {
        match self.n_individuals {
            Some(n) => n as f64,
            None => self.total_events(),
        }
    }

    fn merge(&mut self, other: &ExhaustiveStats) {
        for (a, b) in self.events.as_mut_slice().iter_mut().zip(other.events.iter()) {
            *a += b;
        }
        for (a, b) in self.exposure.as_mut_slice().iter_mut().zip(other.exposure.iter()) {
            *a += b;
        }
        self.n_individuals = match (self.n_individuals, other.n_individuals) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        self.exclusions.merge(&other.exclusions);
    }
}

fn tabulate_chunk(records: &[IndividualRecord], grid: &GridSpec) -> Result<ExhaustiveStats> {
    let mut stats = ExhaustiveStats::empty(grid);
    let cuts = grid.age_cuts();
    let last = cuts[cuts.len() - 1];
    let mut n_in = 0;
    for rec in records {
        rec.validate()?;
        let Some(j) = grid.cohort_index(rec.cohort) else {
            stats.exclusions.cohort_out_of_range += 1;
            continue;
        };
        n_in += 1;
        for k in 0..grid.n_ages() {
            let (lo, hi) = (cuts[k], cuts[k + 1]);
            if lo >= rec.time {
                break;
            }
            stats.exposure[(j, k)] += rec.time.min(hi) - lo;
        }
        if rec.event {
            match grid.age_index(rec.time) {
                Some(k) => stats.events[(j, k)] += 1.0,
                None => stats.exclusions.events_out_of_range += 1,
            }
        }
        if rec.time > last {
            stats.exclusions.truncated_follow_up += 1;
        }
    }
    stats.n_individuals = Some(n_in);
    Ok(stats)
}

/// Tabulates individual records into events and person-time per cell.
///
/// Large inputs are split into fixed-size chunks that are tabulated in
/// parallel and summed in chunk order, so the result does not depend on the
/// number of worker threads.
pub fn tabulate(records: &[IndividualRecord], grid: &GridSpec) -> Result<ExhaustiveStats> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let partials = records
        .par_chunks(TABULATE_CHUNK)
        .map(|chunk| tabulate_chunk(chunk, grid))
        .collect::<Result<Vec<_>>>()?;
    let mut iter = partials.into_iter();
    let mut total = iter.next().expect("non-empty input yields a chunk");
    for part in iter {
        total.merge(&part);
    }
    Ok(total)
}

fn check_header(path: &Path, found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let found: Vec<String> = found.iter().map(|h| h.trim().to_string()).collect();
    if found.len() != expected.len() || found.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(Error::UnknownHeader {
            path: path.to_path_buf(),
            found,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        });
    }
    Ok(())
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: err.to_string(),
    }
}

/// Reads a `cohort,time,event` CSV file of individual records.
pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<IndividualRecord>> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    check_header(path, &header, &RECORDS_HEADER)?;

    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let fail = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if row.len() != 3 {
            return Err(fail(format!("expected 3 fields, found {}", row.len())));
        }
        let cohort: f64 = row[0].parse().map_err(|_| fail(format!("invalid cohort {:?}", &row[0])))?;
        let time: f64 = row[1].parse().map_err(|_| fail(format!("invalid time {:?}", &row[1])))?;
        let event = match &row[2] {
            "0" => false,
            "1" => true,
            other => return Err(fail(format!("event must be 0 or 1, got {other:?}"))),
        };
        let rec = IndividualRecord::new(cohort, time, event).map_err(|e| match e {
            Error::InvalidRecord(msg) => fail(msg),
            other => other,
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Reads register data (`cohort_index,age_index,events,person_years`, 1-based
/// indices) laid out on `grid`. Missing cells default to zero events and zero
/// person-time.
pub fn load_register(path: impl AsRef<Path>, grid: &GridSpec) -> Result<ExhaustiveStats> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    check_header(path, &header, &REGISTER_HEADER)?;

    let (n_j, n_k) = grid.shape();
    let mut events = Grid::filled(n_j, n_k, 0.0);
    let mut exposure = Grid::filled(n_j, n_k, 0.0);
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let fail = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if row.len() != 4 {
            return Err(fail(format!("expected 4 fields, found {}", row.len())));
        }
        let j: usize = row[0].parse().map_err(|_| fail(format!("invalid cohort_index {:?}", &row[0])))?;
        let k: usize = row[1].parse().map_err(|_| fail(format!("invalid age_index {:?}", &row[1])))?;
        if j == 0 || j > n_j || k == 0 || k > n_k {
            return Err(fail(format!("cell ({j}, {k}) outside the {n_j}x{n_k} grid")));
        }
        let o: f64 = row[2].parse().map_err(|_| fail(format!("invalid events {:?}", &row[2])))?;
        if !(o >= 0.0 && o.is_finite() && o.fract() == 0.0) {
            return Err(fail(format!("events must be a non-negative integer, got {o}")));
        }
        let r: f64 = row[3].parse().map_err(|_| fail(format!("invalid person_years {:?}", &row[3])))?;
        if !(r >= 0.0 && r.is_finite()) {
            return Err(fail(format!("person_years must be non-negative, got {r}")));
        }
        if r == 0.0 && o > 0.0 {
            return Err(fail("events without exposure".into()));
        }
        if !seen.insert((j, k)) {
            return Err(fail(format!("duplicate cell ({j}, {k})")));
        }
        events[(j - 1, k - 1)] = o;
        exposure[(j - 1, k - 1)] = r;
    }
    ExhaustiveStats::new(grid.clone(), events, exposure, None)
}

/// An age-cohort cell drawn in the age-period plane, where it becomes a
/// parallelogram with corners `(period, age)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgePeriodCell {
    pub cohort: [f64; 2],
    pub age: [f64; 2],
    pub period: [f64; 2],
    /// Counter-clockwise from the (lowest cohort, lowest age) corner.
    pub corners: [[f64; 2]; 4],
    pub value: f64,
}

impl AgePeriodCell {
    /// Maps a point of the age-period plane back to its cohort.
    pub fn cohort_of(period: f64, age: f64) -> f64 {
        period - age
    }
}

/// Re-expresses a J×K age-cohort grid in age-period coordinates
/// (`period = cohort + age`). Visualization only.
pub fn shear_to_age_period(values: &Grid<f64>, grid: &GridSpec) -> Result<Vec<AgePeriodCell>> {
    values.check_shape(grid.shape())?;
    let mut cells = Vec::with_capacity(values.len());
    for ((j, k), &value) in values.indexed_iter() {
        let (c0, c1) = grid.cohort_interval(j);
        let (d0, d1) = grid.age_interval(k);
        cells.push(AgePeriodCell {
            cohort: [c0, c1],
            age: [d0, d1],
            period: [c0 + d0, c1 + d1],
            corners: [[c0 + d0, d0], [c1 + d0, d0], [c1 + d1, d1], [c0 + d1, d1]],
            value,
        });
    }
    Ok(cells)
}
