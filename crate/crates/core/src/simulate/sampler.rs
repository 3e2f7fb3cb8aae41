//! Right-censored survival data drawn from a true hazard.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::design::{TrueHazard, AGE_DOMAIN, COHORT_DOMAIN};
use crate::error::{Error, Result};
use crate::lexis::{GridSpec, IndividualRecord};

/// Uniform censoring age on `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Censoring {
    pub low: f64,
    pub high: f64,
}

impl Default for Censoring {
    fn default() -> Self {
        Self { low: 75.0, high: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    /// `None` observes every event time.
    pub censoring: Option<Censoring>,
    pub cohort_range: (f64, f64),
    pub est_grid: GridSpec,
    pub seed: u64,
    pub replicates: usize,
}

impl SimConfig {
    /// Censoring on `[75, 100]`, cohorts on `[1900, 2000)`, and a 20×20 grid
    /// of five-year cells.
    pub fn new(n: usize, replicates: usize, seed: u64) -> Self {
        Self {
            n,
            censoring: Some(Censoring::default()),
            cohort_range: COHORT_DOMAIN,
            est_grid: default_estimation_grid(),
            seed,
            replicates,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.replicates == 0 {
            return Err(Error::InvalidConfig("n and replicates must be positive".into()));
        }
        if let Some(c) = self.censoring {
            if !(c.low < c.high && c.low >= 0.0 && c.high.is_finite()) {
                return Err(Error::InvalidConfig(format!("censoring interval [{}, {}] is invalid", c.low, c.high)));
            }
        }
        if !(self.cohort_range.0 < self.cohort_range.1) {
            return Err(Error::InvalidConfig("cohort range is empty".into()));
        }
        Ok(())
    }
}

/// 20 five-year cohort intervals on `[1900, 2000]` by 20 five-year age
/// intervals on `[0, 100]`.
pub fn default_estimation_grid() -> GridSpec {
    GridSpec::uniform(COHORT_DOMAIN, 20, AGE_DOMAIN, 20).expect("valid default grid")
}

/// Generator for replicate `r`: the seed selects the key, the replicate the stream.
pub fn replicate_rng(seed: u64, replicate: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

/// Draws `n` individuals. For each one, in this order: cohort uniform on
/// `cohort_range`, a unit-exponential variate inverted through the cumulative
/// hazard into the event age, and a uniform censoring age.
pub fn sample_dataset<H: TrueHazard + ?Sized>(
    hazard: &H,
    n: usize,
    censoring: Option<Censoring>,
    cohort_range: (f64, f64),
    rng: &mut impl Rng,
) -> Vec<IndividualRecord> {
    (0..n)
        .map(|_| {
            let cohort = rng.random_range(cohort_range.0..cohort_range.1);
            let e: f64 = rng.sample(Exp1);
            let t = hazard.invert_cumulative(cohort, e);
            match censoring {
                Some(c) => {
                    let censor = rng.random_range(c.low..=c.high);
                    IndividualRecord {
                        cohort,
                        time: t.min(censor),
                        event: t <= censor,
                    }
                }
                None => IndividualRecord { cohort, time: t, event: true },
            }
        })
        .collect()
}

/// Fraction of records whose event was observed.
pub fn observed_fraction(records: &[IndividualRecord]) -> f64 {
    if records.is_empty() {
        return f64::NAN;
    }
    records.iter().filter(|r| r.event).count() as f64 / records.len() as f64
}
