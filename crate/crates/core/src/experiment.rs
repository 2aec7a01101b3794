//! Permutation sources, certified far-permutation generation, and the
//! rejection-rate experiment runner.

use std::fs;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::perm::{random_permutation, Permutation};
use crate::property::{brute_distance, Metric, PropertyOracle, DEFAULT_BRUTE_FORCE_GUARD};
use crate::rational::{format_rational, Rational};
use crate::tester::{rejection_rate_with, trial_seed};

fn is_av21(oracle: &PropertyOracle) -> bool {
    oracle
        .basis()
        .is_some_and(|b| b.patterns() == [Permutation::reverse(2)])
}

/// A permutation with `brute_distance(π, oracle, metric) >= ε`.
///
/// Up to the brute-force guard the distance is certified by enumeration over
/// seeded random candidates. Beyond it only `reverse_n` against `Av(21)`
/// under Kendall's tau is available, at distance exactly 1.
pub fn generate_far(
    n: usize,
    epsilon: &Rational,
    oracle: &PropertyOracle,
    metric: Metric,
    seed: u64,
    attempt_cap: u64,
) -> Result<Permutation> {
    let too_far = || Error::AttemptCapExceeded {
        epsilon: format_rational(epsilon),
        attempts: attempt_cap,
    };
    if *epsilon > Rational::from_integer(1.into()) {
        return Err(too_far());
    }
    if n > DEFAULT_BRUTE_FORCE_GUARD {
        if is_av21(oracle) && metric == Metric::Kendall && n >= 2 {
            return Ok(Permutation::reverse(n));
        }
        return Err(Error::OrderTooLargeForBruteForce {
            order: n,
            guard: DEFAULT_BRUTE_FORCE_GUARD,
        });
    }
    for attempt in 0..attempt_cap {
        let pi = random_permutation(n, trial_seed(seed, attempt))?;
        if brute_distance(&pi, oracle, metric)? >= *epsilon {
            return Ok(pi);
        }
    }
    Err(too_far())
}

#[derive(Debug, Clone, PartialEq)]
pub enum PermutationSource {
    Explicit(Permutation),
    File(PathBuf),
    Random { n: usize, seed: u64 },
    Far { n: usize, epsilon: Rational, metric: Metric, seed: u64, attempt_cap: u64 },
    Identity(usize),
    Reverse(usize),
    Shifted { n: usize, shift: usize },
}

impl PermutationSource {
    pub fn resolve(&self, oracle: &PropertyOracle) -> Result<Permutation> {
        match self {
            PermutationSource::Explicit(pi) => Ok(pi.clone()),
            PermutationSource::File(path) => fs::read_to_string(path)?.trim().parse(),
            PermutationSource::Random { n, seed } => random_permutation(*n, *seed),
            PermutationSource::Far { n, epsilon, metric, seed, attempt_cap } => {
                generate_far(*n, epsilon, oracle, *metric, *seed, *attempt_cap)
            }
            PermutationSource::Identity(n) => Ok(Permutation::identity(*n)),
            PermutationSource::Reverse(n) => Ok(Permutation::reverse(*n)),
            PermutationSource::Shifted { n, shift } => Ok(Permutation::shifted(*n, *shift)),
        }
    }
}

#[derive(Clone)]
pub struct ExperimentSpec {
    pub oracle: PropertyOracle,
    pub sources: Vec<PermutationSource>,
    pub sample_sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentRow {
    pub n: usize,
    pub sample_size: usize,
    pub trials: usize,
    pub rejections: usize,
    pub rate: Rational,
    /// Master seed of this point's trials.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentTable {
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n", "sample_size", "trials", "rejections", "rate_num", "rate_den", "seed"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.sample_size.to_string(),
                r.trials.to_string(),
                r.rejections.to_string(),
                r.rate.numer().to_string(),
                r.rate.denom().to_string(),
                r.seed.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("ascii")
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentTable> {
    run_experiment_with(spec, Execution::default())
}

/// One row per (source, sample size) point, in that nested order. Point `p`
/// runs its trials under `trial_seed(spec.seed, p)`.
pub fn run_experiment_with(spec: &ExperimentSpec, exec: Execution) -> Result<ExperimentTable> {
    if spec.trials == 0 {
        return Err(Error::PreconditionViolated("trials must be positive".into()));
    }
    if spec.sample_sizes.is_empty() {
        return Err(Error::PreconditionViolated("no sample sizes".into()));
    }
    let mut points = Vec::new();
    for (s, source) in spec.sources.iter().enumerate() {
        let at = |e| Error::AtPoint { point: s * spec.sample_sizes.len(), source: Box::new(e) };
        let pi = source.resolve(&spec.oracle).map_err(at)?;
        for &size in &spec.sample_sizes {
            let index = points.len();
            points.push((index, pi.clone(), size));
        }
    }
    let results = map_slice(exec, &points, |(index, pi, size)| {
        let seed = trial_seed(spec.seed, *index as u64);
        rejection_rate_with(pi, &spec.oracle, *size, spec.trials, seed, Execution::Sequential)
            .map(|r| ExperimentRow {
                n: pi.len(),
                sample_size: *size,
                trials: r.trials,
                rejections: r.rejections,
                rate: r.rate,
                seed,
            })
            .map_err(|e| Error::AtPoint { point: *index, source: Box::new(e) })
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    let table = ExperimentTable { rows };
    if let Some(path) = &spec.out {
        fs::write(path, table.to_csv())?;
    }
    Ok(table)
}
