//! Replication runner and summary statistics.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, LabError, Result};
use crate::rng::SeedStream;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Mean and standard error of i.i.d. replication values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std_err: f64,
    pub reps: usize,
}

impl Summary {
    /// Sums in slice order, so the result depends only on the values.
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(param("a confidence interval needs at least 2 replications"));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        Ok(Self {
            mean,
            std_err: (var / n as f64).sqrt(),
            reps: n,
        })
    }

    /// Half-width of the 95% normal interval.
    pub fn ci_halfwidth(&self) -> f64 {
        Z95 * self.std_err
    }

    /// `|mean − target| ≤ k·se`.
    pub fn within_stderr(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err
    }
}

/// A set of replications, one seed stream each.
#[derive(Debug, Clone)]
pub struct Replications {
    seeds: Vec<SeedStream>,
    jobs: usize,
}

impl Replications {
    /// Replication `k` uses stream `k` of `master_seed`.
    pub fn new(master_seed: u64, reps: usize, jobs: usize) -> Result<Self> {
        Self::from_seeds(
            (0..reps).map(|k| SeedStream::replication(master_seed, k)).collect(),
            jobs,
        )
    }

    pub fn from_seeds(seeds: Vec<SeedStream>, jobs: usize) -> Result<Self> {
        if seeds.len() < 2 {
            return Err(param(format!("need at least 2 replications, got {}", seeds.len())));
        }
        if jobs == 0 {
            return Err(param("jobs must be at least 1"));
        }
        let distinct: HashSet<_> = seeds.iter().collect();
        if distinct.len() != seeds.len() {
            return Err(param("replications must use distinct seed streams"));
        }
        Ok(Self { seeds, jobs })
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn jobs(&self) -> usize {
        self.jobs
    }

    pub fn seeds(&self) -> &[SeedStream] {
        &self.seeds
    }

    /// Runs `task` once per seed on `jobs` workers and returns the results
    /// in replication order. The first failing replication aborts the run.
    pub fn run<T, F>(&self, task: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(SeedStream) -> Result<T> + Sync + Send,
    {
        let results: Vec<Result<T>> = if self.jobs == 1 {
            self.seeds.iter().map(|&s| task(s)).collect()
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.jobs)
                .build()
                .map_err(|e| LabError::Numerical(format!("worker pool: {e}")))?;
            pool.install(|| self.seeds.par_iter().map(|&s| task(s)).collect())
        };
        results
            .into_iter()
            .enumerate()
            .map(|(index, r)| {
                r.map_err(|e| LabError::Replication {
                    index,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_known_values() {
        let s = Summary::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.std_err - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!((s.ci_halfwidth() - Z95 * s.std_err).abs() < 1e-15);
        assert!(Summary::from_samples(&[1.0]).is_err());
    }

    #[test]
    fn duplicate_streams_rejected() {
        let s = SeedStream::new(4, 0);
        assert!(matches!(
            Replications::from_seeds(vec![s, s], 1),
            Err(LabError::Parameter(_))
        ));
        assert!(Replications::new(4, 1, 1).is_err());
        assert!(Replications::new(4, 3, 0).is_err());
    }

    #[test]
    fn order_is_independent_of_workers() {
        let task = |s: SeedStream| Ok(s.generator().normal());
        let a = Replications::new(9, 37, 1).unwrap().run(task).unwrap();
        let b = Replications::new(9, 37, 8).unwrap().run(task).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn failures_carry_the_replication_index() {
        let reps = Replications::new(1, 5, 2).unwrap();
        let err = reps
            .run(|s| {
                if s.stream_index == 3 {
                    Err(LabError::Numerical("boom".into()))
                } else {
                    Ok(())
                }
            })
            .unwrap_err();
        assert!(matches!(err, LabError::Replication { index: 3, .. }));
    }
}
