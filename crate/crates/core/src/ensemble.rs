//! Bootstrap-resampled estimator replicas and most-confident selection.
//!
//! Each replica is fitted on a with-replacement resample of the training set.
//! Per query, a replica is run `R` times with different seeds; the empirical
//! 2.5th/97.5th percentiles of those runs form its interval, and the replica
//! with the narrowest interval (highest `1/(width + eps)`) supplies the
//! estimate.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::Estimate;
use crate::metrics::{nearest_rank, sorted};

pub const DEFAULT_REPLICAS: usize = 8;
pub const DEFAULT_RUNS: usize = 32;
pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_LEVEL: f64 = 0.95;

/// One bootstrap replica. `id` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Replica<M> {
    pub id: usize,
    pub seed: u64,
    pub model: M,
}

/// An estimator whose output varies with a run seed (sampled decoding,
/// sample draws).
pub trait SeededEstimator<Q: ?Sized> {
    fn estimate_seeded(&self, query: &Q, run_seed: u64) -> Result<f64>;
}

/// Draws `n` indices into `0..len` with replacement.
pub fn resample_indices(len: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0..len)).collect()
}

/// Fits `replicas` models, replica `i` on a resample of `train_set` drawn with
/// seed `base_seed + i`.
pub fn bootstrap_train<T: Clone, M>(
    train_set: &[T],
    replicas: usize,
    base_seed: u64,
    mut fit: impl FnMut(&[T], u64) -> Result<M>,
) -> Result<Vec<Replica<M>>> {
    if train_set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if replicas == 0 {
        return Err(Error::InvalidArgument("replica count must be >= 1".into()));
    }
    (1..=replicas)
        .map(|id| {
            let seed = base_seed.wrapping_add(id as u64);
            let sample: Vec<T> = resample_indices(train_set.len(), train_set.len(), seed)
                .into_iter()
                .map(|i| train_set[i].clone())
                .collect();
            Ok(Replica {
                id,
                seed,
                model: fit(&sample, seed)?,
            })
        })
        .collect()
}

/// Empirical `(1-level)/2` and `1-(1-level)/2` nearest-rank percentiles of
/// `runs`.
pub fn interval_from_runs(runs: &[f64], level: f64) -> Result<(f64, f64)> {
    if runs.len() < 2 {
        return Err(Error::InvalidArgument("need at least two runs".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument("confidence level must lie in (0, 1)".into()));
    }
    let s = sorted(runs);
    let tail = (1.0 - level) / 2.0 * 100.0;
    Ok((nearest_rank(&s, tail), nearest_rank(&s, 100.0 - tail)))
}

/// Runs the replica `runs` times with seeds derived from its own seed and
/// returns the run estimates and their interval.
pub fn confidence_interval<Q: ?Sized, M: SeededEstimator<Q>>(
    replica: &Replica<M>,
    query: &Q,
    runs: usize,
    level: f64,
) -> Result<(Vec<f64>, (f64, f64))> {
    if runs < 2 {
        return Err(Error::InvalidArgument("need at least two runs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(replica.seed ^ 0xC1C1_C1C1_C1C1_C1C1);
    let mut out = Vec::with_capacity(runs);
    for _ in 0..runs {
        out.push(replica.model.estimate_seeded(query, rng.random())?);
    }
    let ci = interval_from_runs(&out, level)?;
    Ok((out, ci))
}

pub fn confidence_score(low: f64, high: f64, eps: f64) -> f64 {
    1.0 / (high - low + eps)
}

/// Index (0-based) of the estimate with the highest confidence, ties to the
/// smallest index. Estimates without an interval score lowest.
pub fn select_most_confident(estimates: &[Estimate], eps: f64) -> Result<(usize, &Estimate)> {
    if estimates.is_empty() {
        return Err(Error::Empty("estimate list"));
    }
    let score = |e: &Estimate| e.ci.map(|(l, h)| confidence_score(l, h, eps)).unwrap_or(f64::NEG_INFINITY);
    let mut best = 0;
    for i in 1..estimates.len() {
        if score(&estimates[i]) > score(&estimates[best]) {
            best = i;
        }
    }
    Ok((best, &estimates[best]))
}

/// Point estimate of each replica (median of its runs) with interval and
/// confidence attached, followed by the most-confident pick.
pub fn ensemble_estimate<Q: ?Sized, M: SeededEstimator<Q>>(
    replicas: &[Replica<M>],
    query: &Q,
    runs: usize,
    level: f64,
    eps: f64,
    source: crate::estimators::EstimateSource,
) -> Result<(usize, Vec<Estimate>)> {
    let mut all = Vec::with_capacity(replicas.len());
    for r in replicas {
        let (values, (lo, hi)) = confidence_interval(r, query, runs, level)?;
        let mut e = Estimate::new(crate::metrics::median(&values), source);
        e.ci = Some((lo, hi));
        e.confidence = Some(confidence_score(lo, hi, eps));
        all.push(e);
    }
    let (j, _) = select_most_confident(&all, eps)?;
    Ok((j, all))
}
