//! Q-error and nearest-rank percentile reports.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quantiles reported by default (percent).
pub const REPORT_QUANTILES: [f64; 5] = [50.0, 70.0, 90.0, 95.0, 99.0];

/// `max(est/truth, truth/est)` with both operands clamped to at least 1.
pub fn qerror(est: f64, truth: f64) -> f64 {
    let e = if est.is_nan() { 1.0 } else { est.max(1.0) };
    let t = if truth.is_nan() { 1.0 } else { truth.max(1.0) };
    if e > t {
        e / t
    } else {
        t / e
    }
}

/// Nearest-rank percentile of an ascending slice: the element at rank
/// `ceil(q/100 * n)` (1-based, at least 1).
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty list");
    let n = sorted.len();
    let rank = libm::ceil(q * n as f64 / 100.0) as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(values: &[f64]) -> f64 {
    nearest_rank(&sorted(values), 50.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QErrorReport {
    pub estimator: String,
    pub family: String,
    pub count: usize,
    /// `(quantile percent, q-error)` in ascending quantile order.
    pub quantiles: Vec<(f64, f64)>,
    pub breakdown: BTreeMap<String, QErrorReport>,
}

impl QErrorReport {
    pub fn at(&self, q: f64) -> Option<f64> {
        self.quantiles.iter().find(|(p, _)| *p == q).map(|(_, v)| *v)
    }
}

/// Nearest-rank report over `errors` at each of `quantiles`.
pub fn percentile_report(errors: &[f64], quantiles: &[f64], estimator: &str, family: &str) -> Result<QErrorReport> {
    if errors.is_empty() {
        return Err(Error::Empty("q-error list"));
    }
    let s = sorted(errors);
    let mut qs = quantiles.to_vec();
    qs.sort_by(f64::total_cmp);
    Ok(QErrorReport {
        estimator: estimator.into(),
        family: family.into(),
        count: errors.len(),
        quantiles: qs.iter().map(|&q| (q, nearest_rank(&s, q))).collect(),
        breakdown: BTreeMap::new(),
    })
}
