use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::estimators::{estimate_independence, filter_selectivities, StatsSource, DEFAULT_LIKE_SELECTIVITY};
use crate::prompt::Prompt;

pub const MAX_FILTERS: usize = 8;
pub const MAX_ESTIMATES: usize = 4;
pub const MAX_TABLES: usize = 6;

/// Divisor applied to every base-10 log so entries stay near `[-2, 2]`.
const LOG_SCALE: f64 = 6.0;

/// Slot layout of a [`FeatureVector`].
///
/// | offset | width | entry |
/// |---|---|---|
/// | 0 | 1 | tables / 6 |
/// | 1 | 1 | joins / 6 |
/// | 2 | 1 | filtered columns / 8 |
/// | 3 | 8 | log10(selectivity) / 6 per filtered column |
/// | 11 | 4 | log10(1 + v) / 6 per prompt estimate |
/// | 15 | 6 | log10(1 + rows) / 6 per table |
/// | 21 | 1 | has LIKE |
/// | 22 | 1 | has DISTINCT |
/// | 23 | 1 | log10(1 + last reference) / 6 |
/// | 24 | 1 | feedback turns / 5 |
/// | 25 | 1 | log10(1 + independence estimate from prompt stats) / 6 |
///
/// Unused slots are 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout;

impl FeatureLayout {
    pub const FILTERS: usize = 3;
    pub const ESTIMATES: usize = Self::FILTERS + MAX_FILTERS;
    pub const TABLES: usize = Self::ESTIMATES + MAX_ESTIMATES;
    pub const HAS_LIKE: usize = Self::TABLES + MAX_TABLES;
    pub const HAS_DISTINCT: usize = Self::HAS_LIKE + 1;
    pub const LAST_REFERENCE: usize = Self::HAS_DISTINCT + 1;
    pub const ITERATION: usize = Self::LAST_REFERENCE + 1;
    pub const INDEPENDENCE: usize = Self::ITERATION + 1;
    pub const LEN: usize = Self::INDEPENDENCE + 1;

    pub fn names() -> Vec<String> {
        let mut n: Vec<String> = ["tables", "joins", "filters"].iter().map(|s| String::from(*s)).collect();
        n.extend((0..MAX_FILTERS).map(|i| format!("filter_sel_{i}")));
        n.extend((0..MAX_ESTIMATES).map(|i| format!("estimate_{i}")));
        n.extend((0..MAX_TABLES).map(|i| format!("table_rows_{i}")));
        for s in ["has_like", "has_distinct", "last_reference", "iteration", "independence"] {
            n.push(s.into());
        }
        n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Names of slot groups that had more entries than slots.
    pub truncated: Vec<String>,
}

fn log_feature(v: f64) -> f64 {
    libm::log10(1.0 + v.max(0.0)) / LOG_SCALE
}

/// Fixed-length numeric summary of a prompt. Only what the prompt carries
/// is used: with statistics left out, the selectivity, row-count and
/// independence slots stay 0.
pub fn featurize(p: &Prompt) -> FeatureVector {
    let q = &p.query;
    let mut v = alloc::vec![0.0; FeatureLayout::LEN];
    let mut truncated = Vec::new();
    v[0] = q.tables.len() as f64 / 6.0;
    v[1] = q.join_count() as f64 / 6.0;
    v[2] = q.filter_count() as f64 / 8.0;

    let sels = filter_selectivities(p, q, DEFAULT_LIKE_SELECTIVITY).unwrap_or_default();
    if sels.len() > MAX_FILTERS {
        truncated.push("filters".into());
    }
    for (i, (_, s)) in sels.iter().take(MAX_FILTERS).enumerate() {
        v[FeatureLayout::FILTERS + i] = (libm::log10(s.max(1e-12)) / LOG_SCALE).max(-2.0);
    }

    if p.estimates.len() > MAX_ESTIMATES {
        truncated.push("estimates".into());
    }
    for (i, (_, e)) in p.estimates.iter().take(MAX_ESTIMATES).enumerate() {
        v[FeatureLayout::ESTIMATES + i] = log_feature(*e);
    }

    if q.tables.len() > MAX_TABLES {
        truncated.push("tables".into());
    }
    for (i, t) in q.tables.iter().take(MAX_TABLES).enumerate() {
        if let Some(rows) = p.row_count(&t.table) {
            v[FeatureLayout::TABLES + i] = log_feature(rows);
        }
    }

    v[FeatureLayout::HAS_LIKE] = if q.has_like() { 1.0 } else { 0.0 };
    v[FeatureLayout::HAS_DISTINCT] = if q.distinct_on.is_some() { 1.0 } else { 0.0 };
    if let Some(last) = p.feedback.last() {
        v[FeatureLayout::LAST_REFERENCE] = log_feature(last.reference);
    }
    v[FeatureLayout::ITERATION] = p.feedback.len() as f64 / 5.0;
    if let Ok(e) = estimate_independence(p, q) {
        v[FeatureLayout::INDEPENDENCE] = log_feature(e.value);
    }
    for x in &mut v {
        if !x.is_finite() {
            *x = 0.0;
        }
    }
    FeatureVector { values: v, truncated }
}
