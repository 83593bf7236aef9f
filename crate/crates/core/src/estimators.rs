//! Classical baseline estimators: attribute independence over coarse
//! statistics, Bernoulli sampling, and NDV-from-statistics for DISTINCT.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ColumnStats, TableData};
use crate::error::{Error, Result};
use crate::exec::execute_count;
use crate::sql::{like_match, CmpOp, Filter, QueryAst, TableRef};
use crate::value::{ColumnType, Value};

/// Selectivity of a LIKE predicate that matches none of the MCVs.
pub const DEFAULT_LIKE_SELECTIVITY: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EstimateSource {
    PgIndependence,
    Sampling,
    NdvStats,
    DigitModel,
    Remote,
    Mock,
    Oracle,
}

impl EstimateSource {
    pub fn tag(self) -> &'static str {
        match self {
            EstimateSource::PgIndependence => "pg-independence",
            EstimateSource::Sampling => "sampling",
            EstimateSource::NdvStats => "ndv-stats",
            EstimateSource::DigitModel => "digit-model",
            EstimateSource::Remote => "remote",
            EstimateSource::Mock => "mock",
            EstimateSource::Oracle => "oracle",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        [
            EstimateSource::PgIndependence,
            EstimateSource::Sampling,
            EstimateSource::NdvStats,
            EstimateSource::DigitModel,
            EstimateSource::Remote,
            EstimateSource::Mock,
            EstimateSource::Oracle,
        ]
        .into_iter()
        .find(|e| e.tag() == s)
    }
}

impl fmt::Display for EstimateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// A cardinality estimate with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub source: EstimateSource,
    pub confidence: Option<f64>,
    pub ci: Option<(f64, f64)>,
}

impl Estimate {
    pub fn new(value: f64, source: EstimateSource) -> Self {
        Estimate {
            value: if value.is_finite() { value.max(0.0) } else { 0.0 },
            source,
            confidence: None,
            ci: None,
        }
    }
}

/// Fraction of non-null values `<= x` read off equi-depth boundaries, with
/// linear interpolation inside the bucket containing `x`.
pub fn histogram_cdf(bounds: &[f64], x: f64) -> f64 {
    if bounds.len() < 2 {
        return 0.5;
    }
    let buckets = (bounds.len() - 1) as f64;
    if x < bounds[0] {
        return 0.0;
    }
    if x >= bounds[bounds.len() - 1] {
        return 1.0;
    }
    // last boundary <= x
    let i = bounds.partition_point(|b| *b <= x) - 1;
    let (lo, hi) = (bounds[i], bounds[i + 1]);
    let frac = if hi > lo { (x - lo) / (hi - lo) } else { 1.0 };
    ((i as f64 + frac) / buckets).clamp(0.0, 1.0)
}

fn rows_of(stats: &ColumnStats) -> f64 {
    (stats.row_count as f64).max(1.0)
}

/// Equality selectivity: exact on MCV hits, otherwise the remaining non-null
/// mass spread evenly over the non-MCV distinct values.
pub fn eq_selectivity(stats: &ColumnStats, v: &Value) -> f64 {
    let rows = rows_of(stats);
    if let Some((_, c)) = stats.mcv.iter().find(|(m, _)| m.sql_eq(v)) {
        return *c as f64 / rows;
    }
    let floor = 1.0 / rows;
    let rest = stats.ndv.saturating_sub(stats.mcv.len() as u64);
    if rest == 0 {
        return floor;
    }
    let remaining = 1.0 - (stats.mcv_total() + stats.null_count) as f64 / rows;
    (remaining / rest as f64).max(floor)
}

/// LIKE selectivity: the MCV mass matched by the pattern, or `fallback` if no
/// MCV matches.
pub fn like_selectivity(stats: &ColumnStats, pattern: &str, fallback: f64) -> f64 {
    let hit: u64 = stats
        .mcv
        .iter()
        .filter(|(v, _)| v.as_str().is_some_and(|s| like_match(pattern, s)))
        .map(|(_, c)| c)
        .sum();
    if hit > 0 {
        hit as f64 / rows_of(stats)
    } else {
        fallback
    }
}

/// Selectivity of all predicates on one column. Range predicates are merged
/// into a single interval; other predicates multiply.
pub fn column_selectivity(stats: &ColumnStats, filters: &[&Filter], like_fallback: f64) -> f64 {
    let rows = rows_of(stats);
    let mut sel = 1.0;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let mut has_range = false;
    let int_col = stats.ty == ColumnType::Int64;
    for f in filters {
        match f.op {
            CmpOp::Eq => sel *= eq_selectivity(stats, &f.value),
            CmpOp::Like => sel *= like_selectivity(stats, f.value.as_str().unwrap_or(""), like_fallback),
            op => {
                let Some(x) = f.value.as_f64() else { continue };
                has_range = true;
                // continuity correction on integer columns
                let half = if int_col { 0.5 } else { 0.0 };
                match op {
                    CmpOp::Ge => lo = lo.max(x - half),
                    CmpOp::Gt => lo = lo.max(x + half),
                    CmpOp::Le => hi = hi.min(x + half),
                    CmpOp::Lt => hi = hi.min(x - half),
                    _ => unreachable!(),
                }
            }
        }
    }
    if has_range {
        let non_null = stats.non_null() as f64 / rows;
        let range = if hi < lo {
            0.0
        } else {
            let bounds: Vec<f64> = stats.histogram_bounds.iter().filter_map(Value::as_f64).collect();
            let upper = if hi.is_finite() { histogram_cdf(&bounds, hi) } else { 1.0 };
            let lower = if lo.is_finite() { histogram_cdf(&bounds, lo) } else { 0.0 };
            (upper - lower).max(0.0) * non_null
        };
        sel *= range.max(1.0 / rows);
    }
    sel.clamp(0.0, 1.0)
}

/// Where a query's statistics come from. Implemented by the catalog and by
/// prompts (which carry a subset of the statistics).
pub trait StatsSource {
    fn stats_for(&self, table: &str, column: &str) -> Option<&ColumnStats>;
    fn row_count(&self, table: &str) -> Option<f64>;
}

impl StatsSource for Catalog {
    fn stats_for(&self, table: &str, column: &str) -> Option<&ColumnStats> {
        self.stats.get(table).and_then(|m| m.get(column))
    }

    fn row_count(&self, table: &str) -> Option<f64> {
        self.stats
            .get(table)
            .and_then(|m| m.values().next())
            .map(|s| s.row_count as f64)
    }
}

/// Per-alias filter selectivities, keyed by alias, one entry per filtered
/// column in canonical order.
pub fn filter_selectivities<S: StatsSource + ?Sized>(
    src: &S,
    ast: &QueryAst,
    like_fallback: f64,
) -> Result<Vec<(String, f64)>> {
    let mut grouped: BTreeMap<(&str, &str), Vec<&Filter>> = BTreeMap::new();
    for f in &ast.filters {
        grouped.entry((&f.col.alias, &f.col.column)).or_default().push(f);
    }
    let mut out = Vec::new();
    for ((alias, column), fs) in grouped {
        let table = ast.table_of(alias).ok_or_else(|| Error::UnknownTable(alias.to_string()))?;
        let stats = src.stats_for(table, column).ok_or_else(|| Error::MissingStats {
            table: table.to_string(),
            column: column.to_string(),
        })?;
        out.push((alias.to_string(), column_selectivity(stats, &fs, like_fallback)));
    }
    Ok(out)
}

/// Attribute-independence estimate (the classical optimizer baseline):
/// table sizes times filter selectivities times `1/max(ndv)` per join
/// predicate, floored at 1. `COUNT(DISTINCT c)` is capped by `ndv(c)`.
pub fn estimate_independence<S: StatsSource + ?Sized>(src: &S, ast: &QueryAst) -> Result<Estimate> {
    estimate_independence_with(src, ast, DEFAULT_LIKE_SELECTIVITY)
}

pub fn estimate_independence_with<S: StatsSource + ?Sized>(src: &S, ast: &QueryAst, like_fallback: f64) -> Result<Estimate> {
    let stats = |alias: &str, column: &str| -> Result<&ColumnStats> {
        let table = ast.table_of(alias).ok_or_else(|| Error::UnknownTable(alias.to_string()))?;
        src.stats_for(table, column).ok_or_else(|| Error::MissingStats {
            table: table.to_string(),
            column: column.to_string(),
        })
    };
    let mut card = 1.0f64;
    for t in &ast.tables {
        card *= src.row_count(&t.table).ok_or_else(|| Error::MissingStats {
            table: t.table.clone(),
            column: "*".into(),
        })?;
    }
    for (_, s) in filter_selectivities(src, ast, like_fallback)? {
        card *= s;
    }
    for j in &ast.joins {
        let l = stats(&j.left.alias, &j.left.column)?.ndv;
        let r = stats(&j.right.alias, &j.right.column)?.ndv;
        card /= l.max(r).max(1) as f64;
    }
    if let Some(d) = &ast.distinct_on {
        card = card.min(stats(&d.alias, &d.column)?.ndv as f64);
    }
    Ok(Estimate::new(card.max(1.0), EstimateSource::PgIndependence))
}

fn bernoulli_sample(t: &TableData, rate: f64, rng: &mut ChaCha8Rng) -> TableData {
    let mut s = TableData {
        name: t.name.clone(),
        columns: t.columns.clone(),
        rows: Vec::new(),
        row_ids: Vec::new(),
        next_row_id: t.next_row_id,
    };
    for (row, id) in t.rows.iter().zip(&t.row_ids) {
        if rate >= 1.0 || rng.random::<f64>() < rate {
            s.rows.push(row.clone());
            s.row_ids.push(*id);
        }
    }
    s
}

/// Evaluates the query over independent Bernoulli samples (one per alias)
/// and scales the count by `1/rate` per alias. `COUNT(DISTINCT ..)` is
/// returned unscaled: the number of distinct values seen in the sample.
pub fn estimate_sampling(db: &Catalog, ast: &QueryAst, rate: f64, seed: u64) -> Result<Estimate> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidArgument(format!("sampling rate {rate} outside (0, 1]")));
    }
    let mut sampled = Catalog::new();
    let mut rewritten = ast.clone();
    for (i, tr) in ast.tables.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1)));
        let mut t = bernoulli_sample(db.table(&tr.table)?, rate, &mut rng);
        let name = format!("{}#{}", tr.table, i);
        t.name = name.clone();
        sampled.add_table(t)?;
        rewritten.tables[i] = TableRef {
            table: name,
            alias: tr.alias.clone(),
        };
    }
    let count = execute_count(&sampled, &rewritten)? as f64;
    let value = if ast.distinct_on.is_some() {
        count
    } else {
        count / libm::pow(rate, ast.tables.len() as f64)
    };
    Ok(Estimate::new(value, EstimateSource::Sampling))
}

/// The DISTINCT baseline: the NDV recorded in (possibly stale) statistics.
pub fn estimate_ndv_from_stats(stats: &ColumnStats) -> Estimate {
    Estimate::new((stats.ndv as f64).max(1.0), EstimateSource::NdvStats)
}
