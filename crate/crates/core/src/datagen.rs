//! Synthetic databases with skewed foreign keys and correlated columns.
//!
//! Tables `t0..t{n-1}` form a binary tree: table `i > 0` references table
//! `(i - 1) / 2` through `pid = id`. Every table has
//!
//! * `id`: row number, unique;
//! * `pid`: parent id drawn from a Zipf law (low ids are popular);
//! * `a`: small integer tied to the row's position (root) or to `pid`;
//! * `b`: float close to `10 a`, about 2% NULL;
//! * `tag`: short word, mostly a function of `a`.
//!
//! Skew and the `a`/`b`/`tag` correlations are what the independence
//! estimator gets wrong.

use alloc::format;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, Column, TableData, DEFAULT_BUCKETS, DEFAULT_MCV};
use crate::error::{Error, Result};
use crate::value::{ColumnType, Value};

pub const TAGS: [&str; 6] = ["red", "green", "blue", "gray", "pink", "teal"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub tables: usize,
    pub rows: usize,
    /// Zipf exponent of the foreign keys; 0 is uniform.
    pub zipf: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            tables: 3,
            rows: 1000,
            zipf: 1.1,
            seed: 0,
        }
    }
}

pub fn table_name(i: usize) -> alloc::string::String {
    format!("t{i}")
}

/// Builds the database and its statistics (default bucket and MCV sizes).
pub fn synthetic_db(cfg: &SyntheticConfig) -> Result<Catalog> {
    if cfg.tables == 0 || cfg.rows == 0 {
        return Err(Error::InvalidArgument("need at least one table and one row".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cat = Catalog::new();
    let mut sizes = Vec::with_capacity(cfg.tables);
    for i in 0..cfg.tables {
        // vary sizes a little so tables are distinguishable
        let n = cfg.rows * (4 + (i % 3)) / 4;
        sizes.push(n);
        let mut t = TableData::new(
            table_name(i),
            alloc::vec![
                Column::new("id", ColumnType::Int64),
                Column::new("pid", ColumnType::Int64),
                Column::new("a", ColumnType::Int64),
                Column::new("b", ColumnType::Float64),
                Column::new("tag", ColumnType::Text),
            ],
        )?;
        let parent_n = if i == 0 { n } else { sizes[(i - 1) / 2] };
        let weights: Vec<f64> = (0..parent_n).map(|k| 1.0 / libm::pow(k as f64 + 1.0, cfg.zipf)).collect();
        let zipf = WeightedIndex::new(&weights).map_err(|e| Error::InvalidArgument(format!("{e}")))?;
        for id in 0..n {
            let pid = zipf.sample(&mut rng) as i64;
            let a = if i == 0 {
                let r = id as f64 / n as f64;
                (10.0 * r * r) as i64
            } else {
                let base = (pid as f64 / parent_n as f64 * 10.0) as i64;
                (base + rng.random_range(0..=1i64)).min(9)
            };
            let b = if rng.random::<f64>() < 0.02 {
                Value::Null
            } else {
                Value::Float(libm::round((a as f64 * 10.0 + rng.random_range(0.0..10.0)) * 10.0) / 10.0)
            };
            let tag_idx = if rng.random::<f64>() < 0.85 {
                a as usize % TAGS.len()
            } else {
                rng.random_range(0..TAGS.len())
            };
            t.push_row(alloc::vec![
                Value::Int(id as i64),
                Value::Int(pid),
                Value::Int(a),
                b,
                Value::Text(TAGS[tag_idx].into()),
            ])?;
        }
        cat.add_table(t)?;
    }
    for i in 1..cfg.tables {
        cat.declare_join(&table_name((i - 1) / 2), "id", &table_name(i), "pid")?;
    }
    cat.build_all_stats(DEFAULT_BUCKETS, DEFAULT_MCV)?;
    Ok(cat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::estimate_independence;
    use crate::exec::execute_count;
    use crate::metrics::{median, qerror};
    use crate::sql::parse_query;

    #[test]
    fn shape_and_determinism() {
        let cfg = SyntheticConfig {
            tables: 6,
            rows: 200,
            ..SyntheticConfig::default()
        };
        let a = synthetic_db(&cfg).unwrap();
        assert_eq!(a, synthetic_db(&cfg).unwrap());
        assert_eq!(a.tables.len(), 6);
        assert_eq!(a.join_graph.len(), 5);
        assert_eq!(a.table("t0").unwrap().len(), 200);
        assert_eq!(a.table("t1").unwrap().len(), 250);
        for t in a.tables.values() {
            let parent = if t.name == "t0" { "t0".into() } else {
                let i: usize = t.name[1..].parse().unwrap();
                table_name((i - 1) / 2)
            };
            let pn = a.table(&parent).unwrap().len() as i64;
            assert!(t.rows.iter().all(|r| matches!(r[1], Value::Int(p) if (0..pn).contains(&p))));
        }
        assert_ne!(a, synthetic_db(&SyntheticConfig { seed: 1, ..cfg }).unwrap());
    }

    #[test]
    fn independence_is_off_on_correlated_filters() {
        let db = synthetic_db(&SyntheticConfig::default()).unwrap();
        let mut errs = Vec::new();
        for a in 0..8 {
            let q = parse_query(
                &format!("SELECT COUNT(*) FROM t0, t1 WHERE t0.id = t1.pid AND t0.a = {a} AND t0.b >= {}", a * 10),
                &db,
            )
            .unwrap();
            let truth = execute_count(&db, &q).unwrap() as f64;
            errs.push(qerror(estimate_independence(&db, &q).unwrap().value, truth));
        }
        assert!(median(&errs) > 2.0, "{errs:?}");
    }
}
