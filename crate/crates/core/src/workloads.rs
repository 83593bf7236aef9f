//! Deterministic workload generators: SPJ queries, join/filter shift splits,
//! interleaved write workloads, LIKE patterns and DISTINCT variants.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, TableData};
use crate::error::{Error, Result};
use crate::exec::{apply_write, execute_count};
use crate::sql::{CmpOp, ColRef, Filter, JoinPred, QueryAst, TableRef, WriteOp};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn tag(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        [Split::Train, Split::Validation, Split::Test].into_iter().find(|x| x.tag() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    Spj,
    Like,
    Distinct,
    Dynamic,
    JoinShift,
    FilterShift,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::Spj => "spj",
            Family::Like => "like",
            Family::Distinct => "distinct",
            Family::Dynamic => "dynamic",
            Family::JoinShift => "join-shift",
            Family::FilterShift => "filter-shift",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        [
            Family::Spj,
            Family::Like,
            Family::Distinct,
            Family::Dynamic,
            Family::JoinShift,
            Family::FilterShift,
        ]
        .into_iter()
        .find(|x| x.tag() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Statement {
    Query(QueryAst),
    Write(WriteOp),
}

impl Statement {
    pub fn query(&self) -> Option<&QueryAst> {
        match self {
            Statement::Query(q) => Some(q),
            Statement::Write(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadItem {
    pub statement: Statement,
    /// Set for queries: the count against the database state at this point.
    pub truth: Option<u64>,
    pub split: Split,
    /// Breakdown key, e.g. `high`/`low` frequency for LIKE patterns.
    pub tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub family: Family,
    pub seed: u64,
    pub params: BTreeMap<String, String>,
    /// For write workloads: row ids of each table kept in the initial state.
    pub initial_rows: Option<BTreeMap<String, Vec<u64>>>,
    pub items: Vec<WorkloadItem>,
}

impl Workload {
    pub fn queries(&self) -> impl Iterator<Item = (&QueryAst, &WorkloadItem)> {
        self.items.iter().filter_map(|i| i.statement.query().map(|q| (q, i)))
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = (&QueryAst, &WorkloadItem)> {
        self.queries().filter(move |(_, i)| i.split == split)
    }
}

fn query_item(q: QueryAst, truth: u64) -> WorkloadItem {
    WorkloadItem {
        statement: Statement::Query(q),
        truth: Some(truth),
        split: Split::Test,
        tag: None,
    }
}

fn params(kv: &[(&str, String)]) -> BTreeMap<String, String> {
    kv.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Random connected set of `k` tables grown edge by edge; returns the
/// tables (in growth order) and the edges used.
fn grow_subgraph(catalog: &Catalog, k: usize, rng: &mut ChaCha8Rng) -> Option<(Vec<String>, Vec<JoinPred>)> {
    let names: Vec<&String> = catalog.tables.keys().collect();
    for _ in 0..32 {
        let start = (*names.choose(rng)?).clone();
        let mut chosen = alloc::vec![start];
        let mut joins = Vec::new();
        while chosen.len() < k {
            let frontier: Vec<(&str, &str, &str, &str)> = catalog
                .join_graph
                .iter()
                .filter_map(|e| {
                    let l = chosen.contains(&e.left_table);
                    let r = chosen.contains(&e.right_table);
                    match (l, r) {
                        (true, false) => Some((&*e.left_table, &*e.left_column, &*e.right_table, &*e.right_column)),
                        (false, true) => Some((&*e.right_table, &*e.right_column, &*e.left_table, &*e.left_column)),
                        _ => None,
                    }
                })
                .collect();
            let Some(&(ft, fc, nt, nc)) = frontier.choose(rng) else { break };
            joins.push(JoinPred::new(ColRef::new(ft, fc), ColRef::new(nt, nc)));
            chosen.push(nt.to_string());
        }
        if chosen.len() == k {
            return Some((chosen, joins));
        }
    }
    None
}

fn random_value(t: &TableData, c: usize, rng: &mut ChaCha8Rng) -> Option<Value> {
    let vals: Vec<&Value> = t.rows.iter().map(|r| &r[c]).filter(|v| !matches!(v, Value::Null)).collect();
    vals.choose(rng).map(|v| (*v).clone())
}

/// Random filters on `y` distinct columns of the given tables: numeric
/// columns get `c >= l AND c <= u` with `l <= u` drawn from stored values,
/// others an equality on a stored value.
fn random_filters(catalog: &Catalog, tables: &[String], y: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Filter>> {
    let mut cols: Vec<(&str, usize)> = Vec::new();
    for t in tables {
        let td = catalog.table(t)?;
        cols.extend((0..td.columns.len()).map(|c| (t.as_str(), c)));
    }
    cols.shuffle(rng);
    let mut out = Vec::new();
    let mut used = 0;
    for (t, c) in cols {
        if used == y {
            break;
        }
        let td = catalog.table(t)?;
        let Some(v1) = random_value(td, c, rng) else { continue };
        let col = ColRef::new(t, td.columns[c].name.clone());
        if td.columns[c].ty.is_numeric() {
            let v2 = random_value(td, c, rng).unwrap_or_else(|| v1.clone());
            let (l, u) = if v1.total_cmp(&v2).is_le() { (v1, v2) } else { (v2, v1) };
            out.push(Filter::new(col.clone(), CmpOp::Ge, l));
            out.push(Filter::new(col, CmpOp::Le, u));
        } else {
            out.push(Filter::new(col, CmpOp::Eq, v1));
        }
        used += 1;
    }
    Ok(out)
}

/// `n` select-project-join queries: a connected join sub-graph of uniform
/// size in `1..=max_joins + 1` tables and a uniform number of filtered
/// columns in `0..=max_filters`; truths by exact counting.
pub fn gen_spj(catalog: &Catalog, n: usize, max_joins: usize, max_filters: usize, seed: u64) -> Result<Workload> {
    if catalog.tables.is_empty() {
        return Err(Error::Empty("catalog"));
    }
    if max_joins > 0 && catalog.join_graph.is_empty() {
        return Err(Error::InvalidArgument("joins requested but the join graph is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.random_range(1..=max_joins + 1);
        let (tables, joins) = grow_subgraph(catalog, k, &mut rng)
            .ok_or_else(|| Error::InvalidArgument(format!("no connected sub-graph with {k} tables")))?;
        let y = rng.random_range(0..=max_filters);
        let filters = random_filters(catalog, &tables, y, &mut rng)?;
        let mut q = QueryAst {
            tables: tables
                .iter()
                .map(|t| TableRef {
                    table: t.clone(),
                    alias: t.clone(),
                })
                .collect(),
            joins,
            filters,
            distinct_on: None,
        };
        q.validate(catalog)?;
        let truth = execute_count(catalog, &q)?;
        items.push(query_item(q, truth));
    }
    Ok(Workload {
        family: Family::Spj,
        seed,
        params: params(&[
            ("n", n.to_string()),
            ("max_joins", max_joins.to_string()),
            ("max_filters", max_filters.to_string()),
        ]),
        initial_rows: None,
        items,
    })
}

/// Marks roughly `train` and `validation` shares of the queries, the rest
/// test, by a seeded shuffle.
pub fn assign_splits(w: &mut Workload, train: f64, validation: f64, seed: u64) {
    let mut idx: Vec<usize> = (0..w.items.len()).filter(|&i| w.items[i].statement.query().is_some()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n = idx.len() as f64;
    let n_train = libm::round(n * train) as usize;
    let n_val = libm::round(n * validation) as usize;
    for (rank, i) in idx.into_iter().enumerate() {
        w.items[i].split = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Validation
        } else {
            Split::Test
        };
    }
}

fn split_by(w: &Workload, lo: usize, hi: usize, family: Family, key: impl Fn(&QueryAst) -> usize) -> (Workload, Workload) {
    let mut train = Workload {
        family,
        seed: w.seed,
        params: w.params.clone(),
        initial_rows: None,
        items: Vec::new(),
    };
    train.params.insert("lo".into(), lo.to_string());
    train.params.insert("hi".into(), hi.to_string());
    let mut test = train.clone();
    for (q, item) in w.queries() {
        let k = key(q);
        let mut it = item.clone();
        if k < lo {
            it.split = Split::Train;
            train.items.push(it);
        } else if k > hi {
            it.split = Split::Test;
            test.items.push(it);
        }
    }
    (train, test)
}

/// Train: fewer than `lo` joins. Test: more than `hi`. The rest is dropped.
pub fn split_by_joins(w: &Workload, lo: usize, hi: usize) -> (Workload, Workload) {
    split_by(w, lo, hi, Family::JoinShift, QueryAst::join_count)
}

/// Train: fewer than `lo` filtered columns. Test: more than `hi`.
pub fn split_by_filters(w: &Workload, lo: usize, hi: usize) -> (Workload, Workload) {
    split_by(w, lo, hi, Family::FilterShift, QueryAst::filter_count)
}

/// Splits `n` into parts proportional to `ratio` by largest remainder
/// (ties to the earlier part).
pub fn apportion(n: usize, ratio: &[u32]) -> Result<Vec<usize>> {
    let total: u64 = ratio.iter().map(|&r| r as u64).sum();
    if total == 0 {
        return Err(Error::InvalidArgument("ratio is all zeros".into()));
    }
    let mut parts: Vec<usize> = ratio.iter().map(|&r| (n as u64 * r as u64 / total) as usize).collect();
    let mut rem: Vec<(u64, usize)> = ratio
        .iter()
        .enumerate()
        .map(|(i, &r)| ((n as u64 * r as u64) % total, i))
        .collect();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = n - parts.iter().sum::<usize>();
    for &(_, i) in rem.iter().take(short) {
        parts[i] += 1;
    }
    Ok(parts)
}

/// Keeps only the rows whose ids are listed, per table. Statistics are
/// rebuilt on the kept rows with the catalog's current sizes.
pub fn restrict_rows(catalog: &Catalog, keep: &BTreeMap<String, Vec<u64>>, buckets: usize, k: usize) -> Result<Catalog> {
    let mut db = catalog.clone();
    for (name, ids) in keep {
        let t = db.table_mut(name)?;
        let ids: BTreeSet<u64> = ids.iter().copied().collect();
        let mut rows = Vec::new();
        let mut row_ids = Vec::new();
        for (r, id) in t.rows.iter().zip(&t.row_ids) {
            if ids.contains(id) {
                rows.push(r.clone());
                row_ids.push(*id);
            }
        }
        t.rows = rows;
        t.row_ids = row_ids;
    }
    db.build_all_stats(buckets, k)?;
    Ok(db)
}

/// The database a write workload starts from.
pub fn initial_state(catalog: &Catalog, w: &Workload, buckets: usize, k: usize) -> Result<Catalog> {
    match &w.initial_rows {
        Some(keep) => restrict_rows(catalog, keep, buckets, k),
        None => Ok(catalog.clone()),
    }
}

/// Starts from a uniformly chosen 2/3 of each table's rows and interleaves
/// `n_writes` writes (inserts of held-out rows, deletes and single-column
/// updates of existing rows, split by `ratio = (insert, delete, update)`)
/// with the base queries in random order. Truths follow the evolving state.
pub fn gen_dynamic(
    catalog: &Catalog,
    base: &[QueryAst],
    ratio: (u32, u32, u32),
    n_writes: usize,
    buckets: usize,
    k: usize,
    seed: u64,
) -> Result<Workload> {
    let counts = apportion(n_writes, &[ratio.0, ratio.1, ratio.2])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    let mut held_out: BTreeMap<String, Vec<Vec<Value>>> = BTreeMap::new();
    for (name, t) in &catalog.tables {
        let mut order: Vec<usize> = (0..t.len()).collect();
        order.shuffle(&mut rng);
        let n_keep = t.len() * 2 / 3;
        let mut kept: Vec<u64> = order[..n_keep].iter().map(|&i| t.row_ids[i]).collect();
        kept.sort_unstable();
        keep.insert(name.clone(), kept);
        held_out.insert(name.clone(), order[n_keep..].iter().map(|&i| t.rows[i].clone()).collect());
    }
    let mut db = restrict_rows(catalog, &keep, buckets, k)?;

    #[derive(Clone, Copy)]
    enum Slot {
        Query(usize),
        Insert,
        Delete,
        Update,
    }
    let mut slots: Vec<Slot> = (0..base.len()).map(Slot::Query).collect();
    slots.extend(core::iter::repeat_n(Slot::Insert, counts[0]));
    slots.extend(core::iter::repeat_n(Slot::Delete, counts[1]));
    slots.extend(core::iter::repeat_n(Slot::Update, counts[2]));
    slots.shuffle(&mut rng);

    let names: Vec<String> = catalog.tables.keys().cloned().collect();
    let mut items = Vec::with_capacity(slots.len());
    for slot in slots {
        let op = match slot {
            Slot::Query(i) => {
                let mut q = base[i].clone();
                q.validate(&db)?;
                let truth = execute_count(&db, &q)?;
                items.push(query_item(q, truth));
                continue;
            }
            Slot::Insert => {
                let table = names.choose(&mut rng).expect("non-empty catalog").clone();
                let pool = held_out.get_mut(&table).expect("pool per table");
                let row = if pool.is_empty() {
                    // held-out rows used up: re-insert a copy of an original row
                    let t = catalog.table(&table)?;
                    t.rows.choose(&mut rng).ok_or(Error::Empty("table"))?.clone()
                } else {
                    let i = rng.random_range(0..pool.len());
                    pool.swap_remove(i)
                };
                WriteOp::Insert { table, row }
            }
            Slot::Delete | Slot::Update => {
                let live: Vec<&String> = names.iter().filter(|n| !db.tables[*n].is_empty()).collect();
                let table = (*live.choose(&mut rng).ok_or(Error::Empty("database"))?).clone();
                let t = db.table(&table)?;
                let row_id = *t.row_ids.choose(&mut rng).expect("non-empty table");
                if let Slot::Delete = slot {
                    WriteOp::Delete { table, row_id }
                } else {
                    let c = rng.random_range(0..t.columns.len());
                    let column = t.columns[c].name.clone();
                    let value = random_value(catalog.table(&table)?, c, &mut rng).unwrap_or(Value::Null);
                    WriteOp::Update {
                        table,
                        row_id,
                        column,
                        value,
                    }
                }
            }
        };
        apply_write(&mut db, &op)?;
        items.push(WorkloadItem {
            statement: Statement::Write(op),
            truth: None,
            split: Split::Test,
            tag: None,
        });
    }
    Ok(Workload {
        family: Family::Dynamic,
        seed,
        params: params(&[
            ("ratio", format!("{}:{}:{}", ratio.0, ratio.1, ratio.2)),
            ("writes", n_writes.to_string()),
            ("queries", base.len().to_string()),
        ]),
        initial_rows: Some(keep),
        items,
    })
}

/// Re-executes a write workload from its initial state and returns the
/// count of every query in order.
pub fn replay_truths(catalog: &Catalog, w: &Workload, buckets: usize, k: usize) -> Result<Vec<u64>> {
    let mut db = initial_state(catalog, w, buckets, k)?;
    let mut out = Vec::new();
    for item in &w.items {
        match &item.statement {
            Statement::Query(q) => out.push(execute_count(&db, q)?),
            Statement::Write(op) => apply_write(&mut db, op)?,
        }
    }
    Ok(out)
}

/// Patterns of one string in enumeration order: substrings `p` of at least
/// two characters by start, then length, each in the forms `p%`, `%p`, `%p%` that
/// match the string itself (`p%` only for prefixes, `%p` only for
/// suffixes). Substrings holding wildcard characters are skipped.
pub fn like_patterns(s: &str) -> Vec<String> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    for start in 0..chars.len() {
        for len in 2..=chars.len() - start {
            let p: String = chars[start..start + len].iter().collect();
            if p.contains(['%', '_']) {
                continue;
            }
            if start == 0 {
                out.push(format!("{p}%"));
            }
            if start + len == chars.len() {
                out.push(format!("%{p}"));
            }
            out.push(format!("%{p}%"));
        }
    }
    out
}

/// Up to `n` distinct LIKE patterns taken from randomly picked stored
/// strings of `table.column`, each as a single-table count query. Patterns
/// matching one of the column's top-5 most common values are tagged
/// `high`, the rest `low`.
pub fn gen_like(catalog: &Catalog, table: &str, column: &str, n: usize, seed: u64) -> Result<Workload> {
    let t = catalog.table(table)?;
    let (c, col) = t.column(column)?;
    if col.ty.is_numeric() {
        return Err(Error::TypeMismatch(format!("LIKE on numeric column {table}.{column}")));
    }
    let mut strings: Vec<&str> = t.rows.iter().filter_map(|r| r[c].as_str()).collect();
    strings.sort_unstable();
    strings.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    strings.shuffle(&mut rng);
    let top: Vec<String> = catalog
        .column_stats(table, column)
        .map(|s| s.mcv.iter().take(5).filter_map(|(v, _)| v.as_str().map(String::from)).collect())
        .unwrap_or_default();
    let mut seen = BTreeSet::new();
    let mut items = Vec::new();
    'outer: for s in strings {
        for p in like_patterns(s) {
            if items.len() == n {
                break 'outer;
            }
            if !seen.insert(p.clone()) {
                continue;
            }
            let high = top.iter().any(|m| crate::sql::like_match(&p, m));
            let mut q = QueryAst::single(table);
            q.filters.push(Filter::new(ColRef::new(table, column), CmpOp::Like, Value::Text(p)));
            q.validate(catalog)?;
            let truth = execute_count(catalog, &q)?;
            let mut item = query_item(q, truth);
            item.tag = Some(if high { "high" } else { "low" }.into());
            items.push(item);
        }
    }
    Ok(Workload {
        family: Family::Like,
        seed,
        params: params(&[("table", table.into()), ("column", column.into()), ("n", n.to_string())]),
        initial_rows: None,
        items,
    })
}

/// Every query of `base` with `COUNT(DISTINCT c)` on a uniformly chosen
/// column `c` of its tables; truths recomputed.
pub fn gen_distinct(catalog: &Catalog, base: &Workload, seed: u64) -> Result<Workload> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::new();
    for (q, item) in base.queries() {
        let mut cols = Vec::new();
        for t in &q.tables {
            for c in &catalog.table(&t.table)?.columns {
                cols.push(ColRef::new(t.alias.clone(), c.name.clone()));
            }
        }
        let mut d = q.clone();
        d.distinct_on = Some(cols.choose(&mut rng).ok_or(Error::Empty("column list"))?.clone());
        d.validate(catalog)?;
        let truth = execute_count(catalog, &d)?;
        items.push(WorkloadItem {
            statement: Statement::Query(d),
            truth: Some(truth),
            split: item.split,
            tag: item.tag.clone(),
        });
    }
    let mut p = base.params.clone();
    p.insert("base_family".into(), base.family.tag().into());
    p.insert("base_seed".into(), base.seed.to_string());
    Ok(Workload {
        family: Family::Distinct,
        seed,
        params: p,
        initial_rows: None,
        items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Column, DEFAULT_BUCKETS, DEFAULT_MCV};
    use crate::datagen::{synthetic_db, SyntheticConfig};
    use crate::value::ColumnType;
    use proptest::prelude::*;

    fn db(tables: usize, rows: usize) -> Catalog {
        synthetic_db(&SyntheticConfig {
            tables,
            rows,
            seed: 5,
            ..SyntheticConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn spj_shapes_and_determinism() {
        let c = db(3, 60);
        let single = gen_spj(&c, 50, 0, 3, 1).unwrap();
        assert!(single.queries().all(|(q, _)| q.tables.len() == 1));
        let a = gen_spj(&c, 100, 2, 4, 7).unwrap();
        assert_eq!(a, gen_spj(&c, 100, 2, 4, 7).unwrap());
        assert_ne!(a, gen_spj(&c, 100, 2, 4, 8).unwrap());
        let sizes: BTreeSet<usize> = a.queries().map(|(q, _)| q.tables.len()).collect();
        assert_eq!(sizes, [1, 2, 3].into_iter().collect());
        for (q, item) in a.queries() {
            assert!(q.is_connected());
            assert!(q.filter_count() <= 4);
            assert_eq!(item.truth, Some(execute_count(&c, q).unwrap()));
        }
    }

    #[test]
    fn spj_constants_come_from_the_data() {
        let c = db(3, 60);
        let w = gen_spj(&c, 200, 2, 5, 3).unwrap();
        for (q, _) in w.queries() {
            let mut ranges: BTreeMap<&ColRef, (Option<&Value>, Option<&Value>)> = BTreeMap::new();
            for f in &q.filters {
                let t = c.table(q.table_of(&f.col.alias).unwrap()).unwrap();
                let (ci, _) = t.column(&f.col.column).unwrap();
                let s = c.column_stats(&t.name, &f.col.column).unwrap();
                match f.op {
                    CmpOp::Eq => assert!(t.rows.iter().any(|r| r[ci].sql_eq(&f.value))),
                    CmpOp::Ge | CmpOp::Le => {
                        let x = f.value.as_f64().unwrap();
                        assert!(s.min.as_f64().unwrap() <= x && x <= s.max.as_f64().unwrap());
                        let e = ranges.entry(&f.col).or_default();
                        if f.op == CmpOp::Ge {
                            e.0 = Some(&f.value);
                        } else {
                            e.1 = Some(&f.value);
                        }
                    }
                    other => panic!("unexpected operator {other:?}"),
                }
            }
            for (l, u) in ranges.values() {
                assert!(l.unwrap().as_f64().unwrap() <= u.unwrap().as_f64().unwrap());
            }
        }
    }

    #[test]
    fn spj_errors() {
        let mut c = db(3, 20);
        c.join_graph.clear();
        assert!(gen_spj(&c, 5, 1, 2, 0).is_err());
        assert!(gen_spj(&c, 5, 0, 2, 0).is_ok());
    }

    #[test]
    fn shift_splits() {
        let c = db(6, 30);
        let w = gen_spj(&c, 400, 5, 6, 2).unwrap();
        let (train, test) = split_by_joins(&w, 3, 3);
        assert!(train.queries().all(|(q, i)| q.join_count() < 3 && i.split == Split::Train));
        assert!(test.queries().all(|(q, i)| q.join_count() > 3 && i.split == Split::Test));
        let boundary = w.queries().filter(|(q, _)| q.join_count() == 3).count();
        assert_eq!(train.items.len() + test.items.len(), w.items.len() - boundary);
        let (ft, fs) = split_by_filters(&w, 4, 4);
        assert!(ft.queries().all(|(q, _)| q.filter_count() < 4));
        assert!(fs.queries().all(|(q, _)| q.filter_count() > 4));

        let one_join = Workload {
            items: w.items.iter().filter(|i| i.statement.query().unwrap().join_count() == 1).cloned().collect(),
            ..w.clone()
        };
        assert!(split_by_joins(&one_join, 3, 3).1.items.is_empty());
    }

    #[test]
    fn apportions() {
        assert_eq!(apportion(200, &[2, 1, 1]).unwrap(), [100, 50, 50]);
        assert_eq!(apportion(200, &[1, 1, 2]).unwrap(), [50, 50, 100]);
        assert_eq!(apportion(10, &[1, 1, 1]).unwrap(), [4, 3, 3]);
        assert!(apportion(10, &[0, 0, 0]).is_err());
    }

    #[test]
    fn dynamic_workload() {
        let c = db(3, 60);
        let base: Vec<QueryAst> = gen_spj(&c, 40, 2, 3, 9).unwrap().queries().map(|(q, _)| q.clone()).collect();
        let w = gen_dynamic(&c, &base, (2, 1, 1), 200, DEFAULT_BUCKETS, DEFAULT_MCV, 4).unwrap();
        let kinds = |w: &Workload, k: &str| w.items.iter().filter(|i| matches!(&i.statement, Statement::Write(op) if op.kind() == k)).count();
        assert_eq!((kinds(&w, "insert"), kinds(&w, "delete"), kinds(&w, "update")), (100, 50, 50));
        assert_eq!(w.queries().count(), 40);
        let truths: Vec<u64> = w.queries().map(|(_, i)| i.truth.unwrap()).collect();
        assert_eq!(replay_truths(&c, &w, DEFAULT_BUCKETS, DEFAULT_MCV).unwrap(), truths);
        assert_eq!(w, gen_dynamic(&c, &base, (2, 1, 1), 200, DEFAULT_BUCKETS, DEFAULT_MCV, 4).unwrap());
        let init = initial_state(&c, &w, DEFAULT_BUCKETS, DEFAULT_MCV).unwrap();
        assert_eq!(init.table("t0").unwrap().len(), 40);

        let u = gen_dynamic(&c, &base, (1, 1, 2), 200, DEFAULT_BUCKETS, DEFAULT_MCV, 4).unwrap();
        assert_eq!((kinds(&u, "insert"), kinds(&u, "delete"), kinds(&u, "update")), (50, 50, 100));

        let none = gen_dynamic(&c, &base, (1, 1, 1), 0, DEFAULT_BUCKETS, DEFAULT_MCV, 4).unwrap();
        assert!(none.items.iter().all(|i| i.statement.query().is_some()));
        let mut got: Vec<String> = none.queries().map(|(q, _)| q.render()).collect();
        let mut want: Vec<String> = base.iter().map(|q| q.render()).collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
        assert!(gen_dynamic(&c, &base, (0, 0, 0), 10, DEFAULT_BUCKETS, DEFAULT_MCV, 4).is_err());
    }

    fn smith() -> Catalog {
        let mut c = Catalog::new();
        let mut t = TableData::new("p", alloc::vec![Column::new("name", ColumnType::Text)]).unwrap();
        t.push_row(alloc::vec![Value::Text("smith".into())]).unwrap();
        c.add_table(t).unwrap();
        c.build_all_stats(DEFAULT_BUCKETS, DEFAULT_MCV).unwrap();
        c
    }

    #[test]
    fn like_enumeration() {
        let c = smith();
        let w = gen_like(&c, "p", "name", 3, 0).unwrap();
        let pats: Vec<String> = w
            .queries()
            .map(|(q, _)| q.filters[0].value.as_str().unwrap().to_string())
            .collect();
        assert_eq!(pats, ["sm%", "%sm%", "smi%"]);
        assert!(w.queries().all(|(_, i)| i.truth == Some(1) && i.tag.as_deref() == Some("high")));
        // 10 substrings of length >= 2 as %p%, 4 prefixes, 4 suffixes
        assert_eq!(gen_like(&c, "p", "name", 1000, 0).unwrap().items.len(), 18);
        assert_eq!(like_patterns("ab"), ["ab%", "%ab", "%ab%"]);
        assert_eq!(like_patterns("abc"), ["ab%", "%ab%", "abc%", "%abc", "%abc%", "%bc", "%bc%"]);
    }

    #[test]
    fn like_tags_and_truths() {
        let c = db(3, 100);
        let w = gen_like(&c, "t0", "tag", 40, 1).unwrap();
        assert_eq!(w.items.len(), 40);
        assert!(w.queries().all(|(_, i)| i.truth.unwrap() >= 1));
        let distinct: BTreeSet<String> = w.queries().map(|(q, _)| q.render()).collect();
        assert_eq!(distinct.len(), 40);
        assert!(gen_like(&c, "t0", "a", 5, 1).is_err());
    }

    #[test]
    fn distinct_variants() {
        let c = db(3, 60);
        let base = gen_spj(&c, 60, 2, 3, 11).unwrap();
        let d = gen_distinct(&c, &base, 2).unwrap();
        assert_eq!(d.items.len(), base.items.len());
        assert_eq!(d, gen_distinct(&c, &base, 2).unwrap());
        for ((q, i), (_, b)) in d.queries().zip(base.queries()) {
            assert!(q.distinct_on.is_some());
            assert!(i.truth.unwrap() <= b.truth.unwrap());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn splits_never_leak(seed in any::<u64>(), lo in 0usize..5, width in 0usize..3) {
            let c = db(6, 20);
            let w = gen_spj(&c, 60, 5, 8, seed).unwrap();
            let hi = lo + width;
            let (train, test) = split_by_joins(&w, lo, hi);
            prop_assert!(train.queries().all(|(q, _)| q.join_count() < lo));
            prop_assert!(test.queries().all(|(q, _)| q.join_count() > hi));
            let boundary = w.queries().filter(|(q, _)| (lo..=hi).contains(&q.join_count())).count();
            prop_assert_eq!(train.items.len() + test.items.len() + boundary, w.items.len());
            let (train, test) = split_by_filters(&w, lo, hi);
            prop_assert!(train.queries().all(|(q, _)| q.filter_count() < lo));
            prop_assert!(test.queries().all(|(q, _)| q.filter_count() > hi));
        }
    }
}
