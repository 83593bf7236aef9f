//! Tables, coarse single-column statistics and the join schema graph.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::value::{ColumnType, Value};

/// Default number of equi-depth histogram buckets.
pub const DEFAULT_BUCKETS: usize = 10;
/// Default length of the most-common-values list.
pub const DEFAULT_MCV: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub ty: ColumnType,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Column {
            name: name.into(),
            ty,
        }
    }
}

/// A stored table. Every row carries a stable ordinal (`row_ids`) assigned on
/// insertion, which write statements use as their row selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableData {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
    pub row_ids: Vec<u64>,
    pub next_row_id: u64,
}

impl TableData {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
        }
        Ok(TableData {
            name: name.into(),
            columns,
            rows: Vec::new(),
            row_ids: Vec::new(),
            next_row_id: 0,
        })
    }

    /// Appends a row and returns its ordinal.
    pub fn push_row(&mut self, row: Vec<Value>) -> Result<u64> {
        if row.len() != self.columns.len() {
            return Err(Error::RowArity {
                table: self.name.clone(),
                expected: self.columns.len(),
                got: row.len(),
            });
        }
        for (v, c) in row.iter().zip(&self.columns) {
            if !v.fits(c.ty) {
                return Err(Error::TypeMismatch(alloc::format!(
                    "value {v} in {}.{} ({})",
                    self.name,
                    c.name,
                    c.ty.name()
                )));
            }
        }
        let id = self.next_row_id;
        self.next_row_id += 1;
        self.rows.push(row);
        self.row_ids.push(id);
        Ok(id)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Result<(usize, &Column)> {
        self.columns
            .iter()
            .enumerate()
            .find(|(_, c)| c.name == name)
            .ok_or_else(|| Error::UnknownColumn {
                table: self.name.clone(),
                column: name.to_string(),
            })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Position of the row with ordinal `row_id`.
    pub fn position_of(&self, row_id: u64) -> Option<usize> {
        self.row_ids.iter().position(|&r| r == row_id)
    }
}

/// Coarse single-column statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub ty: ColumnType,
    /// Rows in the table when the statistics were built (nulls included).
    pub row_count: u64,
    pub min: Value,
    pub max: Value,
    pub ndv: u64,
    pub null_count: u64,
    /// `(value, count)` sorted by count descending, ties by ascending value.
    pub mcv: Vec<(Value, u64)>,
    /// `B + 1` equi-depth boundaries; empty for text or all-null columns.
    pub histogram_bounds: Vec<Value>,
}

impl ColumnStats {
    pub fn non_null(&self) -> u64 {
        self.row_count - self.null_count
    }

    pub fn mcv_total(&self) -> u64 {
        self.mcv.iter().map(|(_, c)| c).sum()
    }
}

/// Builds statistics for `column` with `buckets` histogram buckets and `k`
/// most common values.
///
/// Bucket `i` of the histogram covers sorted positions
/// `[floor(i*n/B), floor((i+1)*n/B))`, so every bucket holds `floor(n/B)` or
/// `ceil(n/B)` values. `bounds[0]` is the minimum and `bounds[i]` the last
/// value of bucket `i - 1`.
pub fn build_stats(table: &TableData, column: &str, buckets: usize, k: usize) -> Result<ColumnStats> {
    if buckets == 0 {
        return Err(Error::InvalidArgument("histogram bucket count must be >= 1".into()));
    }
    let (idx, col) = table.column(column)?;
    let mut values: Vec<&Value> = table.rows.iter().map(|r| &r[idx]).filter(|v| !v.is_null()).collect();
    let null_count = (table.len() - values.len()) as u64;
    values.sort_by(|a, b| a.total_cmp(b));

    // distinct runs in ascending value order
    let mut runs: Vec<(&Value, u64)> = Vec::new();
    for v in &values {
        match runs.last_mut() {
            Some((last, n)) if last.total_cmp(v) == Ordering::Equal => *n += 1,
            _ => runs.push((v, 1)),
        }
    }
    let ndv = runs.len() as u64;
    let mut by_freq = runs.clone();
    by_freq.sort_by(|a, b| b.1.cmp(&a.1));
    let mcv = by_freq.into_iter().take(k).map(|(v, n)| (v.clone(), n)).collect();

    let n = values.len();
    let histogram_bounds = if col.ty.is_numeric() && n > 0 {
        let mut bounds = Vec::with_capacity(buckets + 1);
        bounds.push(values[0].clone());
        for i in 1..=buckets {
            let end = i * n / buckets;
            bounds.push(values[end.max(1) - 1].clone());
        }
        bounds
    } else {
        Vec::new()
    };

    Ok(ColumnStats {
        ty: col.ty,
        row_count: table.len() as u64,
        min: values.first().map(|v| (*v).clone()).unwrap_or(Value::Null),
        max: values.last().map(|v| (*v).clone()).unwrap_or(Value::Null),
        ndv,
        null_count,
        mcv,
        histogram_bounds,
    })
}

/// A declared equi-joinable column pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JoinEdge {
    pub left_table: String,
    pub left_column: String,
    pub right_table: String,
    pub right_column: String,
}

impl JoinEdge {
    pub fn touches(&self, table: &str) -> bool {
        self.left_table == table || self.right_table == table
    }

    /// The column on `table`'s side and the opposite `(table, column)`.
    pub fn oriented(&self, table: &str) -> Option<(&str, &str, &str)> {
        if self.left_table == table {
            Some((&self.left_column, &self.right_table, &self.right_column))
        } else if self.right_table == table {
            Some((&self.right_column, &self.left_table, &self.left_column))
        } else {
            None
        }
    }
}

/// Tables, their statistics and the join schema graph.
///
/// Statistics are only rebuilt on request, so after writes they describe an
/// older state of the data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub tables: BTreeMap<String, TableData>,
    pub stats: BTreeMap<String, BTreeMap<String, ColumnStats>>,
    pub join_graph: Vec<JoinEdge>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_table(&mut self, table: TableData) -> Result<()> {
        if self.tables.contains_key(&table.name) {
            return Err(Error::DuplicateTable(table.name));
        }
        self.tables.insert(table.name.clone(), table);
        Ok(())
    }

    pub fn table(&self, name: &str) -> Result<&TableData> {
        self.tables.get(name).ok_or_else(|| Error::UnknownTable(name.to_string()))
    }

    pub fn table_mut(&mut self, name: &str) -> Result<&mut TableData> {
        self.tables.get_mut(name).ok_or_else(|| Error::UnknownTable(name.to_string()))
    }

    pub fn column_type(&self, table: &str, column: &str) -> Result<ColumnType> {
        Ok(self.table(table)?.column(column)?.1.ty)
    }

    /// Declares `left_table.left_column = right_table.right_column` as joinable.
    pub fn declare_join(&mut self, left_table: &str, left_column: &str, right_table: &str, right_column: &str) -> Result<()> {
        let lt = self.column_type(left_table, left_column)?;
        let rt = self.column_type(right_table, right_column)?;
        if lt != rt {
            return Err(Error::TypeMismatch(alloc::format!(
                "join {left_table}.{left_column} ({}) = {right_table}.{right_column} ({})",
                lt.name(),
                rt.name()
            )));
        }
        let edge = JoinEdge {
            left_table: left_table.to_string(),
            left_column: left_column.to_string(),
            right_table: right_table.to_string(),
            right_column: right_column.to_string(),
        };
        if !self.join_graph.contains(&edge) {
            self.join_graph.push(edge);
        }
        Ok(())
    }

    /// Join edges incident to `table`.
    pub fn edges_of<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a JoinEdge> + 'a {
        self.join_graph.iter().filter(move |e| e.touches(table))
    }

    /// (Re)builds statistics for every column of every table.
    pub fn build_all_stats(&mut self, buckets: usize, k: usize) -> Result<()> {
        let mut all = BTreeMap::new();
        for (name, t) in &self.tables {
            let mut per = BTreeMap::new();
            for c in &t.columns {
                per.insert(c.name.clone(), build_stats(t, &c.name, buckets, k)?);
            }
            all.insert(name.clone(), per);
        }
        self.stats = all;
        Ok(())
    }

    pub fn column_stats(&self, table: &str, column: &str) -> Result<&ColumnStats> {
        self.stats
            .get(table)
            .and_then(|m| m.get(column))
            .ok_or_else(|| Error::MissingStats {
                table: table.to_string(),
                column: column.to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn int_table(vals: &[Option<i64>]) -> TableData {
        let mut t = TableData::new("t", vec![Column::new("a", ColumnType::Int64)]).unwrap();
        for v in vals {
            t.push_row(vec![v.map(Value::Int).unwrap_or(Value::Null)]).unwrap();
        }
        t
    }

    #[test]
    fn small_skewed_column() {
        let t = int_table(&[Some(1), Some(2), Some(2), Some(3), Some(3), Some(3)]);
        let s = build_stats(&t, "a", 3, 2).unwrap();
        assert_eq!(s.ndv, 3);
        assert_eq!(s.mcv, vec![(Value::Int(3), 3), (Value::Int(2), 2)]);
        assert_eq!(s.histogram_bounds, vec![Value::Int(1), Value::Int(2), Value::Int(3), Value::Int(3)]);
    }

    #[test]
    fn constant_column() {
        let t = int_table(&[Some(5); 4]);
        let s = build_stats(&t, "a", 2, 1).unwrap();
        assert_eq!(s.ndv, 1);
        assert_eq!(s.mcv, vec![(Value::Int(5), 4)]);
        assert_eq!(s.histogram_bounds, vec![Value::Int(5); 3]);
    }

    #[test]
    fn text_column_has_no_histogram() {
        let mut t = TableData::new("t", vec![Column::new("s", ColumnType::Text)]).unwrap();
        for s in ["a", "b", "a"] {
            t.push_row(vec![Value::Text(s.into())]).unwrap();
        }
        let s = build_stats(&t, "s", 10, 1).unwrap();
        assert_eq!(s.ndv, 2);
        assert_eq!(s.mcv, vec![(Value::Text("a".into()), 2)]);
        assert!(s.histogram_bounds.is_empty());
    }

    #[test]
    fn all_null_column_is_a_signal() {
        let t = int_table(&[None, None]);
        let s = build_stats(&t, "a", 4, 3).unwrap();
        assert_eq!((s.ndv, s.null_count), (0, 2));
        assert!(s.mcv.is_empty() && s.histogram_bounds.is_empty());
        assert_eq!(s.min, Value::Null);
    }

    #[test]
    fn mcv_ties_break_by_value() {
        let t = int_table(&[Some(9), Some(4), Some(9), Some(4), Some(1)]);
        let s = build_stats(&t, "a", 1, 3).unwrap();
        assert_eq!(s.mcv, vec![(Value::Int(4), 2), (Value::Int(9), 2), (Value::Int(1), 1)]);
    }

    #[test]
    fn rejects_bad_arguments() {
        let t = int_table(&[Some(1)]);
        assert!(matches!(build_stats(&t, "a", 0, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_stats(&t, "zz", 1, 1), Err(Error::UnknownColumn { .. })));
        let dup = TableData::new("t", vec![Column::new("a", ColumnType::Int64), Column::new("a", ColumnType::Text)]);
        assert_eq!(dup, Err(Error::DuplicateColumn("a".into())));
    }

    #[test]
    fn join_edges_must_match_types() {
        let mut c = Catalog::new();
        c.add_table(int_table(&[Some(1)])).unwrap();
        let mut u = TableData::new("u", vec![Column::new("s", ColumnType::Text), Column::new("a", ColumnType::Int64)]).unwrap();
        u.push_row(vec![Value::Text("x".into()), Value::Int(1)]).unwrap();
        c.add_table(u).unwrap();
        assert!(c.declare_join("t", "a", "u", "s").is_err());
        c.declare_join("t", "a", "u", "a").unwrap();
        assert_eq!(c.edges_of("u").count(), 1);
        assert!(matches!(c.add_table(int_table(&[])), Err(Error::DuplicateTable(_))));
    }

    proptest! {
        #[test]
        fn stats_invariants(vals in proptest::collection::vec(proptest::option::weighted(0.9, -20i64..20), 0..300),
                            buckets in 1usize..16, k in 0usize..8) {
            let t = int_table(&vals);
            let s = build_stats(&t, "a", buckets, k).unwrap();
            let non_null: Vec<i64> = vals.iter().flatten().copied().collect();
            let n = non_null.len();

            // brute-force frequency multiset
            let mut freq: BTreeMap<i64, u64> = BTreeMap::new();
            for v in &non_null { *freq.entry(*v).or_default() += 1; }
            prop_assert_eq!(s.ndv as usize, freq.len());
            prop_assert_eq!(s.null_count as usize, vals.len() - n);
            let mut top: Vec<(i64, u64)> = freq.iter().map(|(v, c)| (*v, *c)).collect();
            top.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            top.truncate(k);
            let got: Vec<(i64, u64)> = s.mcv.iter().map(|(v, c)| (match v { Value::Int(i) => *i, _ => unreachable!() }, *c)).collect();
            prop_assert_eq!(got, top);
            prop_assert!(s.mcv_total() <= s.row_count);
            prop_assert!(s.ndv as usize >= s.mcv.len());

            if n == 0 {
                prop_assert!(s.histogram_bounds.is_empty());
            } else {
                let b = &s.histogram_bounds;
                prop_assert_eq!(b.len(), buckets + 1);
                prop_assert!(b.windows(2).all(|w| w[0].total_cmp(&w[1]) != Ordering::Greater));
                prop_assert_eq!(&b[0], &s.min);
                prop_assert!(b[buckets].total_cmp(&s.max) != Ordering::Greater);
                // each boundary covers at least the positions its bucket ends at
                let mut sorted = non_null.clone();
                sorted.sort();
                let mut occupancy = 0;
                for i in 1..=buckets {
                    let end = i * n / buckets;
                    let start = (i - 1) * n / buckets;
                    occupancy += end - start;
                    let bound = match &b[i] { Value::Int(x) => *x, _ => unreachable!() };
                    prop_assert!(sorted.iter().filter(|v| **v <= bound).count() >= end);
                }
                prop_assert_eq!(occupancy, n);
            }
            prop_assert_eq!(build_stats(&t, "a", buckets, k).unwrap(), s);
        }
    }
}
