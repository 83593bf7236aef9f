//! Exact cardinalities: the ground-truth labels of every workload.
//!
//! Bag semantics, nulls never satisfy a predicate and never join. Tree-shaped
//! join graphs are counted by passing per-key weight messages towards a root
//! (no join result is materialized); cyclic graphs fall back to hash joins
//! over materialized row-index tuples. A nested-loop evaluator over the full
//! cross product is kept as an independent check for small databases.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::{HashMap, HashSet};

use crate::catalog::{Catalog, TableData};
use crate::error::{Error, Result};
use crate::sql::{ColRef, QueryAst, WriteOp};
use crate::value::{Key, Value};

struct Bound<'a> {
    table: &'a TableData,
    /// Positions of rows passing this alias's filters.
    rows: Vec<usize>,
}

fn col_index(ast: &QueryAst, db: &Catalog, c: &ColRef) -> Result<(usize, usize)> {
    let a = ast.alias_index(&c.alias).ok_or_else(|| Error::UnknownTable(c.alias.clone()))?;
    let t = db.table(&ast.tables[a].table)?;
    Ok((a, t.column(&c.column)?.0))
}

fn bind<'a>(db: &'a Catalog, ast: &QueryAst) -> Result<Vec<Bound<'a>>> {
    let mut out = Vec::with_capacity(ast.tables.len());
    for tr in &ast.tables {
        let table = db.table(&tr.table)?;
        let mut preds = Vec::new();
        for f in ast.filters.iter().filter(|f| f.col.alias == tr.alias) {
            preds.push((table.column(&f.col.column)?.0, f));
        }
        let rows = (0..table.len())
            .filter(|&r| preds.iter().all(|(c, f)| f.matches(&table.rows[r][*c])))
            .collect();
        out.push(Bound { table, rows });
    }
    Ok(out)
}

/// Join predicates grouped per unordered alias pair, as column-index pairs
/// oriented `(lower alias, higher alias)`.
type EdgeCols = Vec<(usize, usize)>;

fn grouped_edges(db: &Catalog, ast: &QueryAst) -> Result<HashMap<(usize, usize), EdgeCols>> {
    let mut edges: HashMap<(usize, usize), EdgeCols> = HashMap::new();
    for j in &ast.joins {
        let (a, ca) = col_index(ast, db, &j.left)?;
        let (b, cb) = col_index(ast, db, &j.right)?;
        let (key, cols) = if a <= b { ((a, b), (ca, cb)) } else { ((b, a), (cb, ca)) };
        edges.entry(key).or_default().push(cols);
    }
    Ok(edges)
}

fn row_key(t: &TableData, r: usize, cols: impl Iterator<Item = usize>) -> Option<Vec<Key>> {
    cols.map(|c| Key::of(&t.rows[r][c])).collect()
}

/// Exact `COUNT(*)` or `COUNT(DISTINCT col)` of `ast` over the tables of `db`.
pub fn execute_count(db: &Catalog, ast: &QueryAst) -> Result<u64> {
    let bound = bind(db, ast)?;
    let distinct = match &ast.distinct_on {
        Some(d) => Some(col_index(ast, db, d)?),
        None => None,
    };
    if bound.iter().any(|b| b.rows.is_empty()) {
        return Ok(0);
    }
    let edges = grouped_edges(db, ast)?;
    let self_loops = edges.keys().any(|(a, b)| a == b);
    if !self_loops && edges.len() + 1 == bound.len() {
        let root = distinct.map(|(a, _)| a).unwrap_or(0);
        count_tree(&bound, &edges, root, distinct)
    } else {
        count_materialized(&bound, &edges, distinct)
    }
}

fn count_tree(
    bound: &[Bound<'_>],
    edges: &HashMap<(usize, usize), EdgeCols>,
    root: usize,
    distinct: Option<(usize, usize)>,
) -> Result<u64> {
    let n = bound.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges.keys() {
        adj[a].push(b);
        adj[b].push(a);
    }
    for l in &mut adj {
        l.sort_unstable();
    }
    // DFS order with parents
    let mut parent = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(v) = stack.pop() {
        order.push(v);
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = v;
                stack.push(w);
            }
        }
    }
    if order.len() != n {
        return Err(Error::DisconnectedJoin);
    }
    // columns of `v` and of `other` on the edge between them
    let cols = |v: usize, other: usize| -> (Vec<usize>, Vec<usize>) {
        if v < other {
            let e = &edges[&(v, other)];
            (e.iter().map(|c| c.0).collect(), e.iter().map(|c| c.1).collect())
        } else {
            let e = &edges[&(other, v)];
            (e.iter().map(|c| c.1).collect(), e.iter().map(|c| c.0).collect())
        }
    };
    // messages[c]: join-key (as seen from c's columns) -> summed weight
    let mut messages: Vec<Option<(Vec<usize>, HashMap<Vec<Key>, u128>)>> = (0..n).map(|_| None).collect();
    let mut root_weights: Vec<u128> = Vec::new();
    for &v in order.iter().rev() {
        let children: Vec<usize> = adj[v].iter().copied().filter(|&w| parent[w] == v).collect();
        let child_cols: Vec<(Vec<usize>, usize)> = children
            .iter()
            .map(|&c| (cols(v, c).0, c))
            .collect();
        let t = bound[v].table;
        let weights: Vec<u128> = bound[v]
            .rows
            .iter()
            .map(|&r| {
                let mut w: u128 = 1;
                for (vcols, c) in &child_cols {
                    let (_, msg) = messages[*c].as_ref().expect("child processed first");
                    let m = match row_key(t, r, vcols.iter().copied()) {
                        Some(k) => msg.get(&k).copied().unwrap_or(0),
                        None => 0,
                    };
                    w = w.saturating_mul(m);
                    if w == 0 {
                        break;
                    }
                }
                w
            })
            .collect();
        if v == root {
            root_weights = weights;
        } else {
            let (vcols, _) = cols(v, parent[v]);
            let mut msg: HashMap<Vec<Key>, u128> = HashMap::new();
            for (&r, &w) in bound[v].rows.iter().zip(&weights) {
                if w == 0 {
                    continue;
                }
                if let Some(k) = row_key(t, r, vcols.iter().copied()) {
                    let e = msg.entry(k).or_insert(0);
                    *e = e.saturating_add(w);
                }
            }
            messages[v] = Some((vcols, msg));
        }
    }
    let total = match distinct {
        None => root_weights.iter().fold(0u128, |a, &w| a.saturating_add(w)),
        Some((_, col)) => {
            let t = bound[root].table;
            let keys: HashSet<Key> = bound[root]
                .rows
                .iter()
                .zip(&root_weights)
                .filter(|(_, &w)| w > 0)
                .filter_map(|(&r, _)| Key::of(&t.rows[r][col]))
                .collect();
            keys.len() as u128
        }
    };
    Ok(u64::try_from(total).unwrap_or(u64::MAX))
}

fn count_materialized(
    bound: &[Bound<'_>],
    edges: &HashMap<(usize, usize), EdgeCols>,
    distinct: Option<(usize, usize)>,
) -> Result<u64> {
    let n = bound.len();
    // tuples hold row positions indexed by alias; unplaced slots are usize::MAX
    let mut placed = vec![false; n];
    placed[0] = true;
    let mut tuples: Vec<Vec<usize>> = bound[0]
        .rows
        .iter()
        .map(|&r| {
            let mut t = vec![usize::MAX; n];
            t[0] = r;
            t
        })
        .collect();
    // self-join predicates on a single alias act as row filters
    let filter_self = |tuples: &mut Vec<Vec<usize>>, a: usize| {
        if let Some(cols) = edges.get(&(a, a)) {
            let t = bound[a].table;
            tuples.retain(|tu| cols.iter().all(|&(x, y)| t.rows[tu[a]][x].sql_eq(&t.rows[tu[a]][y])));
        }
    };
    filter_self(&mut tuples, 0);
    for _ in 1..n {
        let next = (0..n).find(|&w| {
            !placed[w]
                && edges
                    .keys()
                    .any(|&(a, b)| (a == w && b != w && placed[b]) || (b == w && a != w && placed[a]))
        });
        let Some(w) = next else {
            return Err(Error::DisconnectedJoin);
        };
        // (placed alias, its column, w's column)
        let mut preds: Vec<(usize, usize, usize)> = Vec::new();
        for (&(a, b), cols) in edges {
            for &(ca, cb) in cols {
                if b == w && a != w && placed[a] {
                    preds.push((a, ca, cb));
                } else if a == w && b != w && placed[b] {
                    preds.push((b, cb, ca));
                }
            }
        }
        preds.sort_unstable();
        let wt = bound[w].table;
        let mut table: HashMap<Vec<Key>, Vec<usize>> = HashMap::new();
        for &r in &bound[w].rows {
            if let Some(k) = row_key(wt, r, preds.iter().map(|p| p.2)) {
                table.entry(k).or_default().push(r);
            }
        }
        let mut out = Vec::new();
        for tu in &tuples {
            let probe: Option<Vec<Key>> = preds
                .iter()
                .map(|&(a, ca, _)| Key::of(&bound[a].table.rows[tu[a]][ca]))
                .collect();
            if let Some(matches) = probe.and_then(|k| table.get(&k)) {
                for &r in matches {
                    let mut t2 = tu.clone();
                    t2[w] = r;
                    out.push(t2);
                }
            }
        }
        placed[w] = true;
        tuples = out;
        filter_self(&mut tuples, w);
    }
    Ok(match distinct {
        None => tuples.len() as u64,
        Some((a, col)) => {
            let t = bound[a].table;
            tuples
                .iter()
                .filter_map(|tu| Key::of(&t.rows[tu[a]][col]))
                .collect::<HashSet<_>>()
                .len() as u64
        }
    })
}

/// Nested-loop evaluation over the full cross product. Only for tests on
/// small databases.
pub fn execute_count_bruteforce(db: &Catalog, ast: &QueryAst) -> Result<u64> {
    let tables: Vec<&TableData> = ast
        .tables
        .iter()
        .map(|t| db.table(&t.table))
        .collect::<Result<_>>()?;
    let mut filters = Vec::new();
    for f in &ast.filters {
        filters.push((col_index(ast, db, &f.col)?, f));
    }
    let mut joins = Vec::new();
    for j in &ast.joins {
        joins.push((col_index(ast, db, &j.left)?, col_index(ast, db, &j.right)?));
    }
    let distinct = match &ast.distinct_on {
        Some(d) => Some(col_index(ast, db, d)?),
        None => None,
    };
    if tables.iter().any(|t| t.is_empty()) {
        return Ok(0);
    }
    let n = tables.len();
    let mut idx = vec![0usize; n];
    let mut count = 0u64;
    let mut seen: Vec<Value> = Vec::new();
    loop {
        let cell = |(a, c): (usize, usize)| &tables[a].rows[idx[a]][c];
        let ok = filters.iter().all(|(ac, f)| f.matches(cell(*ac))) && joins.iter().all(|(l, r)| cell(*l).sql_eq(cell(*r)));
        if ok {
            match distinct {
                None => count += 1,
                Some(ac) => {
                    let v = cell(ac);
                    if !v.is_null() && !seen.iter().any(|s| s.sql_eq(v)) {
                        seen.push(v.clone());
                    }
                }
            }
        }
        // odometer
        let mut k = 0;
        loop {
            if k == n {
                return Ok(if distinct.is_some() { seen.len() as u64 } else { count });
            }
            idx[k] += 1;
            if idx[k] < tables[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Applies one write statement. Statistics are left untouched.
pub fn apply_write(db: &mut Catalog, op: &WriteOp) -> Result<()> {
    let t = db.table_mut(op.table())?;
    let locate = |t: &TableData, row_id: u64| -> Result<usize> {
        t.position_of(row_id).ok_or_else(|| Error::Selector {
            table: t.name.clone(),
            row_id,
            matched: 0,
        })
    };
    match op {
        WriteOp::Insert { row, .. } => {
            t.push_row(row.clone())?;
        }
        WriteOp::Update {
            row_id,
            column,
            value,
            ..
        } => {
            let pos = locate(t, *row_id)?;
            let (c, col) = t.column(column)?;
            if !value.fits(col.ty) {
                return Err(Error::TypeMismatch(alloc::format!("{value} into {}.{column}", t.name)));
            }
            t.rows[pos][c] = value.clone();
        }
        WriteOp::Delete { row_id, .. } => {
            let pos = locate(t, *row_id)?;
            t.rows.remove(pos);
            t.row_ids.remove(pos);
        }
    }
    Ok(())
}

/// Exact number of distinct non-null values of `table.column`.
pub fn ndv_exact(db: &Catalog, table: &str, column: &str) -> Result<u64> {
    let t = db.table(table)?;
    let (c, _) = t.column(column)?;
    Ok(t.rows.iter().filter_map(|r| Key::of(&r[c])).collect::<HashSet<_>>().len() as u64)
}

/// Distinct aliases referenced by the query's predicates.
pub fn referenced_aliases(ast: &QueryAst) -> BTreeSet<&str> {
    ast.joins
        .iter()
        .flat_map(|j| [j.left.alias.as_str(), j.right.alias.as_str()])
        .chain(ast.filters.iter().map(|f| f.col.alias.as_str()))
        .collect()
}
