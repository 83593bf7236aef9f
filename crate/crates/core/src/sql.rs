//! The supported SQL subset: `COUNT(*)` / `COUNT(DISTINCT col)` over an
//! implicit-join FROM list with AND-conjoined predicates, plus a tiny
//! write-statement language for dynamic workloads.
//!
//! ```text
//! query     = "SELECT" "COUNT" "(" ( "*" | "DISTINCT" colref ) ")"
//!             "FROM" tableref { "," tableref }
//!             [ "WHERE" predicate { "AND" predicate } ] [ ";" ] ;
//! tableref  = ident [ [ "AS" ] ident ] ;
//! predicate = colref "=" colref
//!           | colref ( "=" | "<" | "<=" | ">" | ">=" ) literal
//!           | colref "LIKE" string ;
//! colref    = [ ident "." ] ident ;
//! literal   = [ "-" ] integer | [ "-" ] decimal | string ;
//!
//! write     = "INSERT" "INTO" ident "VALUES" "(" literal-or-null { "," literal-or-null } ")"
//!           | "UPDATE" ident "SET" ident "=" literal-or-null "WHERE" "ROWID" "=" integer
//!           | "DELETE" "FROM" ident "WHERE" "ROWID" "=" integer ;
//! ```
//!
//! Keywords are case-insensitive. Strings are single-quoted with `''` as the
//! escape for a quote.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::value::{ColumnType, Value};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TableRef {
    pub table: String,
    pub alias: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ColRef {
    pub alias: String,
    pub column: String,
}

impl ColRef {
    pub fn new(alias: impl Into<String>, column: impl Into<String>) -> Self {
        ColRef {
            alias: alias.into(),
            column: column.into(),
        }
    }
}

impl fmt::Display for ColRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.alias, self.column)
    }
}

/// Equi-join predicate, stored with `left <= right`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JoinPred {
    pub left: ColRef,
    pub right: ColRef,
}

impl JoinPred {
    pub fn new(a: ColRef, b: ColRef) -> Self {
        if a <= b {
            JoinPred { left: a, right: b }
        } else {
            JoinPred { left: b, right: a }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
    Like,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Like => "LIKE",
        }
    }

    pub fn is_range(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub col: ColRef,
    pub op: CmpOp,
    pub value: Value,
}

impl Filter {
    pub fn new(col: ColRef, op: CmpOp, value: Value) -> Self {
        Filter { col, op, value }
    }

    fn canonical_cmp(&self, other: &Filter) -> Ordering {
        self.col
            .cmp(&other.col)
            .then(self.op.cmp(&other.op))
            .then_with(|| self.value.total_cmp(&other.value))
    }

    /// Whether `v` satisfies the predicate. Nulls never do.
    pub fn matches(&self, v: &Value) -> bool {
        match self.op {
            CmpOp::Like => match (v, &self.value) {
                (Value::Text(s), Value::Text(p)) => like_match(p, s),
                _ => false,
            },
            op => match v.sql_cmp(&self.value) {
                None => false,
                Some(ord) => match op {
                    CmpOp::Eq => ord == Ordering::Equal,
                    CmpOp::Lt => ord == Ordering::Less,
                    CmpOp::Le => ord != Ordering::Greater,
                    CmpOp::Gt => ord == Ordering::Greater,
                    CmpOp::Ge => ord != Ordering::Less,
                    CmpOp::Like => unreachable!(),
                },
            },
        }
    }
}

/// `LIKE` matching: `%` matches any sequence, `_` any single character,
/// everything else literally and case-sensitively.
pub fn like_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0usize, 0usize);
    let mut backtrack: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '_' || (p[pi] != '%' && p[pi] == t[ti])) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '%' {
            backtrack = Some((pi, ti));
            pi += 1;
        } else if let Some((bp, bt)) = backtrack {
            pi = bp + 1;
            ti = bt + 1;
            backtrack = Some((bp, bt + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '%')
}

/// A parsed, validated counting query in canonical order: tables sorted by
/// alias, joins and filters sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryAst {
    pub tables: Vec<TableRef>,
    pub joins: Vec<JoinPred>,
    pub filters: Vec<Filter>,
    pub distinct_on: Option<ColRef>,
}

impl QueryAst {
    pub fn single(table: &str) -> Self {
        QueryAst {
            tables: alloc::vec![TableRef {
                table: table.to_string(),
                alias: table.to_string()
            }],
            joins: Vec::new(),
            filters: Vec::new(),
            distinct_on: None,
        }
    }

    /// Sorts every component into canonical order. Idempotent.
    pub fn canonicalize(&mut self) {
        self.tables.sort();
        self.tables.dedup();
        for j in &mut self.joins {
            *j = JoinPred::new(j.left.clone(), j.right.clone());
        }
        self.joins.sort();
        self.joins.dedup();
        self.filters.sort_by(Filter::canonical_cmp);
    }

    pub fn table_of(&self, alias: &str) -> Option<&str> {
        self.tables.iter().find(|t| t.alias == alias).map(|t| t.table.as_str())
    }

    pub fn alias_index(&self, alias: &str) -> Option<usize> {
        self.tables.iter().position(|t| t.alias == alias)
    }

    pub fn join_count(&self) -> usize {
        self.joins.len()
    }

    /// Number of filtered columns; a two-sided range on one column counts once.
    pub fn filter_count(&self) -> usize {
        self.filters.iter().map(|f| &f.col).collect::<BTreeSet<_>>().len()
    }

    pub fn has_like(&self) -> bool {
        self.filters.iter().any(|f| f.op == CmpOp::Like)
    }

    /// Canonical SQL text; also used as a lookup key.
    pub fn render(&self) -> String {
        self.to_string()
    }

    /// The same query body with `COUNT(*)`.
    pub fn without_distinct(&self) -> QueryAst {
        QueryAst {
            distinct_on: None,
            ..self.clone()
        }
    }

    /// Adjacency over alias positions.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = alloc::vec![Vec::new(); self.tables.len()];
        for j in &self.joins {
            let (Some(a), Some(b)) = (self.alias_index(&j.left.alias), self.alias_index(&j.right.alias)) else {
                continue;
            };
            if a != b {
                if !adj[a].contains(&b) {
                    adj[a].push(b);
                }
                if !adj[b].contains(&a) {
                    adj[b].push(a);
                }
            }
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let n = self.tables.len();
        if n == 0 {
            return false;
        }
        mask_connected(&self.adjacency(), (1u64 << n) - 1)
    }

    /// Checks every invariant against `catalog`, coercing integer literals on
    /// float columns.
    pub fn validate(&mut self, catalog: &Catalog) -> Result<()> {
        if self.tables.is_empty() {
            return Err(Error::Empty("FROM list"));
        }
        if self.tables.len() > 24 {
            return Err(Error::InvalidArgument("at most 24 tables per query".into()));
        }
        let mut aliases = BTreeSet::new();
        for t in &self.tables {
            catalog.table(&t.table)?;
            if !aliases.insert(t.alias.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate alias `{}`", t.alias)));
            }
        }
        let col_type = |c: &ColRef| -> Result<ColumnType> {
            let table = self.table_of(&c.alias).ok_or_else(|| Error::UnknownTable(c.alias.clone()))?;
            catalog.column_type(table, &c.column)
        };
        for j in &self.joins {
            let (l, r) = (col_type(&j.left)?, col_type(&j.right)?);
            if l != r {
                return Err(Error::TypeMismatch(format!("join {} = {}", j.left, j.right)));
            }
        }
        let mut coerced = Vec::with_capacity(self.filters.len());
        for f in &self.filters {
            let ty = col_type(&f.col)?;
            let value = coerce_literal(&f.value, ty, f.op).ok_or_else(|| {
                Error::TypeMismatch(format!("{} {} {} on {} column", f.col, f.op.symbol(), f.value, ty.name()))
            })?;
            coerced.push(value);
        }
        if let Some(d) = &self.distinct_on {
            col_type(d)?;
        }
        for (f, v) in self.filters.iter_mut().zip(coerced) {
            f.value = v;
        }
        if !self.is_connected() {
            return Err(Error::DisconnectedJoin);
        }
        self.canonicalize();
        Ok(())
    }

    /// One sub-query per connected induced sub-graph of the join graph,
    /// ordered by size and then by the sorted tuple of table names.
    pub fn decompose(&self) -> Result<Vec<QueryAst>> {
        if self.distinct_on.is_some() {
            return Err(Error::UnsupportedDecomposition);
        }
        let n = self.tables.len();
        if n > 20 {
            return Err(Error::InvalidArgument("decomposition limited to 20 tables".into()));
        }
        let adj = self.adjacency();
        let mut subs: Vec<(usize, Vec<&str>, Vec<&str>, QueryAst)> = Vec::new();
        for mask in 1u64..(1u64 << n) {
            if !mask_connected(&adj, mask) {
                continue;
            }
            let sub = self.restrict(mask);
            let mut names: Vec<&str> = Vec::new();
            let mut aliases: Vec<&str> = Vec::new();
            for (i, t) in self.tables.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    names.push(&t.table);
                    aliases.push(&t.alias);
                }
            }
            names.sort();
            subs.push((names.len(), names, aliases, sub));
        }
        subs.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)).then_with(|| a.2.cmp(&b.2)));
        Ok(subs.into_iter().map(|s| s.3).collect())
    }

    /// The induced sub-query on the alias positions set in `mask`.
    pub fn restrict(&self, mask: u64) -> QueryAst {
        let keep: BTreeSet<&str> = self
            .tables
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, t)| t.alias.as_str())
            .collect();
        QueryAst {
            tables: self.tables.iter().filter(|t| keep.contains(t.alias.as_str())).cloned().collect(),
            joins: self
                .joins
                .iter()
                .filter(|j| keep.contains(j.left.alias.as_str()) && keep.contains(j.right.alias.as_str()))
                .cloned()
                .collect(),
            filters: self.filters.iter().filter(|f| keep.contains(f.col.alias.as_str())).cloned().collect(),
            distinct_on: self.distinct_on.clone().filter(|d| keep.contains(d.alias.as_str())),
        }
    }
}

/// Whether the vertices in `mask` induce a connected sub-graph.
pub fn mask_connected(adj: &[Vec<usize>], mask: u64) -> bool {
    if mask == 0 {
        return false;
    }
    let start = mask.trailing_zeros() as usize;
    let mut seen = 1u64 << start;
    let mut stack = alloc::vec![start];
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            let bit = 1u64 << w;
            if mask & bit != 0 && seen & bit == 0 {
                seen |= bit;
                stack.push(w);
            }
        }
    }
    seen == mask
}

fn coerce_literal(v: &Value, ty: ColumnType, op: CmpOp) -> Option<Value> {
    match (op, ty, v) {
        (CmpOp::Like, ColumnType::Text, Value::Text(_)) => Some(v.clone()),
        (CmpOp::Like, _, _) => None,
        (o, ColumnType::Text, _) if o.is_range() => None,
        (_, ColumnType::Int64, Value::Int(_)) => Some(v.clone()),
        (_, ColumnType::Float64, Value::Float(_)) => Some(v.clone()),
        (_, ColumnType::Float64, Value::Int(i)) => Some(Value::Float(*i as f64)),
        (_, ColumnType::Text, Value::Text(_)) => Some(v.clone()),
        _ => None,
    }
}

impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT COUNT(")?;
        match &self.distinct_on {
            Some(c) => write!(f, "DISTINCT {c}")?,
            None => f.write_str("*")?,
        }
        f.write_str(") FROM ")?;
        for (i, t) in self.tables.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            if t.alias == t.table {
                f.write_str(&t.table)?;
            } else {
                write!(f, "{} AS {}", t.table, t.alias)?;
            }
        }
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| -> fmt::Result {
            let s = if first { " WHERE " } else { " AND " };
            first = false;
            f.write_str(s)
        };
        for j in &self.joins {
            sep(f)?;
            write!(f, "{} = {}", j.left, j.right)?;
        }
        for flt in &self.filters {
            sep(f)?;
            write!(f, "{} {} {}", flt.col, flt.op.symbol(), flt.value)?;
        }
        Ok(())
    }
}

/// Parses and validates a counting query against `catalog`.
pub fn parse_query(sql: &str, catalog: &Catalog) -> Result<QueryAst> {
    let mut ast = parse_query_syntax(sql)?;
    resolve_unqualified(&mut ast, catalog)?;
    ast.validate(catalog)?;
    Ok(ast)
}

/// Parses without consulting a catalog. Unqualified column references get an
/// empty alias.
pub fn parse_query_syntax(sql: &str) -> Result<QueryAst> {
    let mut p = Parser::new(sql)?;
    p.keyword("SELECT")?;
    p.keyword("COUNT")?;
    p.expect(&Tok::LParen)?;
    let distinct_on = if p.eat(&Tok::Star) {
        None
    } else {
        p.keyword("DISTINCT")?;
        Some(p.colref()?)
    };
    p.expect(&Tok::RParen)?;
    p.keyword("FROM")?;
    let mut tables = Vec::new();
    loop {
        let table = p.ident()?;
        let alias = if p.eat_keyword("AS") {
            p.ident()?
        } else if matches!(p.peek(), Tok::Ident(s) if !is_reserved(s)) {
            p.ident()?
        } else {
            table.clone()
        };
        tables.push(TableRef { table, alias });
        if !p.eat(&Tok::Comma) {
            break;
        }
    }
    let mut joins = Vec::new();
    let mut filters = Vec::new();
    if p.eat_keyword("WHERE") {
        loop {
            let col = p.colref()?;
            if p.eat_keyword("LIKE") {
                let pos = p.pos();
                match p.literal()? {
                    Value::Text(s) => filters.push(Filter::new(col, CmpOp::Like, Value::Text(s))),
                    _ => return Err(syntax(pos, "LIKE expects a string pattern")),
                }
            } else {
                let pos = p.pos();
                let op = match p.next() {
                    Tok::Eq => CmpOp::Eq,
                    Tok::Lt => CmpOp::Lt,
                    Tok::Le => CmpOp::Le,
                    Tok::Gt => CmpOp::Gt,
                    Tok::Ge => CmpOp::Ge,
                    t => return Err(syntax(pos, &format!("expected comparison operator, found {t:?}"))),
                };
                if op == CmpOp::Eq && matches!(p.peek(), Tok::Ident(_)) {
                    let other = p.colref()?;
                    joins.push(JoinPred::new(col, other));
                } else {
                    filters.push(Filter::new(col, op, p.literal()?));
                }
            }
            if !p.eat_keyword("AND") {
                break;
            }
        }
    }
    p.eat(&Tok::Semi);
    p.end()?;
    let mut ast = QueryAst {
        tables,
        joins,
        filters,
        distinct_on,
    };
    ast.canonicalize();
    Ok(ast)
}

fn resolve_unqualified(ast: &mut QueryAst, catalog: &Catalog) -> Result<()> {
    let tables = ast.tables.clone();
    let resolve = |c: &mut ColRef| -> Result<()> {
        if !c.alias.is_empty() {
            return Ok(());
        }
        let mut hits = tables.iter().filter(|t| {
            catalog
                .table(&t.table)
                .map(|td| td.column_index(&c.column).is_some())
                .unwrap_or(false)
        });
        match (hits.next(), hits.next()) {
            (Some(t), None) => {
                c.alias = t.alias.clone();
                Ok(())
            }
            (None, _) => Err(Error::UnknownColumn {
                table: String::new(),
                column: c.column.clone(),
            }),
            (Some(_), Some(_)) => Err(Error::InvalidArgument(format!("ambiguous column `{}`", c.column))),
        }
    };
    for j in &mut ast.joins {
        resolve(&mut j.left)?;
        resolve(&mut j.right)?;
    }
    for f in &mut ast.filters {
        resolve(&mut f.col)?;
    }
    if let Some(d) = &mut ast.distinct_on {
        resolve(d)?;
    }
    ast.canonicalize();
    Ok(())
}

/// A single-row write statement. Rows are addressed by their stable ordinal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WriteOp {
    Insert { table: String, row: Vec<Value> },
    Update {
        table: String,
        row_id: u64,
        column: String,
        value: Value,
    },
    Delete { table: String, row_id: u64 },
}

impl WriteOp {
    pub fn table(&self) -> &str {
        match self {
            WriteOp::Insert { table, .. } | WriteOp::Update { table, .. } | WriteOp::Delete { table, .. } => table,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            WriteOp::Insert { .. } => "insert",
            WriteOp::Update { .. } => "update",
            WriteOp::Delete { .. } => "delete",
        }
    }
}

impl fmt::Display for WriteOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WriteOp::Insert { table, row } => {
                write!(f, "INSERT INTO {table} VALUES (")?;
                for (i, v) in row.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(")")
            }
            WriteOp::Update {
                table,
                row_id,
                column,
                value,
            } => write!(f, "UPDATE {table} SET {column} = {value} WHERE ROWID = {row_id}"),
            WriteOp::Delete { table, row_id } => write!(f, "DELETE FROM {table} WHERE ROWID = {row_id}"),
        }
    }
}

/// Parses a write statement and types its literals against `catalog`.
pub fn parse_write(sql: &str, catalog: &Catalog) -> Result<WriteOp> {
    let mut p = Parser::new(sql)?;
    let pos = p.pos();
    let op = match p.ident()?.to_ascii_uppercase().as_str() {
        "INSERT" => {
            p.keyword("INTO")?;
            let table = p.ident()?;
            p.keyword("VALUES")?;
            p.expect(&Tok::LParen)?;
            let t = catalog.table(&table)?;
            let mut row = Vec::new();
            loop {
                let vpos = p.pos();
                let v = p.literal_or_null()?;
                let ty = t
                    .columns
                    .get(row.len())
                    .ok_or_else(|| syntax(vpos, "too many values"))?
                    .ty;
                row.push(coerce_cell(v, ty).ok_or_else(|| syntax(vpos, "value does not fit column type"))?);
                if !p.eat(&Tok::Comma) {
                    break;
                }
            }
            p.expect(&Tok::RParen)?;
            if row.len() != t.columns.len() {
                return Err(Error::RowArity {
                    table,
                    expected: t.columns.len(),
                    got: row.len(),
                });
            }
            WriteOp::Insert { table, row }
        }
        "UPDATE" => {
            let table = p.ident()?;
            p.keyword("SET")?;
            let column = p.ident()?;
            p.expect(&Tok::Eq)?;
            let vpos = p.pos();
            let v = p.literal_or_null()?;
            let ty = catalog.column_type(&table, &column)?;
            let value = coerce_cell(v, ty).ok_or_else(|| syntax(vpos, "value does not fit column type"))?;
            let row_id = p.rowid_selector()?;
            WriteOp::Update {
                table,
                row_id,
                column,
                value,
            }
        }
        "DELETE" => {
            p.keyword("FROM")?;
            let table = p.ident()?;
            catalog.table(&table)?;
            let row_id = p.rowid_selector()?;
            WriteOp::Delete { table, row_id }
        }
        _ => return Err(syntax(pos, "expected INSERT, UPDATE or DELETE")),
    };
    p.eat(&Tok::Semi);
    p.end()?;
    Ok(op)
}

fn coerce_cell(v: Value, ty: ColumnType) -> Option<Value> {
    match (v, ty) {
        (Value::Null, _) => Some(Value::Null),
        (Value::Int(i), ColumnType::Float64) => Some(Value::Float(i as f64)),
        (v, ty) if v.fits(ty) => Some(v),
        _ => None,
    }
}

fn syntax(pos: usize, msg: &str) -> Error {
    Error::Syntax {
        pos,
        msg: msg.to_string(),
    }
}

fn is_reserved(s: &str) -> bool {
    ["WHERE", "AND", "AS", "FROM", "LIKE", "SELECT"]
        .iter()
        .any(|k| s.eq_ignore_ascii_case(k))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Star,
    Semi,
    Minus,
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self> {
        Ok(Parser {
            toks: lex(src)?,
            at: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if t != Tok::Eof {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> Result<()> {
        let pos = self.pos();
        if self.eat(t) {
            Ok(())
        } else {
            Err(syntax(pos, &format!("expected {t:?}, found {:?}", self.peek())))
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw)) {
            self.next();
            true
        } else {
            false
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let pos = self.pos();
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(syntax(pos, &format!("expected {kw}, found {:?}", self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String> {
        let pos = self.pos();
        match self.next() {
            Tok::Ident(s) => Ok(s),
            t => Err(syntax(pos, &format!("expected identifier, found {t:?}"))),
        }
    }

    fn colref(&mut self) -> Result<ColRef> {
        let first = self.ident()?;
        if self.eat(&Tok::Dot) {
            Ok(ColRef::new(first, self.ident()?))
        } else {
            Ok(ColRef::new(String::new(), first))
        }
    }

    fn literal(&mut self) -> Result<Value> {
        let pos = self.pos();
        let neg = self.eat(&Tok::Minus);
        match self.next() {
            Tok::Int(i) => Ok(Value::Int(if neg { -i } else { i })),
            Tok::Float(x) => Ok(Value::Float(if neg { -x } else { x })),
            Tok::Str(s) if !neg => Ok(Value::Text(s)),
            t => Err(syntax(pos, &format!("expected literal, found {t:?}"))),
        }
    }

    fn literal_or_null(&mut self) -> Result<Value> {
        if self.eat_keyword("NULL") {
            Ok(Value::Null)
        } else {
            self.literal()
        }
    }

    fn rowid_selector(&mut self) -> Result<u64> {
        self.keyword("WHERE")?;
        self.keyword("ROWID")?;
        self.expect(&Tok::Eq)?;
        let pos = self.pos();
        match self.next() {
            Tok::Int(i) if i >= 0 => Ok(i as u64),
            t => Err(syntax(pos, &format!("expected row ordinal, found {t:?}"))),
        }
    }

    fn end(&mut self) -> Result<()> {
        let pos = self.pos();
        match self.peek() {
            Tok::Eof => Ok(()),
            t => Err(syntax(pos, &format!("unexpected trailing {t:?}"))),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => out.push((Tok::LParen, start)),
            b')' => out.push((Tok::RParen, start)),
            b',' => out.push((Tok::Comma, start)),
            b'.' => out.push((Tok::Dot, start)),
            b'*' => out.push((Tok::Star, start)),
            b';' => out.push((Tok::Semi, start)),
            b'-' => out.push((Tok::Minus, start)),
            b'=' => out.push((Tok::Eq, start)),
            b'<' | b'>' => {
                let le = bytes.get(i + 1) == Some(&b'=');
                let t = match (c, le) {
                    (b'<', true) => Tok::Le,
                    (b'<', false) => Tok::Lt,
                    (_, true) => Tok::Ge,
                    _ => Tok::Gt,
                };
                if le {
                    i += 1;
                }
                out.push((t, start));
            }
            b'\'' => {
                let mut s = String::new();
                i += 1;
                loop {
                    let rest = &src[i..];
                    let Some(ch) = rest.chars().next() else {
                        return Err(syntax(start, "unterminated string literal"));
                    };
                    if ch == '\'' {
                        if rest[1..].starts_with('\'') {
                            s.push('\'');
                            i += 2;
                            continue;
                        }
                        break;
                    }
                    s.push(ch);
                    i += ch.len_utf8();
                }
                out.push((Tok::Str(s), start));
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let is_float = i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit();
                if is_float {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
                    return Err(syntax(start, "malformed number"));
                }
                let text = &src[start..i];
                let tok = if is_float {
                    Tok::Float(text.parse().map_err(|_| syntax(start, "malformed decimal"))?)
                } else {
                    Tok::Int(text.parse().map_err(|_| syntax(start, "integer out of range"))?)
                };
                out.push((tok, start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => return Err(syntax(start, "unexpected character")),
        }
        i += 1;
    }
    out.push((Tok::Eof, src.len()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Column, TableData};
    use alloc::vec;

    pub(crate) fn toy_catalog() -> Catalog {
        let mut c = Catalog::new();
        for name in ["t1", "t2", "t3"] {
            let mut t = TableData::new(
                name,
                vec![
                    Column::new("a", ColumnType::Int64),
                    Column::new("b", ColumnType::Int64),
                    Column::new("name", ColumnType::Text),
                    Column::new("x", ColumnType::Float64),
                ],
            )
            .unwrap();
            t.push_row(vec![Value::Int(1), Value::Int(2), Value::Text("smith".into()), Value::Float(0.5)])
                .unwrap();
            c.add_table(t).unwrap();
        }
        c
    }

    #[test]
    fn parses_spj() {
        let c = toy_catalog();
        let q = parse_query("SELECT COUNT(*) FROM t1, t2 WHERE t1.a=t2.a AND t1.b>=3", &c).unwrap();
        assert_eq!(q.tables.len(), 2);
        assert_eq!(q.joins, vec![JoinPred::new(ColRef::new("t1", "a"), ColRef::new("t2", "a"))]);
        assert_eq!(q.filters, vec![Filter::new(ColRef::new("t1", "b"), CmpOp::Ge, Value::Int(3))]);
        assert_eq!(q.distinct_on, None);
    }

    #[test]
    fn parses_distinct_and_like() {
        let c = toy_catalog();
        let q = parse_query("SELECT COUNT(DISTINCT t1.b) FROM t1", &c).unwrap();
        assert_eq!(q.distinct_on, Some(ColRef::new("t1", "b")));
        assert!(q.joins.is_empty());
        let q = parse_query("SELECT COUNT(*) FROM t1 WHERE t1.name LIKE '%smi%'", &c).unwrap();
        assert_eq!(q.filters[0].op, CmpOp::Like);
        assert_eq!(q.filters[0].value, Value::Text("%smi%".into()));
    }

    #[test]
    fn round_trips_and_canonicalizes() {
        let c = toy_catalog();
        for sql in [
            "SELECT COUNT(*) FROM t1, t2 WHERE t1.a=t2.a AND t1.b>=3",
            "SELECT COUNT(DISTINCT t1.b) FROM t1",
            "SELECT COUNT(*) FROM t1 WHERE t1.name LIKE '%smi%'",
            "select count(*) from t1 x, t2 where x.x < -1.5 and t2.name = 'o''k' and x.a = t2.b",
        ] {
            let q = parse_query(sql, &c).unwrap();
            assert_eq!(parse_query(&q.render(), &c).unwrap(), q, "{sql}");
        }
        let a = parse_query("SELECT COUNT(*) FROM t1 WHERE t1.b > 1 AND t1.a = 2 AND t1.x <= 3", &c).unwrap();
        let b = parse_query("SELECT COUNT(*) FROM t1 WHERE t1.x <= 3 AND t1.b > 1 AND t1.a = 2", &c).unwrap();
        assert_eq!(a.render(), b.render());
        assert_eq!(a.render(), "SELECT COUNT(*) FROM t1 WHERE t1.a = 2 AND t1.b > 1 AND t1.x <= 3.0");
    }

    #[test]
    fn alias_is_kept() {
        let c = toy_catalog();
        let q = parse_query("SELECT COUNT(*) FROM t1 x WHERE x.a = 1", &c).unwrap();
        assert_eq!(q.render(), "SELECT COUNT(*) FROM t1 AS x WHERE x.a = 1");
        let q = parse_query("SELECT COUNT(*) FROM t1 WHERE b = 1", &c).unwrap();
        assert_eq!(q.filters[0].col, ColRef::new("t1", "b"));
    }

    #[test]
    fn reports_errors() {
        let c = toy_catalog();
        assert!(matches!(parse_query("SELECT COUNT(*) FROM", &c), Err(Error::Syntax { pos: 20, .. })));
        assert!(matches!(parse_query("SELECT COUNT(*) FROM nope", &c), Err(Error::UnknownTable(_))));
        assert!(matches!(parse_query("SELECT COUNT(*) FROM t1 WHERE t1.zz = 1", &c), Err(Error::UnknownColumn { .. })));
        assert!(matches!(parse_query("SELECT COUNT(*) FROM t1 WHERE t1.a LIKE 'x%'", &c), Err(Error::TypeMismatch(_))));
        assert!(matches!(parse_query("SELECT COUNT(*) FROM t1 WHERE t1.name > 'x'", &c), Err(Error::TypeMismatch(_))));
        assert!(matches!(parse_query("SELECT COUNT(*) FROM t1 WHERE t1.a = 1.5", &c), Err(Error::TypeMismatch(_))));
        assert!(matches!(parse_query("SELECT COUNT(*) FROM t1, t2", &c), Err(Error::DisconnectedJoin)));
        assert!(matches!(parse_query("SELECT COUNT(*) FROM t1 WHERE a = 1 OR", &c), Err(Error::Syntax { .. })));
        assert!(matches!(parse_query("SELECT COUNT(*) FROM t1 WHERE t1.name = 'abc", &c), Err(Error::Syntax { .. })));
    }

    #[test]
    fn like_semantics() {
        assert!(like_match("%smi%", "smith"));
        assert!(like_match("sm%", "smith"));
        assert!(!like_match("%sm", "smith"));
        assert!(like_match("%th", "smith"));
        assert!(like_match("s_ith", "smith"));
        assert!(!like_match("S%", "smith"));
        assert!(like_match("%", ""));
        assert!(like_match("a%b%c", "aXXbYYc"));
        assert!(!like_match("a%b%c", "aXXbYY"));
        assert!(!like_match("_", ""));
    }

    fn chain_catalog_query(sql: &str) -> QueryAst {
        parse_query(sql, &toy_catalog()).unwrap()
    }

    /// Brute-force count of connected induced sub-graphs.
    fn count_connected_subsets(n: usize, edges: &[(usize, usize)]) -> usize {
        let mut count = 0;
        for mask in 1u32..(1 << n) {
            let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let mut reached = vec![members[0]];
            let mut changed = true;
            while changed {
                changed = false;
                for &(a, b) in edges {
                    for (x, y) in [(a, b), (b, a)] {
                        if reached.contains(&x) && members.contains(&y) && !reached.contains(&y) {
                            reached.push(y);
                            changed = true;
                        }
                    }
                }
            }
            if reached.len() == members.len() {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn decomposes_chain_and_triangle() {
        let q = chain_catalog_query("SELECT COUNT(*) FROM t1, t2, t3 WHERE t1.a = t2.a AND t2.b = t3.b");
        let subs: Vec<Vec<String>> = q
            .decompose()
            .unwrap()
            .iter()
            .map(|s| s.tables.iter().map(|t| t.table.clone()).collect())
            .collect();
        let want: Vec<Vec<String>> = [vec!["t1"], vec!["t2"], vec!["t3"], vec!["t1", "t2"], vec!["t2", "t3"], vec!["t1", "t2", "t3"]]
            .iter()
            .map(|v| v.iter().map(|s| s.to_string()).collect())
            .collect();
        assert_eq!(subs, want);
        assert_eq!(subs.len(), count_connected_subsets(3, &[(0, 1), (1, 2)]));

        let tri = chain_catalog_query("SELECT COUNT(*) FROM t1, t2, t3 WHERE t1.a = t2.a AND t2.b = t3.b AND t3.a = t1.b AND t1.x > 0");
        let subs = tri.decompose().unwrap();
        assert_eq!(subs.len(), 7);
        assert_eq!(subs.len(), count_connected_subsets(3, &[(0, 1), (1, 2), (0, 2)]));
        // sub-queries carry their own filters and internal joins only
        assert_eq!(subs[0].filters.len(), 1);
        assert_eq!(subs[3].joins.len(), 1);
        assert_eq!(subs[6].joins.len(), 3);

        let single = chain_catalog_query("SELECT COUNT(*) FROM t1 WHERE t1.a = 1");
        assert_eq!(single.decompose().unwrap(), vec![single.clone()]);
        let d = chain_catalog_query("SELECT COUNT(DISTINCT t1.a) FROM t1");
        assert_eq!(d.decompose(), Err(Error::UnsupportedDecomposition));
    }

    #[test]
    fn write_statements_round_trip() {
        let c = toy_catalog();
        for sql in [
            "INSERT INTO t1 VALUES (1, NULL, 'a''b', 2.5)",
            "UPDATE t2 SET x = 3.0 WHERE ROWID = 7",
            "DELETE FROM t3 WHERE ROWID = 0",
        ] {
            let w = parse_write(sql, &c).unwrap();
            assert_eq!(w.to_string(), sql);
        }
        assert!(parse_write("INSERT INTO t1 VALUES (1)", &c).is_err());
        assert!(parse_write("UPDATE t1 SET a = 'x' WHERE ROWID = 1", &c).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_query() -> impl Strategy<Value = QueryAst> {
            let aliases = ["t1", "t2", "t3", "q"];
            (1usize..=4, proptest::collection::vec((0usize..4, 0usize..4, -50i64..50, any::<bool>()), 0..6), any::<bool>())
                .prop_map(move |(n, fs, distinct)| {
                    let tables: Vec<TableRef> = (0..n)
                        .map(|i| TableRef {
                            table: ["t1", "t2", "t3", "t1"][i].into(),
                            alias: aliases[i].into(),
                        })
                        .collect();
                    let joins = (1..n)
                        .map(|i| JoinPred::new(ColRef::new(aliases[i - 1], "a"), ColRef::new(aliases[i], "b")))
                        .collect();
                    let filters = fs
                        .into_iter()
                        .map(|(t, kind, c, flag)| {
                            let col = aliases[t % n];
                            match kind {
                                0 => Filter::new(ColRef::new(col, "a"), if flag { CmpOp::Le } else { CmpOp::Gt }, Value::Int(c)),
                                1 => Filter::new(ColRef::new(col, "x"), CmpOp::Ge, Value::Float(c as f64 / 8.0)),
                                2 => Filter::new(ColRef::new(col, "name"), CmpOp::Like, Value::Text(alloc::format!("%{c}'_%"))),
                                _ => Filter::new(ColRef::new(col, "name"), CmpOp::Eq, Value::Text(alloc::format!("v{c}"))),
                            }
                        })
                        .collect();
                    let mut q = QueryAst {
                        tables,
                        joins,
                        filters,
                        distinct_on: distinct.then(|| ColRef::new("t1", "b")),
                    };
                    q.canonicalize();
                    q
                })
        }

        proptest! {
            #[test]
            fn parse_render_identity(q in arb_query()) {
                let c = toy_catalog();
                prop_assert_eq!(parse_query(&q.render(), &c).unwrap(), q);
            }

            #[test]
            fn decomposition_count_matches_brute_force(n in 1usize..=6, extra in proptest::collection::vec((0usize..6, 0usize..6), 0..6)) {
                let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
                edges.extend(extra.into_iter().filter(|(a, b)| a < b && *b < n));
                let tables: Vec<TableRef> = (0..n).map(|i| TableRef { table: "t1".into(), alias: alloc::format!("a{i}") }).collect();
                let joins = edges.iter().map(|(a, b)| JoinPred::new(ColRef::new(alloc::format!("a{a}"), "a"), ColRef::new(alloc::format!("a{b}"), "a"))).collect();
                let mut q = QueryAst { tables, joins, filters: vec![], distinct_on: None };
                q.canonicalize();
                prop_assert_eq!(q.decompose().unwrap().len(), count_connected_subsets(n, &edges));
            }
        }
    }
}
