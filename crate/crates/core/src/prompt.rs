//! Structured estimation prompts and their canonical JSON encoding.
//!
//! Layout (compact, keys in this order):
//!
//! ```text
//! {"instruction": <text>,
//!  "input": {"query": <canonical sql>,
//!            "column_1": {"name", "min", "max", "ndv", "mcv", "histogram_bounds", "rows", "nulls"},
//!            ...
//!            "column_m": {...},
//!            "estimates": [{"source", "value"}, ...],
//!            "feedback": [{"previous_output", "reference", "directive"}, ...],
//!            "examples": [{"query", "cardinality"}, ...]}}      <- only when few-shot is on
//! ```
//!
//! MCVs are `[value, count]` pairs with absolute counts; `rows` is the table
//! row count the statistics were built on. Numbers never use exponent
//! notation and floats always carry a fractional part.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ColumnStats};
use crate::error::{Error, Result};
use crate::estimators::{Estimate, EstimateSource, StatsSource};
use crate::sql::{ColRef, QueryAst};
use crate::value::{FloatLit, Value};

/// Default self-correction budget.
pub const DEFAULT_MAX_FEEDBACK: usize = 5;

pub const INSTRUCTION: &str = "You are a cardinality estimator for a relational database. \
Given a SQL counting query, coarse statistics of the columns it references and the estimates of \
other cardinality estimators, answer with the number of rows the query counts, written as a plain \
decimal integer.";

pub fn directive(previous_output: &str, reference: f64) -> String {
    format!(
        "your previous estimate {} deviates from a reference estimate {}; produce a corrected cardinality",
        previous_output.trim(),
        Num(reference)
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptColumn {
    /// `alias.column` as written in the query.
    pub name: String,
    pub table: String,
    pub column: String,
    pub stats: ColumnStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackTurn {
    pub previous_output: String,
    pub reference: f64,
    pub directive: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShot {
    pub query: String,
    pub cardinality: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptOptions {
    pub include_stats: bool,
    pub include_estimates: bool,
    /// Worked examples; `None` leaves the "examples" key out.
    pub fewshot: Option<Vec<FewShot>>,
    pub max_feedback: usize,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions {
            include_stats: true,
            include_estimates: true,
            fewshot: None,
            max_feedback: DEFAULT_MAX_FEEDBACK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub instruction: String,
    pub query: QueryAst,
    pub query_text: String,
    pub columns: Vec<PromptColumn>,
    /// Whole-number estimates from other estimators.
    pub estimates: Vec<(EstimateSource, f64)>,
    pub feedback: Vec<FeedbackTurn>,
    pub fewshot: Option<Vec<FewShot>>,
    pub max_feedback: usize,
}

/// Columns referenced by the query in order of first appearance in its
/// canonical text.
pub fn referenced_columns(ast: &QueryAst) -> Vec<&ColRef> {
    let mut all: Vec<&ColRef> = Vec::new();
    all.extend(ast.distinct_on.as_ref());
    for j in &ast.joins {
        all.push(&j.left);
        all.push(&j.right);
    }
    all.extend(ast.filters.iter().map(|f| &f.col));
    let mut out: Vec<&ColRef> = Vec::new();
    for c in all {
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

pub fn build_prompt(ast: &QueryAst, catalog: &Catalog, estimates: &[Estimate], options: &PromptOptions) -> Result<Prompt> {
    if options.include_estimates && estimates.is_empty() {
        return Err(Error::InvalidArgument("prompt needs at least one other-estimator estimate".into()));
    }
    let mut columns = Vec::new();
    if options.include_stats {
        for c in referenced_columns(ast) {
            let table = ast.table_of(&c.alias).ok_or_else(|| Error::UnknownTable(c.alias.clone()))?;
            columns.push(PromptColumn {
                name: c.to_string(),
                table: table.to_string(),
                column: c.column.clone(),
                stats: catalog.column_stats(table, &c.column)?.clone(),
            });
        }
    }
    let estimates = if options.include_estimates {
        estimates.iter().map(|e| (e.source, libm::round(e.value.max(0.0)))).collect()
    } else {
        Vec::new()
    };
    Ok(Prompt {
        instruction: INSTRUCTION.to_string(),
        query: ast.clone(),
        query_text: ast.render(),
        columns,
        estimates,
        feedback: Vec::new(),
        fewshot: options.fewshot.clone(),
        max_feedback: options.max_feedback,
    })
}

/// Returns a copy of `p` with one more feedback turn.
pub fn append_feedback(p: &Prompt, previous_output: &str, reference: &Estimate) -> Result<Prompt> {
    if p.feedback.len() >= p.max_feedback {
        return Err(Error::FeedbackBudget(p.max_feedback));
    }
    let mut next = p.clone();
    let reference = libm::round(reference.value.max(0.0));
    next.feedback.push(FeedbackTurn {
        previous_output: previous_output.to_string(),
        reference,
        directive: directive(previous_output, reference),
    });
    Ok(next)
}

impl StatsSource for Prompt {
    fn stats_for(&self, table: &str, column: &str) -> Option<&ColumnStats> {
        self.columns
            .iter()
            .find(|c| c.table == table && c.column == column)
            .map(|c| &c.stats)
    }

    fn row_count(&self, table: &str) -> Option<f64> {
        self.columns
            .iter()
            .find(|c| c.table == table)
            .map(|c| c.stats.row_count as f64)
    }
}

/// Number rendering without exponent: integral values as integers.
struct Num(f64);

impl core::fmt::Display for Num {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let x = self.0;
        if !x.is_finite() {
            f.write_str("null")
        } else if x.fract() == 0.0 && x.abs() < 9.0e15 {
            write!(f, "{}", x as i64)
        } else {
            write!(f, "{x}")
        }
    }
}

fn json_str(out: &mut String, s: &str) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

fn json_value(out: &mut String, v: &Value) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Float(x) if x.is_finite() => {
            let _ = write!(out, "{}", FloatLit(*x));
        }
        Value::Float(_) => out.push_str("null"),
        Value::Text(s) => json_str(out, s),
    }
}

fn json_list<T>(out: &mut String, items: &[T], mut each: impl FnMut(&mut String, &T)) {
    out.push('[');
    for (i, it) in items.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        each(out, it);
    }
    out.push(']');
}

/// Canonical JSON text of a prompt. Equal prompts give identical bytes.
pub fn serialize_prompt(p: &Prompt) -> String {
    let mut o = String::with_capacity(1024);
    o.push_str("{\"instruction\":");
    json_str(&mut o, &p.instruction);
    o.push_str(",\"input\":{\"query\":");
    json_str(&mut o, &p.query_text);
    for (i, c) in p.columns.iter().enumerate() {
        let _ = write!(o, ",\"column_{}\":{{\"name\":", i + 1);
        json_str(&mut o, &c.name);
        o.push_str(",\"min\":");
        json_value(&mut o, &c.stats.min);
        o.push_str(",\"max\":");
        json_value(&mut o, &c.stats.max);
        let _ = write!(o, ",\"ndv\":{},\"mcv\":", c.stats.ndv);
        json_list(&mut o, &c.stats.mcv, |o, (v, n)| {
            o.push('[');
            json_value(o, v);
            let _ = write!(o, ",{n}]");
        });
        o.push_str(",\"histogram_bounds\":");
        json_list(&mut o, &c.stats.histogram_bounds, json_value);
        let _ = write!(o, ",\"rows\":{},\"nulls\":{}}}", c.stats.row_count, c.stats.null_count);
    }
    o.push_str(",\"estimates\":");
    json_list(&mut o, &p.estimates, |o, (s, v)| {
        o.push_str("{\"source\":");
        json_str(o, s.tag());
        let _ = write!(o, ",\"value\":{}}}", Num(*v));
    });
    o.push_str(",\"feedback\":");
    json_list(&mut o, &p.feedback, |o, f| {
        o.push_str("{\"previous_output\":");
        json_str(o, &f.previous_output);
        let _ = write!(o, ",\"reference\":{},\"directive\":", Num(f.reference));
        json_str(o, &f.directive);
        o.push('}');
    });
    if let Some(ex) = &p.fewshot {
        o.push_str(",\"examples\":");
        json_list(&mut o, ex, |o, e| {
            o.push_str("{\"query\":");
            json_str(o, &e.query);
            let _ = write!(o, ",\"cardinality\":{}}}", e.cardinality);
        });
    }
    o.push_str("}}");
    o
}
