//! CSV tables and the TOML schema file that describes them.
//!
//! ```toml
//! [[table]]
//! name = "title"
//! file = "title.csv"
//! columns = [{ name = "id", type = "int64" }, { name = "kind", type = "text" }]
//!
//! [[join]]
//! left = "title.id"
//! right = "cast_info.movie_id"
//! ```

use std::path::Path;

use cardest_core::{Catalog, Column, ColumnType, TableData, Value};
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::formats::read_text;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnDecl {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableDecl {
    pub name: String,
    /// Relative to the data directory.
    pub file: String,
    pub columns: Vec<ColumnDecl>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JoinDecl {
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaFile {
    #[serde(default)]
    pub table: Vec<TableDecl>,
    #[serde(default)]
    pub join: Vec<JoinDecl>,
}

pub fn parse_schema(text: &str) -> Result<SchemaFile, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

fn columns_of(decl: &[ColumnDecl]) -> Result<Vec<Column>, String> {
    decl.iter()
        .map(|c| {
            ColumnType::from_name(&c.ty)
                .map(|t| Column::new(c.name.clone(), t))
                .ok_or_else(|| format!("column `{}`: unknown type `{}`", c.name, c.ty))
        })
        .collect()
}

fn cell(raw: &str, ty: ColumnType) -> Value {
    if raw.is_empty() {
        return Value::Null;
    }
    match ty {
        ColumnType::Text => Value::Text(raw.to_string()),
        ColumnType::Int64 => raw.trim().parse().map(Value::Int).unwrap_or(Value::Null),
        ColumnType::Float64 => match raw.trim().parse::<f64>() {
            Ok(x) if x.is_finite() => Value::Float(x),
            _ => Value::Null,
        },
    }
}

/// Reads one comma-separated file with a header row equal to the declared
/// column names. Empty cells and numeric cells that do not parse become
/// NULL; row order is kept.
pub fn ingest_table(path: &Path, name: &str, columns: Vec<Column>) -> CliResult<TableData> {
    let mut table = TableData::new(name, columns)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            k => CliError::format(path, format!("{k:?}")),
        })?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::format(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let declared: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
    if header != declared {
        return Err(CliError::format(
            path,
            format!("header [{}] does not match schema [{}]", header.join(","), declared.join(",")),
        ));
    }
    let types: Vec<ColumnType> = table.columns.iter().map(|c| c.ty).collect();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::format(path, e))?;
        if rec.len() != types.len() {
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            return Err(CliError::format(path, format!("line {line}: expected {} fields, found {}", types.len(), rec.len())));
        }
        let row = rec.iter().zip(&types).map(|(raw, &ty)| cell(raw, ty)).collect();
        table.push_row(row)?;
    }
    Ok(table)
}

fn split_ref(s: &str) -> Result<(&str, &str), String> {
    s.split_once('.')
        .filter(|(t, c)| !t.is_empty() && !c.is_empty())
        .ok_or_else(|| format!("join side `{s}` is not `table.column`"))
}

/// Loads every table of `schema_path` from `data_dir`, declares the joins
/// and builds statistics.
pub fn ingest_dir(data_dir: &Path, schema_path: &Path, buckets: usize, mcv: usize) -> CliResult<Catalog> {
    let schema = parse_schema(&read_text(schema_path)?).map_err(|m| CliError::format(schema_path, m))?;
    let mut catalog = Catalog::new();
    for t in &schema.table {
        let cols = columns_of(&t.columns).map_err(|m| CliError::format(schema_path, format!("table `{}`: {m}", t.name)))?;
        catalog.add_table(ingest_table(&data_dir.join(&t.file), &t.name, cols)?)?;
    }
    for j in &schema.join {
        let (lt, lc) = split_ref(&j.left).map_err(|m| CliError::format(schema_path, m))?;
        let (rt, rc) = split_ref(&j.right).map_err(|m| CliError::format(schema_path, m))?;
        catalog.declare_join(lt, lc, rt, rc)?;
    }
    catalog.build_all_stats(buckets, mcv)?;
    Ok(catalog)
}
