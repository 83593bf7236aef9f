//! On-disk formats: catalog snapshots, workload files and model bundles.
//! Each is JSON-based and starts with a `format` tag and a `version`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cardest_core::numlm::{DigitModel, FeatureLayout, Hyper};
use cardest_core::sql::{parse_query, parse_write};
use cardest_core::workloads::{Family, Split, Statement, Workload, WorkloadItem};
use cardest_core::Catalog;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CATALOG_FORMAT: &str = "cardest-catalog";
pub const WORKLOAD_FORMAT: &str = "cardest-workload";
pub const MODEL_FORMAT: &str = "cardest-model";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Tag {
    format: String,
    version: u32,
}

fn check_tag(text: &str, want: &str) -> Result<(), String> {
    let tag: Tag = serde_json::from_str(text).map_err(|e| format!("not a {want} document: {e}"))?;
    if tag.format != want {
        return Err(format!("expected format `{want}`, found `{}`", tag.format));
    }
    if tag.version != VERSION {
        return Err(format!("unsupported {want} version {}", tag.version));
    }
    Ok(())
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct CatalogDoc<C> {
    format: String,
    version: u32,
    catalog: C,
}

pub fn catalog_to_json(c: &Catalog) -> String {
    let doc = CatalogDoc {
        format: CATALOG_FORMAT.into(),
        version: VERSION,
        catalog: c,
    };
    serde_json::to_string(&doc).expect("catalog serializes")
}

pub fn catalog_from_json(text: &str) -> Result<Catalog, String> {
    check_tag(text, CATALOG_FORMAT)?;
    let doc: CatalogDoc<Catalog> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    Ok(doc.catalog)
}

pub fn load_catalog(path: &Path) -> CliResult<Catalog> {
    catalog_from_json(&read_text(path)?).map_err(|m| CliError::format(path, m))
}

pub fn save_catalog(path: &Path, c: &Catalog) -> CliResult<()> {
    write_text(path, &catalog_to_json(c))
}

#[derive(Serialize, Deserialize)]
struct WorkloadHeader {
    format: String,
    version: u32,
    family: String,
    seed: u64,
    params: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_rows: Option<BTreeMap<String, Vec<u64>>>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    kind: String,
    sql: String,
    split: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tag: Option<String>,
}

/// One JSON header line, then one line per statement in order.
pub fn workload_to_jsonl(w: &Workload) -> String {
    let header = WorkloadHeader {
        format: WORKLOAD_FORMAT.into(),
        version: VERSION,
        family: w.family.tag().into(),
        seed: w.seed,
        params: w.params.clone(),
        initial_rows: w.initial_rows.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for it in &w.items {
        let (kind, sql) = match &it.statement {
            Statement::Query(q) => ("query", q.render()),
            Statement::Write(op) => ("write", op.to_string()),
        };
        let rec = Record {
            kind: kind.into(),
            sql,
            split: it.split.tag().into(),
            truth: it.truth,
            tag: it.tag.clone(),
        };
        let _ = writeln!(out, "{}", serde_json::to_string(&rec).expect("record serializes"));
    }
    out
}

/// Parses a workload file; statements are typed against `catalog`. Errors
/// carry the 1-based line number.
pub fn workload_from_jsonl(text: &str, catalog: &Catalog) -> Result<Workload, String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or("empty workload file")?;
    check_tag(first, WORKLOAD_FORMAT).map_err(|e| format!("line 1: {e}"))?;
    let h: WorkloadHeader = serde_json::from_str(first).map_err(|e| format!("line 1: {e}"))?;
    let family = Family::from_tag(&h.family).ok_or_else(|| format!("line 1: unknown family `{}`", h.family))?;
    let mut items = Vec::new();
    for (i, line) in lines {
        let at = |m: String| format!("line {}: {m}", i + 1);
        let r: Record = serde_json::from_str(line).map_err(|e| at(e.to_string()))?;
        let statement = match r.kind.as_str() {
            "query" => Statement::Query(parse_query(&r.sql, catalog).map_err(|e| at(e.to_string()))?),
            "write" => Statement::Write(parse_write(&r.sql, catalog).map_err(|e| at(e.to_string()))?),
            k => return Err(at(format!("unknown record kind `{k}`"))),
        };
        let split = Split::from_tag(&r.split).ok_or_else(|| at(format!("unknown split `{}`", r.split)))?;
        items.push(WorkloadItem {
            statement,
            truth: r.truth,
            split,
            tag: r.tag,
        });
    }
    Ok(Workload {
        family,
        seed: h.seed,
        params: h.params,
        initial_rows: h.initial_rows,
        items,
    })
}

pub fn load_workload(path: &Path, catalog: &Catalog) -> CliResult<Workload> {
    workload_from_jsonl(&read_text(path)?, catalog).map_err(|m| CliError::format(path, m))
}

pub fn save_workload(path: &Path, w: &Workload) -> CliResult<()> {
    write_text(path, &workload_to_jsonl(w))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleReplica {
    pub id: usize,
    pub seed: u64,
    /// Mean training loss per epoch.
    pub trace: Vec<f64>,
    pub model: DigitModel,
}

/// Bootstrap replicas of the digit model with the settings they were
/// trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub version: u32,
    pub hyper: Hyper,
    pub feature_len: usize,
    pub replicas: Vec<BundleReplica>,
}

impl ModelBundle {
    pub fn new(hyper: Hyper, replicas: Vec<BundleReplica>) -> Self {
        ModelBundle {
            format: MODEL_FORMAT.into(),
            version: VERSION,
            hyper,
            feature_len: FeatureLayout::LEN,
            replicas,
        }
    }
}

pub fn bundle_from_json(text: &str) -> Result<ModelBundle, String> {
    check_tag(text, MODEL_FORMAT)?;
    let b: ModelBundle = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if b.feature_len != FeatureLayout::LEN {
        return Err(format!("bundle built for {} features, this build uses {}", b.feature_len, FeatureLayout::LEN));
    }
    if b.replicas.is_empty() {
        return Err("bundle holds no replicas".into());
    }
    for r in &b.replicas {
        let expected = DigitModel::zeros(r.model.input_dim, r.model.hidden).params.len();
        if r.model.input_dim != b.feature_len || r.model.params.len() != expected || !r.model.is_finite() {
            return Err(format!("replica {} is inconsistent", r.id));
        }
    }
    Ok(b)
}

pub fn load_bundle(path: &Path) -> CliResult<ModelBundle> {
    bundle_from_json(&read_text(path)?).map_err(|m| CliError::format(path, m))
}

pub fn save_bundle(path: &Path, b: &ModelBundle) -> CliResult<()> {
    write_text(path, &serde_json::to_string(b).expect("bundle serializes"))
}
