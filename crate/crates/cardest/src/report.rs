//! Report and plot-data writers.

use std::collections::BTreeMap;

use cardest_core::bench::{E2EReport, QueryRecord};
use cardest_core::metrics::QErrorReport;
use serde::Serialize;

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// One row per estimator, breakdown group and quantile. The overall rows
/// have an empty `breakdown`.
pub fn qerror_csv(reports: &[QErrorReport]) -> String {
    let mut rows = Vec::new();
    for r in reports {
        let groups = std::iter::once(("", r)).chain(r.breakdown.iter().map(|(k, v)| (k.as_str(), v)));
        for (key, g) in groups {
            for (q, v) in &g.quantiles {
                rows.push(vec![
                    r.estimator.clone(),
                    r.family.clone(),
                    key.to_string(),
                    q.to_string(),
                    v.to_string(),
                    g.count.to_string(),
                ]);
            }
        }
    }
    csv_string(&["estimator", "family", "breakdown", "quantile", "qerror", "count"], rows)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// One JSON object per evaluated query.
pub fn traces_jsonl(records: &[QueryRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Inference and execution time per configuration (stacked bars).
pub fn e2e_csv(r: &E2EReport) -> String {
    let rows = r.rows.iter().map(|x| {
        vec![
            x.config.clone(),
            x.queries.to_string(),
            x.subqueries.to_string(),
            x.exec_cost.to_string(),
            x.exec_ms.to_string(),
            x.inference_ms.to_string(),
            x.total_ms.to_string(),
            x.routed_fraction.to_string(),
            r.theta.to_string(),
        ]
    });
    csv_string(
        &["config", "queries", "subqueries", "exec_cost", "exec_ms", "inference_ms", "total_ms", "routed_fraction", "theta"],
        rows,
    )
}

/// Q-error per quantile, one column per estimator.
pub fn quantile_table_csv(reports: &[QErrorReport]) -> String {
    let mut qs: Vec<f64> = reports.iter().flat_map(|r| r.quantiles.iter().map(|(q, _)| *q)).collect();
    qs.sort_by(f64::total_cmp);
    qs.dedup();
    let mut header = vec!["quantile"];
    header.extend(reports.iter().map(|r| r.estimator.as_str()));
    let rows = qs.iter().map(|&q| {
        let mut row = vec![q.to_string()];
        row.extend(reports.iter().map(|r| r.at(q).map(|v| v.to_string()).unwrap_or_default()));
        row
    });
    csv_string(&header, rows)
}

/// How many queries needed each number of self-correction turns, with the
/// median Q-error of each group.
pub fn iterations_csv(records: &[QueryRecord]) -> String {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(t) = &r.trace {
            groups.entry(t.iterations.len()).or_default().push(r.qerror);
        }
    }
    let total: usize = groups.values().map(Vec::len).sum();
    let rows = groups.into_iter().map(|(k, v)| {
        vec![
            k.to_string(),
            v.len().to_string(),
            (v.len() as f64 / total as f64).to_string(),
            cardest_core::metrics::median(&v).to_string(),
        ]
    });
    csv_string(&["iterations", "queries", "fraction", "median_qerror"], rows)
}
