//! Benchmark driver: Q-error reports for an estimation pipeline with
//! ablation toggles, and simulated end-to-end time with cost-based routing.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, DEFAULT_BUCKETS, DEFAULT_MCV};
use crate::ensemble::{confidence_score, interval_from_runs, select_most_confident, DEFAULT_EPSILON, DEFAULT_LEVEL, DEFAULT_RUNS};
use crate::error::{Error, Result};
use crate::estimators::{estimate_independence, estimate_ndv_from_stats, estimate_sampling, Estimate, EstimateSource};
use crate::exec::{apply_write, execute_count};
use crate::inference::{
    calibrate_threshold, choose_plan, cost_plan, parse_estimate, plan_cost, route, self_correct, Backend, CorrectionTrace,
    DecodeOptions, Route, CHEAP_LATENCY_MS, CI_TEMPERATURE, DEFAULT_MAX_ITERATIONS,
};
use crate::metrics::{percentile_report, qerror, QErrorReport, REPORT_QUANTILES};
use crate::prompt::{build_prompt, FewShot, PromptOptions};
use crate::sql::QueryAst;
use crate::workloads::{initial_state, Split, Statement, Workload};

/// Ablation switches; all on (few-shot off) is the full pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub self_correction: bool,
    pub other_estimates: bool,
    pub coarse_stats: bool,
    pub fewshot: bool,
    pub bootstrap: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Ablation {
            self_correction: true,
            other_estimates: true,
            coarse_stats: true,
            fewshot: false,
            bootstrap: true,
        }
    }
}

/// The non-LLM estimator used inside prompts and as self-correction
/// reference, or run on its own as a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Baseline {
    Independence,
    Sampling { rate: f64, seed: u64 },
    /// NDV from statistics for DISTINCT queries, independence otherwise.
    NdvStats,
    Oracle,
}

impl Baseline {
    pub fn source(&self) -> EstimateSource {
        match self {
            Baseline::Independence => EstimateSource::PgIndependence,
            Baseline::Sampling { .. } => EstimateSource::Sampling,
            Baseline::NdvStats => EstimateSource::NdvStats,
            Baseline::Oracle => EstimateSource::Oracle,
        }
    }

    /// `truth` is only read by the oracle.
    pub fn estimate(&self, db: &Catalog, q: &QueryAst, truth: Option<u64>) -> Result<Estimate> {
        match *self {
            Baseline::Independence => estimate_independence(db, q),
            Baseline::Sampling { rate, seed } => estimate_sampling(db, q, rate, seed),
            Baseline::NdvStats => match &q.distinct_on {
                Some(d) if q.tables.len() == 1 && q.filters.is_empty() => {
                    let table = q.table_of(&d.alias).ok_or_else(|| Error::UnknownTable(d.alias.clone()))?;
                    Ok(estimate_ndv_from_stats(db.column_stats(table, &d.column)?))
                }
                _ => estimate_independence(db, q),
            },
            Baseline::Oracle => {
                let t = match truth {
                    Some(t) => t,
                    None => execute_count(db, q)?,
                };
                Ok(Estimate::new(t as f64, EstimateSource::Oracle))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    pub reference: Baseline,
    pub tau: f64,
    pub i_max: usize,
    pub ablation: Ablation,
    /// Worked examples used when few-shot is on.
    pub fewshot: Vec<FewShot>,
    /// Stochastic runs per replica for the confidence interval.
    pub runs: usize,
    pub level: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            reference: Baseline::Independence,
            tau: 10.0,
            i_max: DEFAULT_MAX_ITERATIONS,
            ablation: Ablation::default(),
            fewshot: Vec::new(),
            runs: DEFAULT_RUNS,
            level: DEFAULT_LEVEL,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
        }
    }
}

pub enum Pipeline<'a> {
    Baseline(Baseline),
    /// One backend per bootstrap replica; without bootstrap only the first
    /// is used.
    Llm {
        replicas: Vec<&'a dyn Backend>,
        config: LlmConfig,
    },
}

impl Pipeline<'_> {
    pub fn name(&self) -> String {
        match self {
            Pipeline::Baseline(b) => b.source().tag().to_string(),
            Pipeline::Llm { replicas, .. } => replicas.first().map(|r| r.source().tag().to_string()).unwrap_or_default(),
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            Pipeline::Baseline(Baseline::Sampling { rate, .. }) if !(*rate > 0.0 && *rate <= 1.0) => {
                Err(Error::InvalidArgument(format!("sampling rate {rate} outside (0, 1]")))
            }
            Pipeline::Llm { replicas, config } => {
                if replicas.is_empty() {
                    return Err(Error::InvalidArgument("LLM pipeline without a backend".into()));
                }
                if !(config.tau >= 1.0) {
                    return Err(Error::InvalidArgument(format!("threshold {} below 1", config.tau)));
                }
                if config.ablation.bootstrap && replicas.len() > 1 && config.runs < 2 {
                    return Err(Error::InvalidArgument("bootstrap selection needs at least two runs".into()));
                }
                if config.ablation.fewshot && config.fewshot.is_empty() {
                    return Err(Error::InvalidArgument("few-shot enabled without examples".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub index: usize,
    pub query: String,
    pub truth: u64,
    pub estimate: Estimate,
    pub qerror: f64,
    pub tag: Option<String>,
    /// Backend calls made for this query.
    pub calls: usize,
    pub inference_ms: f64,
    /// 0-based replica picked by confidence.
    pub replica: Option<usize>,
    pub trace: Option<CorrectionTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub report: QErrorReport,
    pub records: Vec<QueryRecord>,
}

/// Wall-clock source in milliseconds; without one, inference time is the
/// sum of the backends' simulated latencies.
pub type Clock<'a> = &'a dyn Fn() -> f64;

/// Runs every test-split query of `w` through `pipeline`. Write workloads
/// start from their initial state and apply writes in order, leaving the
/// statistics as they were at the start.
pub fn run_benchmark(catalog: &Catalog, w: &Workload, pipeline: &Pipeline<'_>, clock: Option<Clock<'_>>) -> Result<BenchResult> {
    pipeline.check()?;
    let mut db = initial_state(catalog, w, DEFAULT_BUCKETS, DEFAULT_MCV)?;
    let mut records = Vec::new();
    for (index, item) in w.items.iter().enumerate() {
        let q = match &item.statement {
            Statement::Write(op) => {
                apply_write(&mut db, op)?;
                continue;
            }
            Statement::Query(q) => q,
        };
        if item.split != Split::Test {
            continue;
        }
        let truth = match item.truth {
            Some(t) => t,
            None => execute_count(&db, q)?,
        };
        let started = clock.map(|c| c());
        let mut rec = match pipeline {
            Pipeline::Baseline(b) => {
                let estimate = b.estimate(&db, q, Some(truth))?;
                QueryRecord {
                    index,
                    query: q.render(),
                    truth,
                    qerror: 0.0,
                    estimate,
                    tag: item.tag.clone(),
                    calls: 0,
                    inference_ms: if *b == Baseline::Oracle { 0.0 } else { CHEAP_LATENCY_MS },
                    replica: None,
                    trace: None,
                }
            }
            Pipeline::Llm { replicas, config } => llm_estimate(&db, q, truth, replicas, config, index)?,
        };
        if let (Some(c), Some(s)) = (clock, started) {
            rec.inference_ms = c() - s;
        }
        rec.qerror = qerror(rec.estimate.value, truth as f64);
        rec.tag = item.tag.clone();
        records.push(rec);
    }
    let report = summarize(&records, &pipeline.name(), w.family.tag())?;
    Ok(BenchResult { report, records })
}

fn llm_estimate(
    db: &Catalog,
    q: &QueryAst,
    truth: u64,
    replicas: &[&dyn Backend],
    cfg: &LlmConfig,
    index: usize,
) -> Result<QueryRecord> {
    let ab = cfg.ablation;
    let reference = cfg.reference.estimate(db, q, Some(truth))?;
    let opts = PromptOptions {
        include_stats: ab.coarse_stats,
        include_estimates: ab.other_estimates,
        fewshot: if ab.fewshot { Some(cfg.fewshot.clone()) } else { None },
        max_feedback: cfg.i_max,
    };
    let prompt = build_prompt(q, db, core::slice::from_ref(&reference), &opts)?;
    let mut calls = 0;
    let mut latency = 0.0;
    let query_seed = cfg.seed ^ crate::inference::mix(index as u64);
    let chosen = if ab.bootstrap && replicas.len() > 1 {
        let mut scored = Vec::with_capacity(replicas.len());
        for (r, b) in replicas.iter().enumerate() {
            let mut runs = Vec::with_capacity(cfg.runs);
            for k in 0..cfg.runs {
                let o = DecodeOptions {
                    temperature: CI_TEMPERATURE,
                    seed: crate::inference::mix(query_seed ^ ((r as u64) << 32) ^ k as u64),
                };
                let raw = b.complete(&prompt, &o)?;
                calls += 1;
                latency += b.latency_ms().unwrap_or(0.0);
                runs.push(parse_estimate(&raw, b.source()).map(|e| e.value).unwrap_or(f64::INFINITY));
            }
            let (lo, hi) = interval_from_runs(&runs, cfg.level)?;
            let mut e = Estimate::new(0.0, b.source());
            e.ci = Some((lo, hi));
            e.confidence = Some(if hi.is_finite() { confidence_score(lo, hi, cfg.epsilon) } else { 0.0 });
            scored.push(e);
        }
        select_most_confident(&scored, cfg.epsilon)?.0
    } else {
        0
    };
    let backend = replicas[chosen];
    let i_max = if ab.self_correction { cfg.i_max } else { 0 };
    let trace = self_correct(backend, &prompt, &reference, cfg.tau, i_max, &DecodeOptions::greedy())?;
    calls += trace.iterations.len();
    latency += backend.latency_ms().unwrap_or(0.0) * trace.iterations.len() as f64 + CHEAP_LATENCY_MS;
    Ok(QueryRecord {
        index,
        query: q.render(),
        truth,
        estimate: trace.final_estimate.clone(),
        qerror: 0.0,
        tag: None,
        calls,
        inference_ms: latency,
        replica: if ab.bootstrap && replicas.len() > 1 { Some(chosen) } else { None },
        trace: Some(trace),
    })
}

/// Percentile report with breakdowns by tag and by correction turns.
pub fn summarize(records: &[QueryRecord], estimator: &str, family: &str) -> Result<QErrorReport> {
    let errs: Vec<f64> = records.iter().map(|r| r.qerror).collect();
    let mut report = percentile_report(&errs, &REPORT_QUANTILES, estimator, family)?;
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(t) = &r.tag {
            groups.entry(format!("tag={t}")).or_default().push(r.qerror);
        }
        if let Some(tr) = &r.trace {
            groups.entry(format!("iterations={}", tr.iterations.len())).or_default().push(r.qerror);
        }
    }
    for (k, v) in groups {
        report.breakdown.insert(k, percentile_report(&v, &REPORT_QUANTILES, estimator, family)?);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub cheap_ms: f64,
    pub expensive_ms: f64,
    /// Milliseconds per unit of plan cost.
    pub cost_unit_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2ERow {
    pub config: String,
    pub queries: usize,
    pub subqueries: usize,
    /// Plan cost under true cardinalities of the plans chosen under estimates.
    pub exec_cost: f64,
    pub exec_ms: f64,
    pub inference_ms: f64,
    pub total_ms: f64,
    pub routed_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2EReport {
    pub theta: f64,
    pub rows: Vec<E2ERow>,
}

impl E2EReport {
    pub fn row(&self, config: &str) -> Option<&E2ERow> {
        self.rows.iter().find(|r| r.config == config)
    }
}

/// Per sub-query numbers shared by every configuration.
struct SubInfo {
    key: String,
    cheap: f64,
    expensive: f64,
    truth: f64,
    route: Route,
}

/// Router threshold: the given percentile of cheap-estimator plan costs
/// over every sub-query of `queries`.
pub fn calibrate_theta(queries: &[QueryAst], cheap: &mut dyn FnMut(&QueryAst) -> Result<f64>, percentile: f64) -> Result<f64> {
    let mut costs = Vec::new();
    for q in queries {
        for s in q.without_distinct().decompose()? {
            costs.push(plan_cost(&s, cheap)?);
        }
    }
    calibrate_threshold(&costs, percentile)
}

/// Simulated end-to-end time of `queries` under four estimate assignments:
/// `all-cheap`, `all-expensive`, `routed` (expensive iff the sub-query's
/// cheap plan cost exceeds `theta`) and `oracle`. Each query's plan is
/// chosen under the configuration's estimates and costed under true
/// cardinalities. Routing needs cheap estimates of every sub-query, so the
/// routed configuration pays the cheap latency for all of them.
pub fn simulate_e2e(
    queries: &[QueryAst],
    cheap: &mut dyn FnMut(&QueryAst) -> Result<f64>,
    expensive: &mut dyn FnMut(&QueryAst) -> Result<f64>,
    truth: &mut dyn FnMut(&QueryAst) -> Result<f64>,
    theta: f64,
    latency: &LatencyModel,
) -> Result<E2EReport> {
    const CONFIGS: [&str; 4] = ["all-cheap", "all-expensive", "routed", "oracle"];
    let mut rows: Vec<E2ERow> = CONFIGS
        .iter()
        .map(|c| E2ERow {
            config: c.to_string(),
            queries: 0,
            subqueries: 0,
            exec_cost: 0.0,
            exec_ms: 0.0,
            inference_ms: 0.0,
            total_ms: 0.0,
            routed_fraction: 0.0,
        })
        .collect();
    let mut routed = 0usize;
    let mut total_subs = 0usize;
    for q in queries {
        let q = q.without_distinct();
        let mut infos = Vec::new();
        for s in q.decompose()? {
            let c = cheap(&s)?;
            let cost = plan_cost(&s, cheap)?;
            infos.push(SubInfo {
                key: s.render(),
                cheap: c,
                expensive: expensive(&s)?,
                truth: truth(&s)?,
                route: route(cost, theta),
            });
        }
        let n = infos.len();
        total_subs += n;
        let n_exp = infos.iter().filter(|i| i.route == Route::Expensive).count();
        routed += n_exp;
        for (ci, row) in rows.iter_mut().enumerate() {
            let pick = |i: &SubInfo| match ci {
                0 => i.cheap,
                1 => i.expensive,
                2 if i.route == Route::Expensive => i.expensive,
                2 => i.cheap,
                _ => i.truth,
            };
            let est: BTreeMap<&str, f64> = infos.iter().map(|i| (i.key.as_str(), pick(i))).collect();
            let mut lookup = |s: &QueryAst| est.get(s.render().as_str()).copied().ok_or_else(|| Error::InvalidArgument(format!("no estimate for `{s}`")));
            let order = choose_plan(&q, &mut lookup)?;
            let cost = cost_plan(&q, &order, truth)?;
            row.queries += 1;
            row.subqueries += n;
            row.exec_cost += cost;
            row.inference_ms += match ci {
                0 => n as f64 * latency.cheap_ms,
                1 => n as f64 * latency.expensive_ms,
                2 => n as f64 * latency.cheap_ms + n_exp as f64 * latency.expensive_ms,
                _ => 0.0,
            };
        }
    }
    for (ci, row) in rows.iter_mut().enumerate() {
        row.exec_ms = row.exec_cost * latency.cost_unit_ms;
        row.total_ms = row.exec_ms + row.inference_ms;
        row.routed_fraction = match ci {
            1 => 1.0,
            2 if total_subs > 0 => routed as f64 / total_subs as f64,
            _ => 0.0,
        };
    }
    Ok(E2EReport { theta, rows })
}
