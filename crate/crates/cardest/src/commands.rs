//! What each subcommand does once its arguments are resolved.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cardest_core::bench::{run_benchmark, simulate_e2e, BenchResult, E2EReport, LatencyModel, QueryRecord};
use cardest_core::catalog::{DEFAULT_BUCKETS, DEFAULT_MCV};
use cardest_core::datagen::{synthetic_db, SyntheticConfig};
use cardest_core::estimators::estimate_independence;
use cardest_core::exec::execute_count;
use cardest_core::inference::{
    calibrate_threshold, plan_cost, self_correct, Backend, DecodeOptions, CHEAP_LATENCY_MS, DEFAULT_ROUTE_PERCENTILE,
};
use cardest_core::metrics::QErrorReport;
use cardest_core::numlm::{Hyper, Optimizer};
use cardest_core::prompt::{build_prompt, serialize_prompt};
use cardest_core::sql::parse_query;
use cardest_core::workloads::{
    assign_splits, gen_distinct, gen_dynamic, gen_like, gen_spj, split_by_filters, split_by_joins, Split, Statement, Workload,
    WorkloadItem,
};
use cardest_core::{Catalog, Estimate, QueryAst};

use crate::cli::*;
use crate::error::{CliError, CliResult};
use crate::formats::*;
use crate::ingest::ingest_dir;
use crate::pipeline::{choose_tau, fewshot_examples, llm_config, make_pipeline, workload_truths, Backends, PipelineFile};
use crate::remote::RemoteConfig;
use crate::report::*;
use crate::training::{examples_from_workload, train_replicas, ExampleOptions};

/// Milliseconds of simulated execution per unit of plan cost (one tuple
/// read or produced).
pub const DEFAULT_COST_UNIT_MS: f64 = 1e-4;

fn need<T>(v: Option<T>, what: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("missing {what}")))
}

fn catalog_path(r: &Resolved, p: &Option<PathBuf>) -> PathBuf {
    r.path(p.as_deref().unwrap_or(Path::new("catalog.json")))
}

fn record_replay(r: &Resolved, out: &Path) -> CliResult<()> {
    let mut p = out.as_os_str().to_owned();
    p.push(".run.toml");
    write_text(Path::new(&p), &replay_config(r))
}

pub fn run(r: &Resolved) -> CliResult<()> {
    match &r.command {
        Command::Ingest(a) => ingest(r, a),
        Command::Synth(a) => synth(r, a),
        Command::Stats(a) => stats(r, a),
        Command::Gen(a) => gen(r, a),
        Command::Train(a) => train_cmd(r, a),
        Command::Estimate(a) => estimate(r, a),
        Command::Bench(a) => bench(r, a),
        Command::E2e(a) => e2e(r, a),
        Command::PlotData(a) => plot_data(r, a),
    }
}

fn ingest(r: &Resolved, a: &IngestArgs) -> CliResult<()> {
    let data = r.path(&need(a.data_dir.clone(), "data directory")?);
    let schema = r.path(&need(a.schema.clone(), "schema file")?);
    let out = r.path(a.out.as_deref().unwrap_or(Path::new("catalog.json")));
    let c = ingest_dir(&data, &schema, a.buckets.unwrap_or(DEFAULT_BUCKETS), a.mcv.unwrap_or(DEFAULT_MCV))?;
    save_catalog(&out, &c)?;
    record_replay(r, &out)?;
    for (name, t) in &c.tables {
        println!("{name}\t{} rows", t.len());
    }
    Ok(())
}

fn synth(r: &Resolved, a: &SynthArgs) -> CliResult<()> {
    let d = SyntheticConfig::default();
    let cfg = SyntheticConfig {
        tables: a.tables.unwrap_or(d.tables),
        rows: a.rows.unwrap_or(d.rows),
        zipf: a.zipf.unwrap_or(d.zipf),
        seed: a.seed.unwrap_or(d.seed),
    };
    let out = r.path(a.out.as_deref().unwrap_or(Path::new("catalog.json")));
    let c = synthetic_db(&cfg)?;
    save_catalog(&out, &c)?;
    record_replay(r, &out)?;
    for (name, t) in &c.tables {
        println!("{name}\t{} rows", t.len());
    }
    Ok(())
}

fn stats(r: &Resolved, a: &StatsArgs) -> CliResult<()> {
    let input = catalog_path(r, &a.catalog);
    let out = a.out.as_deref().map(|p| r.path(p)).unwrap_or_else(|| input.clone());
    let mut c = load_catalog(&input)?;
    c.build_all_stats(a.buckets.unwrap_or(DEFAULT_BUCKETS), a.mcv.unwrap_or(DEFAULT_MCV))?;
    save_catalog(&out, &c)?;
    record_replay(r, &out)?;
    println!("table\tcolumn\ttype\trows\tnulls\tndv\tmcv\tbounds");
    for (t, cols) in &c.stats {
        for (col, s) in cols {
            println!(
                "{t}\t{col}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.ty.name(),
                s.row_count,
                s.null_count,
                s.ndv,
                s.mcv.len(),
                s.histogram_bounds.len()
            );
        }
    }
    Ok(())
}

fn parse_ratio(s: &str) -> CliResult<(u32, u32, u32)> {
    let parts: Vec<u32> = s
        .split(':')
        .map(|p| p.trim().parse::<u32>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("ratio `{s}` is not insert:delete:update")))?;
    match parts[..] {
        [i, d, u] if i + d + u > 0 => Ok((i, d, u)),
        _ => Err(CliError::Usage(format!("ratio `{s}` is not insert:delete:update"))),
    }
}

fn gen(r: &Resolved, a: &GenArgs) -> CliResult<()> {
    let kind = need(a.kind, "workload kind")?;
    let out = r.path(&need(a.out.clone(), "--out")?);
    let seed = a.seed.unwrap_or(0);
    let ratio = parse_ratio(a.ratio.as_deref().unwrap_or("2:1:1"))?;
    let catalog = load_catalog(&catalog_path(r, &a.catalog))?;
    let base = |c: &Catalog| -> CliResult<Workload> { load_workload(&r.path(&need(a.base.clone(), "--base")?), c) };
    let w = match kind {
        GenKind::Spj => {
            // the default join count shrinks to fit small schemas; an explicit one is taken as is
            let max_joins = a.max_joins.unwrap_or_else(|| 2.min(catalog.tables.len().saturating_sub(1)));
            let mut w = gen_spj(&catalog, a.count.unwrap_or(1000), max_joins, a.max_filters.unwrap_or(3), seed)?;
            let train = a.train_frac.unwrap_or(0.8);
            let val = a.validation_frac.unwrap_or(0.1);
            if !(train >= 0.0 && val >= 0.0 && train + val <= 1.0) {
                return Err(CliError::Usage("train and validation shares must be >= 0 and sum to <= 1".into()));
            }
            assign_splits(&mut w, train, val, seed);
            w.params.insert("train_frac".into(), train.to_string());
            w.params.insert("validation_frac".into(), val.to_string());
            w
        }
        GenKind::Like => gen_like(
            &catalog,
            &need(a.table.clone(), "--table")?,
            &need(a.column.clone(), "--column")?,
            a.count.unwrap_or(100),
            seed,
        )?,
        GenKind::Distinct => gen_distinct(&catalog, &base(&catalog)?, seed)?,
        GenKind::Dynamic => {
            let b = base(&catalog)?;
            let queries: Vec<QueryAst> = b.queries().map(|(q, _)| q.clone()).collect();
            let n = a.writes.unwrap_or(queries.len());
            gen_dynamic(&catalog, &queries, ratio, n, DEFAULT_BUCKETS, DEFAULT_MCV, seed)?
        }
        GenKind::ShiftSplit => {
            let b = base(&catalog)?;
            let lo = a.lo.unwrap_or(3);
            let hi = a.hi.unwrap_or(lo);
            let (mut train, test) = match need(a.by, "--by")? {
                ShiftBy::Joins => split_by_joins(&b, lo, hi),
                ShiftBy::Filters => split_by_filters(&b, lo, hi),
            };
            train.items.extend(test.items);
            train
        }
    };
    save_workload(&out, &w)?;
    record_replay(r, &out)?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for it in &w.items {
        let k = match &it.statement {
            Statement::Query(_) => it.split.tag(),
            Statement::Write(op) => op.kind(),
        };
        *counts.entry(k).or_default() += 1;
    }
    for (k, n) in counts {
        println!("{k}\t{n}");
    }
    Ok(())
}

fn train_cmd(r: &Resolved, a: &TrainArgs) -> CliResult<()> {
    let catalog = load_catalog(&catalog_path(r, &a.catalog))?;
    let w = load_workload(&r.path(&need(a.workload.clone(), "--workload")?), &catalog)?;
    let out = r.path(a.out.as_deref().unwrap_or(Path::new("model.json")));
    let d = Hyper::default();
    let hyper = Hyper {
        epochs: a.epochs.unwrap_or(d.epochs),
        lr: a.lr.unwrap_or(d.lr),
        hidden: a.hidden.unwrap_or(d.hidden),
        seed: a.seed.unwrap_or(d.seed),
        batch_size: a.batch_size.unwrap_or(d.batch_size),
        optimizer: match a.optimizer {
            Some(OptimizerArg::Adam) => Optimizer::Adam,
            Some(OptimizerArg::Sgd) => Optimizer::Sgd,
            None => d.optimizer,
        },
        ..d
    };
    let mut opts = ExampleOptions::default();
    opts.feedback_copies = !a.no_feedback_copies;
    opts.prompt.include_stats = !a.no_stats;
    opts.prompt.include_estimates = !a.no_estimates;
    let set = examples_from_workload(&catalog, &w, Split::Train, &opts)?;
    for (i, g) in &set.truncated {
        log::warn!("statement {}: more {g} than feature slots; extra entries ignored", i + 1);
    }
    let replicas = a.replicas.unwrap_or(cardest_core::ensemble::DEFAULT_REPLICAS);
    let trained = train_replicas(&set.examples, replicas, hyper.seed, &hyper, r.jobs)?;
    let bundle = ModelBundle::new(
        hyper,
        trained
            .into_iter()
            .map(|rep| BundleReplica {
                id: rep.id,
                seed: rep.seed,
                trace: rep.model.trace,
                model: rep.model.model,
            })
            .collect(),
    );
    save_bundle(&out, &bundle)?;
    record_replay(r, &out)?;
    println!("examples\t{}", set.examples.len());
    for rep in &bundle.replicas {
        println!("replica {}\tseed {}\tfinal loss {:.4}", rep.id, rep.seed, rep.trace.last().copied().unwrap_or(f64::NAN));
    }
    Ok(())
}

fn estimate(r: &Resolved, a: &EstimateArgs) -> CliResult<()> {
    let catalog = load_catalog(&catalog_path(r, &a.catalog))?;
    let sql = need(a.query.clone(), "--query")?;
    let q = parse_query(&sql, &catalog)?;
    let backend = a.backend.unwrap_or(BackendKind::Pg);
    let mut p = PipelineFile {
        backend,
        sampling_rate: a.sampling_rate.unwrap_or(0.01),
        seed: a.seed.unwrap_or(0),
        tau: Some(a.self_correct.unwrap_or(1.0)),
        self_correction: a.self_correct.is_some(),
        other_estimates: !a.no_estimates,
        coarse_stats: !a.no_stats,
        bootstrap: true,
        model: a.model.clone(),
        ..PipelineFile::default()
    };
    if let Some(m) = a.max_iterations {
        p.i_max = m;
    }
    if backend == BackendKind::Remote {
        let path = r.path(&need(a.remote.clone(), "--remote")?);
        p.remote = Some(
            toml::from_str::<RemoteConfig>(&read_text(&path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
        );
    }
    p.validate().map_err(CliError::Usage)?;
    if a.show_prompt && p.baseline().is_none() {
        let reference = p.reference_baseline().estimate(&catalog, &q, None)?;
        let prompt = build_prompt(&q, &catalog, std::slice::from_ref(&reference), &p.prompt_options(None))?;
        println!("{}", serialize_prompt(&prompt));
    }
    let truth_needed = matches!(backend, BackendKind::Mock | BackendKind::Oracle);
    let truth = if truth_needed { Some(execute_count(&catalog, &q)?) } else { None };
    let w = Workload {
        family: cardest_core::workloads::Family::Spj,
        seed: 0,
        params: BTreeMap::new(),
        initial_rows: None,
        items: vec![WorkloadItem {
            statement: Statement::Query(q.clone()),
            truth,
            split: Split::Test,
            tag: None,
        }],
    };
    let backends = Backends::build(&p, |x| r.path(x), || {
        Ok(BTreeMap::from([(q.render(), truth.unwrap_or(0) as f64)]))
    })?;
    let tau = p.tau.unwrap_or(10.0);
    let pipeline = make_pipeline(&p, &backends, llm_config(&p, tau, Vec::new()));
    let res = match pipeline {
        cardest_core::bench::Pipeline::Baseline(b) => {
            let e = b.estimate(&catalog, &q, truth)?;
            println!("{}", e.value);
            return Ok(());
        }
        ref llm => single_estimate(&catalog, &w, llm)?,
    };
    let rec = &res.records[0];
    println!("{}", rec.estimate.value);
    if let Some(t) = &rec.trace {
        for (i, turn) in t.iterations.iter().enumerate() {
            eprintln!(
                "turn {}\toutput {:?}\treference {}\tratio {}",
                i + 1,
                turn.raw,
                turn.reference,
                turn.ratio.map(|x| x.to_string()).unwrap_or_else(|| "-".into())
            );
        }
        if t.exhausted {
            eprintln!("self-correction budget exhausted");
        }
    }
    Ok(())
}

/// `run_benchmark` over a one-query workload without the exact count: the
/// record's truth (used only for its Q-error) is not reported.
fn single_estimate(catalog: &Catalog, w: &Workload, p: &cardest_core::bench::Pipeline<'_>) -> CliResult<BenchResult> {
    let mut w = w.clone();
    if w.items[0].truth.is_none() {
        w.items[0].truth = Some(0);
    }
    Ok(run_benchmark(catalog, &w, p, None)?)
}

fn wall_clock() -> impl Fn() -> f64 {
    let t0 = Instant::now();
    move || t0.elapsed().as_secs_f64() * 1e3
}

/// Backends, threshold and few-shot examples for a pipeline file against a
/// workload.
struct Prepared {
    file: PipelineFile,
    backends: Backends,
    tau: f64,
    fewshot: Vec<cardest_core::prompt::FewShot>,
}

fn prepare(r: &Resolved, path: &Path, catalog: &Catalog, w: &Workload, extra_truths: &[QueryAst]) -> CliResult<Prepared> {
    let file = PipelineFile::load(path)?;
    let backends = Backends::build(&file, |x| r.path(x), || {
        let mut t = workload_truths(catalog, w)?;
        for q in extra_truths {
            let k = q.render();
            if let std::collections::btree_map::Entry::Vacant(e) = t.entry(k) {
                e.insert(execute_count(catalog, q)? as f64);
            }
        }
        Ok(t)
    })?;
    let fewshot = if file.fewshot { fewshot_examples(w, file.fewshot_count) } else { Vec::new() };
    if file.fewshot && fewshot.is_empty() {
        return Err(CliError::Config("few-shot needs train-split queries with truths".into()));
    }
    let tau = match backends.refs().first() {
        Some(b) => choose_tau(&file, *b, catalog, w, &fewshot)?,
        None => file.tau.unwrap_or(10.0),
    };
    Ok(Prepared {
        file,
        backends,
        tau,
        fewshot,
    })
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    p.with_file_name(format!("{stem}{suffix}"))
}

fn print_report(rep: &QErrorReport) {
    let cols: Vec<String> = rep.quantiles.iter().map(|(q, v)| format!("p{q}={v:.3}")).collect();
    println!("{}\t{}\tn={}\t{}", rep.estimator, rep.family, rep.count, cols.join("\t"));
}

fn bench(r: &Resolved, a: &BenchArgs) -> CliResult<()> {
    let catalog = load_catalog(&catalog_path(r, &a.catalog))?;
    let w = load_workload(&r.path(&need(a.workload.clone(), "--workload")?), &catalog)?;
    let pipeline_path = r.path(&need(a.pipeline.clone(), "--pipeline")?);
    let report = r.path(a.report.as_deref().unwrap_or(Path::new("report.csv")));
    let prep = prepare(r, &pipeline_path, &catalog, &w, &[])?;
    let pipeline = make_pipeline(&prep.file, &prep.backends, llm_config(&prep.file, prep.tau, prep.fewshot.clone()));
    let measured = matches!(prep.backends, Backends::Remote(_));
    let clock = wall_clock();
    let res = run_benchmark(&catalog, &w, &pipeline, if measured { Some(&clock) } else { None })?;
    write_text(&report, &qerror_csv(std::slice::from_ref(&res.report)))?;
    write_text(&with_suffix(&report, ".json"), &to_json(&res.report))?;
    write_text(&with_suffix(&report, ".traces.jsonl"), &traces_jsonl(&res.records))?;
    record_replay(r, &report)?;
    print_report(&res.report);
    if !prep.backends.refs().is_empty() {
        println!("tau\t{}", prep.tau);
    }
    Ok(())
}

/// Estimates of every sub-query by the expensive estimator, and the mean
/// simulated latency per sub-query.
fn expensive_estimates(catalog: &Catalog, subs: &[QueryAst], prep: &Prepared) -> CliResult<(BTreeMap<String, f64>, f64)> {
    let mut out = BTreeMap::new();
    let p = &prep.file;
    if let Some(b) = p.baseline() {
        for s in subs {
            out.insert(s.render(), b.estimate(catalog, s, None)?.value);
        }
        let ms = if b == cardest_core::bench::Baseline::Oracle { 0.0 } else { CHEAP_LATENCY_MS };
        return Ok((out, ms));
    }
    let backend: &dyn Backend = prep.backends.refs()[0];
    let reference = p.reference_baseline();
    let opts = p.prompt_options(Some(prep.fewshot.clone()));
    let i_max = if p.self_correction { p.i_max } else { 0 };
    let started = Instant::now();
    let mut calls = 0usize;
    for s in subs {
        let r = reference.estimate(catalog, s, None)?;
        let prompt = build_prompt(s, catalog, std::slice::from_ref(&r), &opts)?;
        let t = self_correct(backend, &prompt, &r, prep.tau, i_max, &DecodeOptions::greedy()).map_err(cardest_core::Error::from)?;
        calls += t.iterations.len();
        out.insert(s.render(), t.final_estimate.value);
    }
    let n = subs.len().max(1) as f64;
    let ms = match backend.latency_ms() {
        Some(per_call) => per_call * calls as f64 / n + CHEAP_LATENCY_MS,
        None => started.elapsed().as_secs_f64() * 1e3 / n,
    };
    Ok((out, ms))
}

/// Sub-queries of every query, deduplicated by canonical text.
fn all_subqueries(queries: &[QueryAst]) -> CliResult<Vec<QueryAst>> {
    let mut seen = BTreeMap::new();
    for q in queries {
        for s in q.without_distinct().decompose()? {
            seen.entry(s.render()).or_insert(s);
        }
    }
    Ok(seen.into_values().collect())
}

/// Plan-cost-proxy E2E comparison of `queries` with cheap = independence,
/// the given expensive estimates, and the routing threshold taken at
/// `percentile` of the cheap plan costs of `calibration`'s sub-queries.
pub fn run_e2e(
    catalog: &Catalog,
    queries: &[QueryAst],
    calibration: &[QueryAst],
    percentile: f64,
    expensive: &BTreeMap<String, f64>,
    expensive_ms: f64,
    cost_unit_ms: f64,
) -> CliResult<E2EReport> {
    let mut truth_cache: BTreeMap<String, f64> = BTreeMap::new();
    let mut truth = |s: &QueryAst| -> cardest_core::Result<f64> {
        let k = s.render();
        if let Some(v) = truth_cache.get(&k) {
            return Ok(*v);
        }
        let v = execute_count(catalog, s)? as f64;
        truth_cache.insert(k, v);
        Ok(v)
    };
    let mut cheap = |s: &QueryAst| estimate_independence(catalog, s).map(|e: Estimate| e.value);
    let mut costs = Vec::new();
    for q in calibration {
        for s in q.without_distinct().decompose()? {
            costs.push(plan_cost(&s, &mut cheap)?);
        }
    }
    let theta = calibrate_threshold(&costs, percentile)?;
    let mut exp = |s: &QueryAst| {
        expensive
            .get(&s.render())
            .copied()
            .ok_or_else(|| cardest_core::Error::InvalidArgument(format!("no expensive estimate for `{s}`")))
    };
    let latency = LatencyModel {
        cheap_ms: CHEAP_LATENCY_MS,
        expensive_ms,
        cost_unit_ms,
    };
    Ok(simulate_e2e(queries, &mut cheap, &mut exp, &mut truth, theta, &latency)?)
}

fn e2e(r: &Resolved, a: &E2eArgs) -> CliResult<()> {
    let catalog = load_catalog(&catalog_path(r, &a.catalog))?;
    let w = load_workload(&r.path(&need(a.workload.clone(), "--workload")?), &catalog)?;
    if w.items.iter().any(|i| matches!(i.statement, Statement::Write(_))) {
        return Err(CliError::Usage("e2e needs a workload without writes".into()));
    }
    let pipeline_path = r.path(&need(a.pipeline.clone(), "--pipeline")?);
    let percentile = a.route_threshold_percentile.unwrap_or(DEFAULT_ROUTE_PERCENTILE);
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(CliError::Usage(format!("percentile {percentile} outside (0, 100]")));
    }
    let cost_unit_ms = a.cost_unit_ms.unwrap_or(DEFAULT_COST_UNIT_MS);
    let out = r.path(a.out.as_deref().unwrap_or(Path::new("e2e.json")));
    let calibration: Vec<QueryAst> = match &a.calibration {
        Some(p) => load_workload(&r.path(p), &catalog)?.queries().map(|(q, _)| q.clone()).collect(),
        None => w.queries().filter(|(_, i)| i.split != Split::Test).map(|(q, _)| q.clone()).collect(),
    };
    if calibration.is_empty() {
        return Err(CliError::Usage("no calibration queries: pass --calibration or use a workload with train/validation splits".into()));
    }
    let queries: Vec<QueryAst> = w.in_split(Split::Test).map(|(q, _)| q.clone()).collect();
    let subs = all_subqueries(&queries)?;
    let prep = prepare(r, &pipeline_path, &catalog, &w, &subs)?;
    let (expensive, expensive_ms) = expensive_estimates(&catalog, &subs, &prep)?;
    let report = run_e2e(&catalog, &queries, &calibration, percentile, &expensive, expensive_ms, cost_unit_ms)?;
    write_text(&out, &to_json(&report))?;
    record_replay(r, &out)?;
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "theta\t{}", report.theta);
    let _ = writeln!(stdout, "config\texec_ms\tinference_ms\ttotal_ms\trouted_fraction");
    for row in &report.rows {
        let _ = writeln!(
            stdout,
            "{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}",
            row.config, row.exec_ms, row.inference_ms, row.total_ms, row.routed_fraction
        );
    }
    Ok(())
}

fn plot_data(r: &Resolved, a: &PlotDataArgs) -> CliResult<()> {
    let out_dir = r.path(a.out_dir.as_deref().unwrap_or(Path::new("plot-data")));
    if a.report.is_empty() && a.traces.is_none() && a.e2e.is_none() {
        return Err(CliError::Usage("nothing to plot: pass --report, --traces or --e2e".into()));
    }
    let mut reports = Vec::new();
    for p in &a.report {
        let path = r.path(p);
        let rep: QErrorReport = serde_json::from_str(&read_text(&path)?).map_err(|e| CliError::format(&path, e))?;
        reports.push(rep);
    }
    let traces = match &a.traces {
        Some(p) => {
            let path = r.path(p);
            let text = read_text(&path)?;
            let mut v = Vec::new();
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let rec: QueryRecord = serde_json::from_str(line).map_err(|e| CliError::format(&path, format!("line {}: {e}", i + 1)))?;
                v.push(rec);
            }
            Some(v)
        }
        None => None,
    };
    let e2e = match &a.e2e {
        Some(p) => {
            let path = r.path(p);
            Some(serde_json::from_str::<E2EReport>(&read_text(&path)?).map_err(|e| CliError::format(&path, e))?)
        }
        None => None,
    };
    if !reports.is_empty() {
        write_text(&out_dir.join("qerror_quantiles.csv"), &quantile_table_csv(&reports))?;
    }
    if let Some(t) = &traces {
        write_text(&out_dir.join("iterations.csv"), &iterations_csv(t))?;
    }
    if let Some(e) = &e2e {
        write_text(&out_dir.join("e2e.csv"), &e2e_csv(e))?;
    }
    println!("{}", out_dir.display());
    Ok(())
}
