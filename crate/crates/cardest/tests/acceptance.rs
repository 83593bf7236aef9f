//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Set `CARDEST_BLESS=1` to (re)write missing golden prompt files.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use cardest::commands::{run_e2e, DEFAULT_COST_UNIT_MS};
use cardest::formats::workload_to_jsonl;
use cardest::training::{examples_from_workload, ExampleOptions};
use cardest_core::bench::{run_benchmark, Ablation, Baseline, LlmConfig, Pipeline};
use cardest_core::catalog::{DEFAULT_BUCKETS, DEFAULT_MCV};
use cardest_core::datagen::{synthetic_db, SyntheticConfig};
use cardest_core::ensemble::{select_most_confident, DEFAULT_EPSILON};
use cardest_core::estimators::estimate_independence;
use cardest_core::exec::{execute_count, execute_count_bruteforce};
use cardest_core::inference::{
    grid_search_threshold, Backend, DecodeOptions, DigitModelBackend, MockBackend, ValidationItem, CHEAP_LATENCY_MS,
    DEFAULT_MAX_ITERATIONS, DEFAULT_ROUTE_PERCENTILE, DEFAULT_THRESHOLD_GRID, DIGIT_MODEL_LATENCY_MS,
};
use cardest_core::metrics::{percentile_report, qerror, REPORT_QUANTILES};
use cardest_core::numlm::{
    grad_check, mean_nll, train, DigitModel, DigitToken, FeatureLayout, Hyper, Optimizer, MAX_STEPS, VOCAB,
};
use cardest_core::prompt::{append_feedback, build_prompt, serialize_prompt, FewShot, PromptOptions};
use cardest_core::sql::{parse_query, CmpOp, ColRef, Filter, JoinPred, TableRef};
use cardest_core::workloads::*;
use cardest_core::{Catalog, Estimate, EstimateSource, QueryAst, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn synth(tables: usize, rows: usize, zipf: f64, seed: u64) -> Catalog {
    synthetic_db(&SyntheticConfig { tables, rows, zipf, seed }).unwrap()
}

// 1 --------------------------------------------------------------------

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let db = synth(3, 66, 1.1, 1);
    let largest = db.tables.values().map(|t| t.len()).max().unwrap();
    let spj = gen_spj(&db, 1200, 2, 3, 1).unwrap();
    let mut queries: Vec<QueryAst> = spj.queries().map(|(q, _)| q.clone()).collect();
    for t in db.tables.keys() {
        queries.extend(gen_like(&db, t, "tag", 200, 2).unwrap().queries().map(|(q, _)| q.clone()));
    }
    queries.extend(gen_distinct(&db, &spj, 3).unwrap().queries().map(|(q, _)| q.clone()));
    let mismatches = queries
        .iter()
        .filter(|q| execute_count(&db, q).unwrap() != execute_count_bruteforce(&db, q).unwrap())
        .count();
    let secs = started.elapsed().as_secs_f64();
    check(
        queries.len() >= 2000 && largest <= 100 && mismatches == 0 && secs < 60.0,
        format!("{} queries, largest table {largest} rows, {mismatches} mismatches, {secs:.1}s", queries.len()),
    )
}

// 2 --------------------------------------------------------------------

/// Log-likelihood written out from the documented parameter layout, independent of the
/// crate's forward pass.
fn oracle_nll(m: &DigitModel, x: &[f64], target: &[DigitToken]) -> f64 {
    let (d, h) = (m.input_dim, m.hidden);
    let p = &m.params;
    let mut off = 0;
    let mut block = |n: usize| {
        let r = off..off + n;
        off += n;
        r
    };
    let (we, be, ws, u, emb, pos, bs, wo, bo) =
        (block(h * d), block(h), block(h * h), block(h * h), block(VOCAB * h), block(MAX_STEPS * h), block(h), block(VOCAB * h), block(VOCAB));
    assert_eq!(off, p.len());
    let w = |r: &std::ops::Range<usize>, i: usize| p[r.start + i];
    let h0: Vec<f64> = (0..h).map(|i| (w(&be, i) + (0..d).map(|j| w(&we, i * d + j) * x[j]).sum::<f64>()).tanh()).collect();
    let mut s = h0.clone();
    let mut prev = 11;
    let mut total = 0.0;
    for (t, tok) in target.iter().enumerate() {
        let t = t.min(MAX_STEPS - 1);
        let next: Vec<f64> = (0..h)
            .map(|i| {
                let mut z = w(&bs, i) + w(&emb, prev * h + i) + w(&pos, t * h + i);
                for j in 0..h {
                    z += w(&ws, i * h + j) * s[j] + w(&u, i * h + j) * h0[j];
                }
                z.tanh()
            })
            .collect();
        let logits: Vec<f64> = (0..VOCAB).map(|k| w(&bo, k) + (0..h).map(|j| w(&wo, k * h + j) * next[j]).sum::<f64>()).collect();
        let log_sum = logits.iter().map(|l| l.exp()).sum::<f64>().ln();
        total += log_sum - logits[tok.index()];
        s = next;
        prev = tok.index();
    }
    total
}

fn random_case(rng: &mut ChaCha8Rng) -> (DigitModel, Vec<f64>, Vec<DigitToken>) {
    let d = rng.random_range(1..=8);
    let h = rng.random_range(1..=6);
    let m = DigitModel::new(d, h, rng.random());
    let x = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let len = rng.random_range(1..=MAX_STEPS);
    let target = (0..len).map(|_| DigitToken::from_index(rng.random_range(0..VOCAB))).collect();
    (m, x, target)
}

fn likelihood_and_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_nll: f64 = 0.0;
    for _ in 0..100 {
        let (m, x, t) = random_case(&mut rng);
        worst_nll = worst_nll.max((m.nll(&x, &t) - oracle_nll(&m, &x, &t)).abs());
    }
    let mut worst_grad: f64 = 0.0;
    for i in 0..10 {
        let (m, x, t) = random_case(&mut rng);
        worst_grad = worst_grad.max(grad_check(&m, &x, &t, 1e-5, None, 200, i).max_rel_dev);
    }
    check(
        worst_nll <= 1e-10 && worst_grad < 1e-4,
        format!("max |nll - oracle| {worst_nll:.2e} over 100 cases, max grad deviation {worst_grad:.2e} over 10 models"),
    )
}

// 3 --------------------------------------------------------------------

fn fine_tuning() -> Outcome {
    let started = Instant::now();
    let db = synth(3, 1000, 1.1, 0);
    let mut w = gen_spj(&db, 5500, 2, 3, 11).unwrap();
    for (i, it) in w.items.iter_mut().enumerate() {
        it.split = if i < 5000 { Split::Train } else { Split::Test };
    }
    let plain = ExampleOptions {
        feedback_copies: false,
        ..ExampleOptions::default()
    };
    let train_set = examples_from_workload(&db, &w, Split::Train, &plain).unwrap().examples;
    let held_out = examples_from_workload(&db, &w, Split::Test, &plain).unwrap().examples;
    // plain gradient descent at the default rate stays above the baseline at this scale
    let hyper = Hyper {
        optimizer: Optimizer::Adam,
        lr: 3e-3,
        ..Hyper::default()
    };
    let init = DigitModel::new(FeatureLayout::LEN, hyper.hidden, hyper.seed);
    let rep = train(&train_set, &hyper).unwrap();
    let nll_drop = 1.0 - mean_nll(&rep.model, &held_out) / mean_nll(&init, &held_out);
    let backend = DigitModelBackend::new(rep.model);
    let config = LlmConfig {
        ablation: Ablation {
            self_correction: false,
            bootstrap: false,
            ..Ablation::default()
        },
        ..LlmConfig::default()
    };
    let model = run_benchmark(&db, &w, &Pipeline::Llm { replicas: vec![&backend], config }, None).unwrap();
    let base = run_benchmark(&db, &w, &Pipeline::Baseline(Baseline::Independence), None).unwrap();
    let well_formed = model.records.iter().filter(|r| r.trace.as_ref().unwrap().iterations[0].parsed.is_some()).count() as f64
        / model.records.len() as f64;
    let (m, b) = (model.report.at(50.0).unwrap(), base.report.at(50.0).unwrap());
    let secs = started.elapsed().as_secs_f64();
    check(
        m <= b && well_formed >= 0.99 && nll_drop >= 0.3 && secs < 600.0,
        format!(
            "median q-error model {m:.3} vs independence {b:.3}, {:.1}% well-formed, held-out nll -{:.0}%, {secs:.0}s",
            well_formed * 100.0,
            nll_drop * 100.0
        ),
    )
}

// 4 --------------------------------------------------------------------

/// Falling back to the reference bounds the corrected tail by the
/// reference's own tail, so this runs on milder skew where independence's
/// 99th percentile stays near 100.
fn self_correction() -> Outcome {
    let db = synth(3, 1000, 0.5, 0);
    let mut w = gen_spj(&db, 1000, 2, 3, 4).unwrap();
    assign_splits(&mut w, 0.0, 0.3, 4);
    let truths = w.queries().map(|(q, it)| (q.render(), it.truth.unwrap() as f64)).collect();
    let mock = MockBackend::new(truths, 4);
    let items: Vec<ValidationItem> = w
        .in_split(Split::Validation)
        .map(|(q, it)| {
            let r = estimate_independence(&db, q).unwrap();
            ValidationItem {
                prompt: build_prompt(q, &db, std::slice::from_ref(&r), &PromptOptions::default()).unwrap(),
                reference: r,
                truth: it.truth.unwrap() as f64,
            }
        })
        .collect();
    let tau = grid_search_threshold(&mock, &items, &DEFAULT_THRESHOLD_GRID, DEFAULT_MAX_ITERATIONS, &DecodeOptions::greedy()).unwrap();
    let p99 = |i_max: usize| {
        let config = LlmConfig {
            tau,
            i_max,
            ablation: Ablation {
                self_correction: i_max > 0,
                bootstrap: false,
                ..Ablation::default()
            },
            ..LlmConfig::default()
        };
        run_benchmark(&db, &w, &Pipeline::Llm { replicas: vec![&mock], config }, None).unwrap().report.at(99.0).unwrap()
    };
    let (with, without) = (p99(DEFAULT_MAX_ITERATIONS), p99(0));
    check(
        without / with >= 5.0,
        format!("tau {tau}, p99 q-error {with:.2} with vs {without:.2} without ({:.0}x)", without / with),
    )
}

// 5 --------------------------------------------------------------------

fn confidence_selection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut wrong = 0;
    for _ in 0..100 {
        let k = rng.random_range(2..=8);
        let widths: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1e4)).collect();
        let ests: Vec<Estimate> = widths
            .iter()
            .map(|&wd| {
                let lo = rng.random_range(0.0..1e5);
                let mut e = Estimate::new(lo + wd / 2.0, EstimateSource::DigitModel);
                e.ci = Some((lo, lo + wd));
                e
            })
            .collect();
        let narrowest = (0..k).min_by(|&a, &b| widths[a].total_cmp(&widths[b])).unwrap();
        if select_most_confident(&ests, DEFAULT_EPSILON).unwrap().0 != narrowest {
            wrong += 1;
        }
    }

    let db = synth(3, 1000, 1.1, 0);
    let w = gen_spj(&db, 300, 2, 3, 5).unwrap();
    let truths: BTreeMap<String, f64> = w.queries().map(|(q, it)| (q.render(), it.truth.unwrap() as f64)).collect();
    let replicas: Vec<MockBackend> = [1.2, 2.0, 4.0, 8.0]
        .iter()
        .enumerate()
        .map(|(i, &noise)| {
            let mut m = MockBackend::new(truths.clone(), 50 + i as u64);
            m.hallucination_rate = 0.0;
            m.non_numeric_rate = 0.0;
            m.noise = noise;
            m
        })
        .collect();
    let config = |bootstrap| LlmConfig {
        ablation: Ablation {
            self_correction: false,
            bootstrap,
            ..Ablation::default()
        },
        ..LlmConfig::default()
    };
    let refs: Vec<&dyn Backend> = replicas.iter().map(|m| m as &dyn Backend).collect();
    let selected = run_benchmark(&db, &w, &Pipeline::Llm { replicas: refs, config: config(true) }, None)
        .unwrap()
        .report
        .at(50.0)
        .unwrap();
    let singles: Vec<f64> = replicas
        .iter()
        .map(|m| {
            let p = Pipeline::Llm {
                replicas: vec![m as &dyn Backend],
                config: config(false),
            };
            run_benchmark(&db, &w, &p, None).unwrap().report.at(50.0).unwrap()
        })
        .collect();
    let avg = singles.iter().sum::<f64>() / singles.len() as f64;
    check(
        wrong == 0 && selected <= avg,
        format!("{wrong}/100 constructed cases wrong; selected median {selected:.3} vs per-replica average {avg:.3}"),
    )
}

// 6 --------------------------------------------------------------------

struct Routing {
    fraction: f64,
    totals: BTreeMap<String, f64>,
}

/// The expensive estimator is an accurate mock (answers within 1.5x of the
/// truth) at digit-model latency.
fn routing_run(seed: u64) -> Routing {
    let db = synth(8, 1000, 1.5, seed);
    let mut w = gen_spj(&db, 400, 5, 3, 21).unwrap();
    assign_splits(&mut w, 0.5, 0.0, 21);
    let queries: Vec<QueryAst> = w.in_split(Split::Test).map(|(q, _)| q.clone()).collect();
    let calibration: Vec<QueryAst> = w.in_split(Split::Train).map(|(q, _)| q.clone()).collect();
    let mut subs = BTreeMap::new();
    for q in &queries {
        for s in q.decompose().unwrap() {
            subs.entry(s.render()).or_insert(s);
        }
    }
    let truths = subs.iter().map(|(k, s)| (k.clone(), execute_count(&db, s).unwrap() as f64)).collect();
    let mut mock = MockBackend::new(truths, 3);
    mock.hallucination_rate = 0.0;
    mock.non_numeric_rate = 0.0;
    let mut expensive = BTreeMap::new();
    for (k, s) in &subs {
        let r = estimate_independence(&db, s).unwrap();
        let p = build_prompt(s, &db, std::slice::from_ref(&r), &PromptOptions::default()).unwrap();
        let raw = mock.complete(&p, &DecodeOptions::greedy()).unwrap();
        expensive.insert(k.clone(), raw.parse::<f64>().unwrap());
    }
    let rep = run_e2e(
        &db,
        &queries,
        &calibration,
        DEFAULT_ROUTE_PERCENTILE,
        &expensive,
        DIGIT_MODEL_LATENCY_MS + CHEAP_LATENCY_MS,
        DEFAULT_COST_UNIT_MS,
    )
    .unwrap();
    Routing {
        fraction: rep.row("routed").unwrap().routed_fraction,
        totals: rep.rows.iter().map(|r| (r.config.clone(), r.total_ms)).collect(),
    }
}

fn routing() -> Outcome {
    let runs: Vec<Routing> = (0..3).map(routing_run).collect();
    let fractions: Vec<f64> = runs.iter().map(|r| r.fraction).collect();
    let t = &runs[0].totals;
    let ok = fractions.iter().all(|f| (0.15..=0.35).contains(f)) && t["routed"] <= t["all-cheap"] && t["routed"] <= t["all-expensive"];
    check(
        ok,
        format!(
            "routed fractions {:.3?}; total ms routed {:.0}, all-cheap {:.0}, all-expensive {:.0}",
            fractions, t["routed"], t["all-cheap"], t["all-expensive"]
        ),
    )
}

// 7 --------------------------------------------------------------------

fn generators() -> Outcome {
    let db = synth(6, 200, 1.1, 7);
    let w = gen_spj(&db, 10_000, 5, 5, 7).unwrap();
    let mut leaks = 0;
    for lo in 1..=4 {
        for hi in lo..=4 {
            let (tr, te) = split_by_joins(&w, lo, hi);
            leaks += tr.queries().filter(|(q, _)| q.join_count() >= lo).count();
            leaks += te.queries().filter(|(q, _)| q.join_count() <= hi).count();
            let (tr, te) = split_by_filters(&w, lo, hi);
            leaks += tr.queries().filter(|(q, _)| q.filter_count() >= lo).count();
            leaks += te.queries().filter(|(q, _)| q.filter_count() <= hi).count();
        }
    }

    let base: Vec<QueryAst> = w.queries().take(60).map(|(q, _)| q.clone()).collect();
    let mut ratio_misses = 0;
    let mut replay_misses = 0;
    for (ratio, n) in [((2, 1, 1), 40), ((1, 1, 2), 40), ((2, 1, 1), 37), ((1, 1, 2), 63)] {
        let dw = gen_dynamic(&db, &base, ratio, n, DEFAULT_BUCKETS, DEFAULT_MCV, n as u64).unwrap();
        let mut counts = BTreeMap::new();
        for it in &dw.items {
            if let Statement::Write(op) = &it.statement {
                *counts.entry(op.kind()).or_insert(0usize) += 1;
            }
        }
        let sum = (ratio.0 + ratio.1 + ratio.2) as f64;
        for (kind, r) in [("insert", ratio.0), ("delete", ratio.1), ("update", ratio.2)] {
            let want = n as f64 * r as f64 / sum;
            if (counts.get(kind).copied().unwrap_or(0) as f64 - want).abs() > 1.0 {
                ratio_misses += 1;
            }
        }
        let recorded: Vec<u64> = dw.queries().map(|(_, it)| it.truth.unwrap()).collect();
        let again = gen_dynamic(&db, &base, ratio, n, DEFAULT_BUCKETS, DEFAULT_MCV, n as u64).unwrap();
        if replay_truths(&db, &dw, DEFAULT_BUCKETS, DEFAULT_MCV).unwrap() != recorded || workload_to_jsonl(&again) != workload_to_jsonl(&dw) {
            replay_misses += 1;
        }
    }
    let small = gen_spj(&db, 200, 3, 3, 8).unwrap();
    let families = [
        (workload_to_jsonl(&small), workload_to_jsonl(&gen_spj(&db, 200, 3, 3, 8).unwrap())),
        (workload_to_jsonl(&gen_like(&db, "t1", "tag", 50, 8).unwrap()), workload_to_jsonl(&gen_like(&db, "t1", "tag", 50, 8).unwrap())),
        (workload_to_jsonl(&gen_distinct(&db, &small, 8).unwrap()), workload_to_jsonl(&gen_distinct(&db, &small, 8).unwrap())),
    ];
    replay_misses += families.iter().filter(|(a, b)| a != b).count();
    check(
        leaks == 0 && ratio_misses == 0 && replay_misses == 0,
        format!("{leaks} split leaks over {} queries, {ratio_misses} write counts off ratio, {replay_misses} replay mismatches", w.items.len()),
    )
}

// 8 --------------------------------------------------------------------

fn golden_prompts(db: &Catalog) -> Vec<(&'static str, String)> {
    let q = |s: &str| parse_query(s, db).unwrap();
    let est = |q: &QueryAst| estimate_independence(db, q).unwrap();
    let build = |q: &QueryAst, o: &PromptOptions| build_prompt(q, db, &[est(q)], o).unwrap();
    let d = PromptOptions::default();
    let single = q("SELECT COUNT(*) FROM t0 WHERE t0.a >= 2 AND t0.a <= 5");
    let join = q("SELECT COUNT(*) FROM t0, t1 WHERE t0.id = t1.pid AND t1.tag = 'red' AND t0.b > 20.5");
    let like = q("SELECT COUNT(*) FROM t2 WHERE t2.tag LIKE '%ee%'");
    let distinct = q("SELECT COUNT(DISTINCT t1.a) FROM t1 WHERE t1.b < 30");
    let joined = build(&join, &d);
    let corrected = append_feedback(&joined, "123456", &est(&join)).unwrap();
    let corrected = append_feedback(&corrected, "not sure", &est(&join)).unwrap();
    let fewshot = PromptOptions {
        fewshot: Some(vec![FewShot {
            query: "SELECT COUNT(*) FROM t0".into(),
            cardinality: 40,
        }]),
        ..d.clone()
    };
    let bare = PromptOptions {
        include_stats: false,
        include_estimates: false,
        ..d.clone()
    };
    vec![
        ("single", serialize_prompt(&build(&single, &d))),
        ("join", serialize_prompt(&joined)),
        ("feedback", serialize_prompt(&corrected)),
        ("like", serialize_prompt(&build(&like, &d))),
        ("distinct", serialize_prompt(&build(&distinct, &d))),
        ("fewshot", serialize_prompt(&build(&single, &fewshot))),
        ("bare", serialize_prompt(&build(&join, &bare))),
    ]
}

/// All six tables joined along the schema tree with range filters on eight
/// distinct numeric columns.
fn widest_query(db: &Catalog) -> QueryAst {
    let names: Vec<String> = (0..6).map(|i| format!("t{i}")).collect();
    let mut q = QueryAst {
        tables: names.iter().map(|t| TableRef { table: t.clone(), alias: t.clone() }).collect(),
        joins: (1..6).map(|i| JoinPred::new(ColRef::new(&names[(i - 1) / 2], "id"), ColRef::new(&names[i], "pid"))).collect(),
        filters: Vec::new(),
        distinct_on: None,
    };
    let cols = [("t0", "a"), ("t0", "b"), ("t1", "a"), ("t1", "b"), ("t2", "b"), ("t3", "a"), ("t4", "b"), ("t5", "a")];
    for (t, c) in cols {
        let (lo, hi) = if c == "a" { (Value::Int(1), Value::Int(123)) } else { (Value::Float(1.5), Value::Float(12345.25)) };
        q.filters.push(Filter::new(ColRef::new(t, c), CmpOp::Ge, lo));
        q.filters.push(Filter::new(ColRef::new(t, c), CmpOp::Le, hi));
    }
    q.validate(db).unwrap();
    q
}

fn prompt_stability() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let bless = std::env::var_os("CARDEST_BLESS").is_some();
    let db = synth(3, 200, 1.1, 8);
    let mut diffs = Vec::new();
    let prompts = golden_prompts(&db);
    for (name, text) in &prompts {
        let path = dir.join(format!("{name}.json"));
        match std::fs::read_to_string(&path) {
            Ok(want) if want == *text => {}
            Err(_) if bless => {
                std::fs::create_dir_all(&dir).unwrap();
                std::fs::write(&path, text).unwrap();
            }
            _ => diffs.push(*name),
        }
    }

    let wide_db = synth(6, 1000, 1.1, 8);
    let q = widest_query(&wide_db);
    let mut estimates = vec![estimate_independence(&wide_db, &q).unwrap()];
    for (v, s) in [(1.0e9, EstimateSource::Sampling), (123456.0, EstimateSource::NdvStats), (98765.0, EstimateSource::DigitModel)] {
        estimates.push(Estimate::new(v, s));
    }
    let mut p = build_prompt(&q, &wide_db, &estimates, &PromptOptions::default()).unwrap();
    for _ in 0..DEFAULT_MAX_ITERATIONS {
        p = append_feedback(&p, "999999999999", &estimates[0]).unwrap();
    }
    let size = serialize_prompt(&p).len();
    check(
        diffs.is_empty() && size < 8 * 1024,
        format!(
            "{} golden prompts, mismatches {diffs:?}; 6 tables x 8 filters with {} feedback turns: {size} bytes",
            prompts.len(),
            DEFAULT_MAX_ITERATIONS
        ),
    )
}

// 9 --------------------------------------------------------------------

fn metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let exact = qerror(16.0, 8.0) == 2.0 && (0..1000).all(|_| {
        let c = rng.random_range(0.0..1e9);
        qerror(c, c) == 1.0
    });
    let mut lengths: Vec<usize> = vec![1, 2, 3, 10_000];
    lengths.extend((0..200).map(|_| rng.random_range(1..=10_000)));
    let mut misses = 0;
    for n in &lengths {
        let errs: Vec<f64> = (0..*n).map(|_| 1.0 + rng.random_range(0.0..100.0f64).powi(2)).collect();
        let rep = percentile_report(&errs, &REPORT_QUANTILES, "x", "y").unwrap();
        let mut s = errs.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // smallest value with at least q% of the list at or below it
        let mut at_or_below = vec![0; s.len()];
        for i in (0..s.len()).rev() {
            at_or_below[i] = if i + 1 < s.len() && s[i + 1] == s[i] { at_or_below[i + 1] } else { i + 1 };
        }
        for (q, got) in &rep.quantiles {
            let want = (0..s.len()).find(|&i| at_or_below[i] as f64 * 100.0 >= *q * *n as f64).map(|i| s[i]).unwrap();
            if *got != want {
                misses += 1;
            }
        }
    }
    check(
        exact && misses == 0,
        format!("qerror identities hold: {exact}; {misses} percentile mismatches over {} lists", lengths.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("likelihood and gradients", likelihood_and_gradients),
        ("fine-tuning efficacy", fine_tuning),
        ("self-correction", self_correction),
        ("confidence selection", confidence_selection),
        ("routing", routing),
        ("workload generators", generators),
        ("prompt stability", prompt_stability),
        ("metric exactness", metrics),
    ];
    let only: Option<usize> = std::env::var("CARDEST_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {} {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {} {name}: {d} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
