//! Estimation backends, output parsing, self-correction, plan costs and
//! cost-based routing.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ensemble::SeededEstimator;
use crate::error::{Error, Result};
use crate::estimators::{Estimate, EstimateSource};
use crate::metrics::{median, nearest_rank, qerror, sorted};
use crate::numlm::{featurize, render_tokens, DecodeMode, DigitModel};
use crate::prompt::{append_feedback, Prompt};
use crate::sql::{mask_connected, QueryAst};

pub const DEFAULT_MAX_ITERATIONS: usize = 5;
pub const DEFAULT_THRESHOLD_GRID: [f64; 5] = [2.0, 5.0, 10.0, 50.0, 100.0];
pub const DEFAULT_ROUTE_PERCENTILE: f64 = 80.0;
/// Temperature of the stochastic runs behind a confidence interval.
pub const CI_TEMPERATURE: f64 = 0.7;
/// Simulated per-call latencies, milliseconds.
pub const CHEAP_LATENCY_MS: f64 = 0.1;
pub const DIGIT_MODEL_LATENCY_MS: f64 = 1.0;

/// Temperature 0 means greedy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeOptions {
    pub temperature: f64,
    pub seed: u64,
}

impl DecodeOptions {
    pub fn greedy() -> Self {
        DecodeOptions {
            temperature: 0.0,
            seed: 0,
        }
    }

    pub fn mode(&self) -> DecodeMode {
        if self.temperature > 0.0 {
            DecodeMode::Sampled {
                temperature: self.temperature,
                seed: self.seed,
            }
        } else {
            DecodeMode::Greedy
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub supports_seeded_sampling: bool,
    pub is_deterministic: bool,
    /// Safe to call from several threads at once.
    pub concurrent: bool,
}

/// Something that turns a prompt into raw model text.
pub trait Backend {
    fn complete(&self, prompt: &Prompt, opts: &DecodeOptions) -> Result<String>;
    fn capabilities(&self) -> Capabilities;
    fn source(&self) -> EstimateSource;
    /// Simulated cost of one call; `None` when the caller should measure.
    fn latency_ms(&self) -> Option<f64> {
        None
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete(&self, prompt: &Prompt, opts: &DecodeOptions) -> Result<String> {
        (**self).complete(prompt, opts)
    }
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn source(&self) -> EstimateSource {
        (**self).source()
    }
    fn latency_ms(&self) -> Option<f64> {
        (**self).latency_ms()
    }
}

/// Accepts an optionally whitespace-padded run of 1 to 12 ASCII digits.
pub fn parse_estimate(raw: &str, source: EstimateSource) -> Result<Estimate> {
    let t = raw.trim();
    if t.is_empty() || t.len() > 12 || !t.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::NonNumeric(raw.to_string()));
    }
    let v: u64 = t.parse().map_err(|_| Error::NonNumeric(raw.to_string()))?;
    Ok(Estimate::new(v as f64, source))
}

/// The built-in digit model as a backend.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitModelBackend {
    pub model: DigitModel,
    pub latency_ms: f64,
}

impl DigitModelBackend {
    pub fn new(model: DigitModel) -> Self {
        DigitModelBackend {
            model,
            latency_ms: DIGIT_MODEL_LATENCY_MS,
        }
    }
}

impl Backend for DigitModelBackend {
    fn complete(&self, prompt: &Prompt, opts: &DecodeOptions) -> Result<String> {
        let x = featurize(prompt);
        if x.values.len() != self.model.input_dim {
            return Err(Error::Backend(format!(
                "model expects {} features, prompt gives {}",
                self.model.input_dim,
                x.values.len()
            )));
        }
        Ok(render_tokens(self.model.decode(&x.values, opts.mode()).tokens()))
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            supports_seeded_sampling: true,
            is_deterministic: true,
            concurrent: true,
        }
    }

    fn source(&self) -> EstimateSource {
        EstimateSource::DigitModel
    }

    fn latency_ms(&self) -> Option<f64> {
        Some(self.latency_ms)
    }
}

/// Runs for a confidence interval: temperature-0.7 sampling, unparseable
/// output counts as an infinitely wide run.
impl SeededEstimator<Prompt> for DigitModel {
    fn estimate_seeded(&self, query: &Prompt, run_seed: u64) -> Result<f64> {
        let x = featurize(query);
        let out = self.decode(
            &x.values,
            DecodeMode::Sampled {
                temperature: CI_TEMPERATURE,
                seed: run_seed,
            },
        );
        Ok(crate::numlm::detokenize(out.tokens()).map(|v| v as f64).unwrap_or(f64::INFINITY))
    }
}

pub(crate) fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01B3);
    }
    h
}

fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Deterministic stand-in for an LLM: answers near the true cardinality,
/// with injected hallucinations. Every turn (feedback round) draws afresh
/// from `(query, turn, decode seed, seed)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockBackend {
    /// True cardinality keyed by canonical query text.
    pub truths: BTreeMap<String, f64>,
    /// Share of turns answered with `1000 x truth`.
    pub hallucination_rate: f64,
    /// Share of turns answered with non-numeric text.
    pub non_numeric_rate: f64,
    /// Ordinary answers are `truth x f`, `f` log-uniform in `[1/noise, noise]`.
    pub noise: f64,
    pub seed: u64,
}

impl MockBackend {
    pub fn new(truths: BTreeMap<String, f64>, seed: u64) -> Self {
        MockBackend {
            truths,
            hallucination_rate: 0.10,
            non_numeric_rate: 0.02,
            noise: 1.5,
            seed,
        }
    }
}

impl Backend for MockBackend {
    fn complete(&self, prompt: &Prompt, opts: &DecodeOptions) -> Result<String> {
        let truth = *self
            .truths
            .get(&prompt.query_text)
            .ok_or_else(|| Error::Backend(format!("mock has no answer for `{}`", prompt.query_text)))?;
        let turn = prompt.feedback.len() as u64;
        let h = mix(hash_str(&prompt.query_text) ^ mix(self.seed ^ mix(turn ^ mix(opts.seed))));
        let u = unit(h);
        if u < self.non_numeric_rate {
            return Ok("I cannot determine the cardinality.".into());
        }
        let v = if u < self.non_numeric_rate + self.hallucination_rate {
            truth.max(1.0) * 1000.0
        } else {
            let ln = libm::log(self.noise.max(1.0));
            truth * libm::exp((2.0 * unit(mix(h)) - 1.0) * ln)
        };
        Ok(format!("{}", libm::round(v.max(0.0)) as u64))
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            supports_seeded_sampling: true,
            is_deterministic: true,
            concurrent: true,
        }
    }

    fn source(&self) -> EstimateSource {
        EstimateSource::Mock
    }

    fn latency_ms(&self) -> Option<f64> {
        Some(DIGIT_MODEL_LATENCY_MS)
    }
}

/// Replies from a fixed per-query script, indexed by turn (the last entry
/// repeats). Queries without a script use `default`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScriptedBackend {
    pub default: Vec<String>,
    pub per_query: BTreeMap<String, Vec<String>>,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(script: impl IntoIterator<Item = S>) -> Self {
        ScriptedBackend {
            default: script.into_iter().map(Into::into).collect(),
            per_query: BTreeMap::new(),
        }
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, prompt: &Prompt, _: &DecodeOptions) -> Result<String> {
        let script = self.per_query.get(&prompt.query_text).unwrap_or(&self.default);
        let turn = prompt.feedback.len();
        script
            .get(turn.min(script.len().saturating_sub(1)))
            .cloned()
            .ok_or_else(|| Error::Backend("empty script".into()))
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            supports_seeded_sampling: false,
            is_deterministic: true,
            concurrent: true,
        }
    }

    fn source(&self) -> EstimateSource {
        EstimateSource::Mock
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionTurn {
    pub raw: String,
    /// `None` when the output did not parse.
    pub parsed: Option<f64>,
    pub reference: f64,
    /// Q-error between parsed output and reference.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionTrace {
    pub iterations: Vec<CorrectionTurn>,
    pub final_estimate: Estimate,
    pub exhausted: bool,
}

/// A backend failure part-way through self-correction.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionFailure {
    pub error: Error,
    pub partial: Vec<CorrectionTurn>,
}

impl core::fmt::Display for CorrectionFailure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{} (after {} turns)", self.error, self.partial.len())
    }
}

impl From<CorrectionFailure> for Error {
    fn from(f: CorrectionFailure) -> Self {
        f.error
    }
}

/// Asks `backend`, and while the answer is non-numeric or more than `tau`
/// away from `reference`, appends a feedback turn and asks again, up to
/// `i_max` extra turns. Running out of turns yields the reference.
///
/// With `i_max = 0` nothing is retried: the raw answer is returned as is
/// (flagged `exhausted` when it lies outside `tau`), and only a
/// non-numeric answer falls back to the reference.
pub fn self_correct<B: Backend + ?Sized>(
    backend: &B,
    prompt: &Prompt,
    reference: &Estimate,
    tau: f64,
    i_max: usize,
    opts: &DecodeOptions,
) -> core::result::Result<CorrectionTrace, CorrectionFailure> {
    let fail = |error: Error, partial: &[CorrectionTurn]| CorrectionFailure {
        error,
        partial: partial.to_vec(),
    };
    if !(tau >= 1.0) {
        return Err(fail(Error::InvalidArgument(format!("threshold {tau} below 1")), &[]));
    }
    let ref_value = reference.value.max(1.0);
    let mut p = prompt.clone();
    p.max_feedback = p.feedback.len() + i_max;
    let mut turns: Vec<CorrectionTurn> = Vec::new();
    let mut last: Option<Estimate> = None;
    for turn in 0..=i_max {
        let call_opts = DecodeOptions {
            seed: opts.seed.wrapping_add(turn as u64),
            ..*opts
        };
        let raw = backend.complete(&p, &call_opts).map_err(|e| fail(e, &turns))?;
        let parsed = parse_estimate(&raw, backend.source()).ok();
        let ratio = parsed.as_ref().map(|e| qerror(e.value, ref_value));
        turns.push(CorrectionTurn {
            raw: raw.clone(),
            parsed: parsed.as_ref().map(|e| e.value),
            reference: ref_value,
            ratio,
        });
        if let (Some(e), Some(r)) = (&parsed, ratio) {
            if r <= tau {
                let mut e = e.clone();
                e.value = e.value.max(1.0);
                return Ok(CorrectionTrace {
                    iterations: turns,
                    final_estimate: e,
                    exhausted: false,
                });
            }
        }
        last = parsed;
        if turn < i_max {
            p = append_feedback(&p, &raw, reference).map_err(|e| fail(e, &turns))?;
        }
    }
    let mut fallback = reference.clone();
    fallback.value = ref_value;
    let final_estimate = match (i_max, last) {
        (0, Some(mut e)) => {
            e.value = e.value.max(1.0);
            e
        }
        _ => fallback,
    };
    Ok(CorrectionTrace {
        iterations: turns,
        final_estimate,
        exhausted: true,
    })
}

/// One labelled query for threshold tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationItem {
    pub prompt: Prompt,
    pub reference: Estimate,
    pub truth: f64,
}

/// Median Q-error of self-correction at threshold `tau`.
pub fn median_qerror_at<B: Backend + ?Sized>(
    backend: &B,
    validation: &[ValidationItem],
    tau: f64,
    i_max: usize,
    opts: &DecodeOptions,
) -> Result<f64> {
    if validation.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let mut errs = Vec::with_capacity(validation.len());
    for v in validation {
        let t = self_correct(backend, &v.prompt, &v.reference, tau, i_max, opts)?;
        errs.push(qerror(t.final_estimate.value, v.truth));
    }
    Ok(median(&errs))
}

/// The candidate with the lowest median Q-error; ties go to the smallest.
pub fn grid_search_threshold<B: Backend + ?Sized>(
    backend: &B,
    validation: &[ValidationItem],
    candidates: &[f64],
    i_max: usize,
    opts: &DecodeOptions,
) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::Empty("threshold candidates"));
    }
    let grid = sorted(candidates);
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let mut best = (f64::INFINITY, grid[0]);
    for &tau in &grid {
        let m = median_qerror_at(backend, validation, tau, i_max, opts)?;
        if m < best.0 {
            best = (m, tau);
        }
    }
    Ok(best.1)
}

/// A separate threshold for each reference-estimator source.
pub fn grid_search_per_source<B: Backend + ?Sized>(
    backend: &B,
    validation: &[ValidationItem],
    candidates: &[f64],
    i_max: usize,
    opts: &DecodeOptions,
) -> Result<BTreeMap<EstimateSource, f64>> {
    let mut groups: BTreeMap<EstimateSource, Vec<ValidationItem>> = BTreeMap::new();
    for v in validation {
        groups.entry(v.reference.source).or_default().push(v.clone());
    }
    groups
        .into_iter()
        .map(|(s, items)| Ok((s, grid_search_threshold(backend, &items, candidates, i_max, opts)?)))
        .collect()
}

/// Left-deep join order as alias positions. Starts from the smallest
/// estimated single-table result and repeatedly joins the connected table
/// giving the smallest estimated intermediate result (ties: lowest position).
pub fn choose_plan(ast: &QueryAst, card_fn: &mut dyn FnMut(&QueryAst) -> Result<f64>) -> Result<Vec<usize>> {
    let q = ast.without_distinct();
    let n = q.tables.len();
    if n == 0 {
        return Err(Error::Empty("FROM list"));
    }
    if n > 63 {
        return Err(Error::InvalidArgument("too many tables to plan".into()));
    }
    let adj = q.adjacency();
    let mut order = Vec::with_capacity(n);
    let mut mask = 0u64;
    while order.len() < n {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..n {
            let next = mask | (1 << i);
            if mask & (1 << i) != 0 || !mask_connected(&adj, next) {
                continue;
            }
            let c = card_fn(&q.restrict(next))?;
            if best.is_none_or(|(b, _)| c < b) {
                best = Some((c, i));
            }
        }
        let (_, i) = best.ok_or(Error::DisconnectedJoin)?;
        mask |= 1 << i;
        order.push(i);
    }
    Ok(order)
}

/// Cost of a left-deep plan: every scan costs `table rows + filtered rows`,
/// every join `left input + right input + output`, all under `card_fn`.
pub fn cost_plan(ast: &QueryAst, order: &[usize], card_fn: &mut dyn FnMut(&QueryAst) -> Result<f64>) -> Result<f64> {
    let q = ast.without_distinct();
    let mut cost = 0.0;
    let mut mask = 0u64;
    let mut prefix_card = 0.0;
    for (k, &i) in order.iter().enumerate() {
        let t = &q.tables[i];
        let mut bare = QueryAst::single(&t.table);
        bare.tables[0].alias = t.alias.clone();
        let scan_in = card_fn(&bare)?;
        let scan_out = card_fn(&q.restrict(1 << i))?;
        cost += scan_in + scan_out;
        mask |= 1 << i;
        if k == 0 {
            prefix_card = scan_out;
        } else {
            let out = card_fn(&q.restrict(mask))?;
            cost += prefix_card + scan_out + out;
            prefix_card = out;
        }
    }
    Ok(cost)
}

/// Cost of the plan chosen under `card_fn`, measured under the same
/// `card_fn`.
pub fn plan_cost(ast: &QueryAst, card_fn: &mut dyn FnMut(&QueryAst) -> Result<f64>) -> Result<f64> {
    let order = choose_plan(ast, card_fn)?;
    cost_plan(ast, &order, card_fn)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Route {
    Cheap,
    Expensive,
}

/// Expensive iff `cost > theta`.
pub fn route(cost: f64, theta: f64) -> Route {
    if cost > theta {
        Route::Expensive
    } else {
        Route::Cheap
    }
}

/// Threshold at the given nearest-rank percentile of calibration costs.
pub fn calibrate_threshold(costs: &[f64], percentile: f64) -> Result<f64> {
    if costs.is_empty() {
        return Err(Error::Empty("calibration costs"));
    }
    Ok(nearest_rank(&sorted(costs), percentile))
}
