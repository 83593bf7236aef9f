//! Pipeline description files and the backends they name.
//!
//! ```toml
//! backend = "model"          # pg | sampling | ndv | oracle | model | remote | mock
//! reference = "pg"           # estimator in the prompt and for self-correction
//! model = "model.json"
//! i-max = 5
//! # tau = 10.0               # unset: grid search on the validation split
//! bootstrap = true
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cardest_core::bench::{Ablation, Baseline, LlmConfig, Pipeline};
use cardest_core::catalog::{DEFAULT_BUCKETS, DEFAULT_MCV};
use cardest_core::ensemble::{DEFAULT_EPSILON, DEFAULT_LEVEL, DEFAULT_RUNS};
use cardest_core::exec::{apply_write, execute_count};
use cardest_core::inference::{
    grid_search_threshold, Backend, DecodeOptions, DigitModelBackend, MockBackend, ValidationItem, DEFAULT_MAX_ITERATIONS,
    DEFAULT_THRESHOLD_GRID,
};
use cardest_core::prompt::{build_prompt, FewShot, PromptOptions};
use cardest_core::workloads::{initial_state, Split, Statement, Workload};
use cardest_core::{Catalog, Estimate};
use serde::{Deserialize, Serialize};

use crate::cli::BackendKind;
use crate::error::{CliError, CliResult};
use crate::formats::{load_bundle, read_text};
use crate::remote::{RemoteBackend, RemoteConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct MockSettings {
    pub hallucination_rate: f64,
    pub non_numeric_rate: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for MockSettings {
    fn default() -> Self {
        let m = MockBackend::new(BTreeMap::new(), 0);
        MockSettings {
            hallucination_rate: m.hallucination_rate,
            non_numeric_rate: m.non_numeric_rate,
            noise: m.noise,
            seed: m.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct PipelineFile {
    pub backend: BackendKind,
    pub reference: BackendKind,
    pub sampling_rate: f64,
    pub seed: u64,
    /// Self-correction threshold; unset means grid search.
    pub tau: Option<f64>,
    pub tau_grid: Vec<f64>,
    pub i_max: usize,
    pub self_correction: bool,
    pub other_estimates: bool,
    pub coarse_stats: bool,
    pub fewshot: bool,
    /// Worked examples taken from the train split when few-shot is on.
    pub fewshot_count: usize,
    pub bootstrap: bool,
    pub runs: usize,
    pub level: f64,
    pub epsilon: f64,
    pub model: Option<PathBuf>,
    pub remote: Option<RemoteConfig>,
    pub mock: MockSettings,
}

impl Default for PipelineFile {
    fn default() -> Self {
        let ab = Ablation::default();
        PipelineFile {
            backend: BackendKind::Pg,
            reference: BackendKind::Pg,
            sampling_rate: 0.01,
            seed: 0,
            tau: None,
            tau_grid: DEFAULT_THRESHOLD_GRID.to_vec(),
            i_max: DEFAULT_MAX_ITERATIONS,
            self_correction: ab.self_correction,
            other_estimates: ab.other_estimates,
            coarse_stats: ab.coarse_stats,
            fewshot: ab.fewshot,
            fewshot_count: 3,
            bootstrap: ab.bootstrap,
            runs: DEFAULT_RUNS,
            level: DEFAULT_LEVEL,
            epsilon: DEFAULT_EPSILON,
            model: None,
            remote: None,
            mock: MockSettings::default(),
        }
    }
}

impl PipelineFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let p: PipelineFile =
            toml::from_str(&read_text(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        p.validate().map_err(|m| CliError::Config(format!("{}: {m}", path.display())))?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), String> {
        if baseline_of(self.reference, self.sampling_rate, self.seed).is_none() {
            return Err(format!("reference `{:?}` is not a classical estimator", self.reference));
        }
        if !(self.sampling_rate > 0.0 && self.sampling_rate <= 1.0) {
            return Err(format!("sampling-rate {} outside (0, 1]", self.sampling_rate));
        }
        if let Some(t) = self.tau {
            if !(t >= 1.0) {
                return Err(format!("tau {t} below 1"));
            }
        }
        if self.tau_grid.is_empty() || self.tau_grid.iter().any(|t| !(*t >= 1.0)) {
            return Err("tau-grid needs values >= 1".into());
        }
        match self.backend {
            BackendKind::Model if self.model.is_none() => Err("backend `model` needs `model`".into()),
            BackendKind::Remote if self.remote.is_none() => Err("backend `remote` needs a [remote] table".into()),
            _ => Ok(()),
        }
    }

    pub fn baseline(&self) -> Option<Baseline> {
        baseline_of(self.backend, self.sampling_rate, self.seed)
    }

    pub fn reference_baseline(&self) -> Baseline {
        baseline_of(self.reference, self.sampling_rate, self.seed).unwrap_or(Baseline::Independence)
    }

    pub fn ablation(&self) -> Ablation {
        Ablation {
            self_correction: self.self_correction,
            other_estimates: self.other_estimates,
            coarse_stats: self.coarse_stats,
            fewshot: self.fewshot,
            bootstrap: self.bootstrap,
        }
    }

    pub fn prompt_options(&self, fewshot: Option<Vec<FewShot>>) -> PromptOptions {
        PromptOptions {
            include_stats: self.coarse_stats,
            include_estimates: self.other_estimates,
            fewshot: if self.fewshot { fewshot } else { None },
            max_feedback: self.i_max,
        }
    }
}

pub fn baseline_of(kind: BackendKind, rate: f64, seed: u64) -> Option<Baseline> {
    match kind {
        BackendKind::Pg => Some(Baseline::Independence),
        BackendKind::Sampling => Some(Baseline::Sampling { rate, seed }),
        BackendKind::Ndv => Some(Baseline::NdvStats),
        BackendKind::Oracle => Some(Baseline::Oracle),
        BackendKind::Model | BackendKind::Remote | BackendKind::Mock => None,
    }
}

/// Backends a pipeline owns; `Pipeline` borrows from here.
pub enum Backends {
    None,
    Model(Vec<DigitModelBackend>),
    Remote(Box<RemoteBackend>),
    Mock(MockBackend),
}

impl Backends {
    /// `truths` feeds the mock backend (canonical query text to count).
    pub fn build(p: &PipelineFile, resolve: impl Fn(&Path) -> PathBuf, truths: impl FnOnce() -> CliResult<BTreeMap<String, f64>>) -> CliResult<Self> {
        Ok(match p.backend {
            BackendKind::Model => {
                let path = resolve(p.model.as_deref().expect("validated"));
                let bundle = load_bundle(&path)?;
                Backends::Model(bundle.replicas.into_iter().map(|r| DigitModelBackend::new(r.model)).collect())
            }
            BackendKind::Remote => Backends::Remote(Box::new(RemoteBackend::new(p.remote.clone().expect("validated"))?)),
            BackendKind::Mock => {
                let mut m = MockBackend::new(truths()?, p.mock.seed);
                m.hallucination_rate = p.mock.hallucination_rate;
                m.non_numeric_rate = p.mock.non_numeric_rate;
                m.noise = p.mock.noise;
                Backends::Mock(m)
            }
            _ => Backends::None,
        })
    }

    pub fn refs(&self) -> Vec<&dyn Backend> {
        match self {
            Backends::None => Vec::new(),
            Backends::Model(v) => v.iter().map(|b| b as &dyn Backend).collect(),
            Backends::Remote(r) => vec![r.as_ref() as &dyn Backend],
            Backends::Mock(m) => vec![m as &dyn Backend],
        }
    }
}

/// Query text to truth over every query of `w` (later occurrences win).
pub fn workload_truths(catalog: &Catalog, w: &Workload) -> CliResult<BTreeMap<String, f64>> {
    let mut db = initial_state(catalog, w, DEFAULT_BUCKETS, DEFAULT_MCV)?;
    let mut out = BTreeMap::new();
    for it in &w.items {
        match &it.statement {
            Statement::Write(op) => apply_write(&mut db, op)?,
            Statement::Query(q) => {
                let t = match it.truth {
                    Some(t) => t,
                    None => execute_count(&db, q)?,
                };
                out.insert(q.render(), t as f64);
            }
        }
    }
    Ok(out)
}

/// Worked examples: the first `n` train-split queries with their truths.
pub fn fewshot_examples(w: &Workload, n: usize) -> Vec<FewShot> {
    w.in_split(Split::Train)
        .filter_map(|(q, it)| it.truth.map(|t| FewShot { query: q.render(), cardinality: t }))
        .take(n)
        .collect()
}

/// Threshold from the file, or the grid candidate with the lowest median
/// Q-error on the validation split (10 without validation queries).
pub fn choose_tau(p: &PipelineFile, backend: &dyn Backend, catalog: &Catalog, w: &Workload, fewshot: &[FewShot]) -> CliResult<f64> {
    if let Some(t) = p.tau {
        return Ok(t);
    }
    let reference = p.reference_baseline();
    let opts = p.prompt_options(Some(fewshot.to_vec()));
    let mut items = Vec::new();
    // validation truths of write workloads depend on replay position; tune on static ones only
    let is_static = !w.items.iter().any(|i| matches!(i.statement, Statement::Write(_)));
    for (q, it) in w.in_split(Split::Validation).filter(|_| is_static) {
        let truth = match it.truth {
            Some(t) => t,
            None => execute_count(catalog, q)?,
        };
        let r = reference.estimate(catalog, q, Some(truth))?;
        let refs: &[Estimate] = std::slice::from_ref(&r);
        items.push(ValidationItem {
            prompt: build_prompt(q, catalog, refs, &opts)?,
            reference: r,
            truth: truth as f64,
        });
    }
    if items.is_empty() {
        log::info!("no validation queries; using tau = 10");
        return Ok(10.0);
    }
    let i_max = if p.self_correction { p.i_max } else { 0 };
    Ok(grid_search_threshold(backend, &items, &p.tau_grid, i_max, &DecodeOptions::greedy())?)
}

pub fn llm_config(p: &PipelineFile, tau: f64, fewshot: Vec<FewShot>) -> LlmConfig {
    LlmConfig {
        reference: p.reference_baseline(),
        tau,
        i_max: p.i_max,
        ablation: p.ablation(),
        fewshot,
        runs: p.runs,
        level: p.level,
        epsilon: p.epsilon,
        seed: p.seed,
    }
}

/// The core pipeline for `p` borrowing `backends`.
pub fn make_pipeline<'a>(p: &PipelineFile, backends: &'a Backends, config: LlmConfig) -> Pipeline<'a> {
    match p.baseline() {
        Some(b) => Pipeline::Baseline(b),
        None => Pipeline::Llm {
            replicas: backends.refs(),
            config,
        },
    }
}
