//! Training data from workloads and parallel replica training.

use std::thread;

use cardest_core::bench::Baseline;
use cardest_core::catalog::{Catalog, DEFAULT_BUCKETS, DEFAULT_MCV};
use cardest_core::ensemble::{resample_indices, Replica};
use cardest_core::exec::{apply_write, execute_count};
use cardest_core::numlm::{featurize, tokenize_cardinality, train, Example, Hyper, TrainReport};
use cardest_core::prompt::{append_feedback, build_prompt, PromptOptions};
use cardest_core::workloads::{initial_state, Split, Statement, Workload};
use cardest_core::{Error, Estimate, Result};

/// How prompts are built for training examples.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleOptions {
    pub reference: Baseline,
    pub prompt: PromptOptions,
    /// Also emit each example with one feedback turn whose previous output
    /// was off by `feedback_factor`, so the model sees correction prompts.
    pub feedback_copies: bool,
    pub feedback_factor: f64,
}

impl Default for ExampleOptions {
    fn default() -> Self {
        ExampleOptions {
            reference: Baseline::Independence,
            prompt: PromptOptions::default(),
            feedback_copies: true,
            feedback_factor: 1000.0,
        }
    }
}

/// Examples and the feature-slot groups that overflowed while building them.
#[derive(Debug, Clone, Default)]
pub struct ExampleSet {
    pub examples: Vec<Example>,
    pub truncated: Vec<(usize, String)>,
}

/// Featurized examples for every query of `split`, replaying writes so each
/// query sees the data it was labelled on.
pub fn examples_from_workload(catalog: &Catalog, w: &Workload, split: Split, opts: &ExampleOptions) -> Result<ExampleSet> {
    let mut db = initial_state(catalog, w, DEFAULT_BUCKETS, DEFAULT_MCV)?;
    let mut out = ExampleSet::default();
    for (index, item) in w.items.iter().enumerate() {
        let q = match &item.statement {
            Statement::Write(op) => {
                apply_write(&mut db, op)?;
                continue;
            }
            Statement::Query(q) => q,
        };
        if item.split != split {
            continue;
        }
        let truth = match item.truth {
            Some(t) => t,
            None => execute_count(&db, q)?,
        };
        let reference = opts.reference.estimate(&db, q, Some(truth))?;
        let refs: &[Estimate] = if opts.prompt.include_estimates { std::slice::from_ref(&reference) } else { &[] };
        let prompt = build_prompt(q, &db, refs, &opts.prompt)?;
        let target = tokenize_cardinality(truth);
        let fv = featurize(&prompt);
        out.truncated.extend(fv.truncated.into_iter().map(|g| (index, g)));
        out.examples.push((fv.values, target.clone()));
        if opts.feedback_copies && prompt.max_feedback > 0 {
            let wrong = (reference.value.max(1.0) * opts.feedback_factor).round() as u64;
            let p2 = append_feedback(&prompt, &wrong.to_string(), &reference)?;
            out.examples.push((featurize(&p2).values, target));
        }
    }
    Ok(out)
}

/// Trains `replicas` models, replica `i` (1-based) on a bootstrap resample
/// drawn with seed `base_seed + i` and trained with that seed, on up to
/// `jobs` threads. Same replica seeds as `ensemble::bootstrap_train`.
pub fn train_replicas(data: &[Example], replicas: usize, base_seed: u64, hyper: &Hyper, jobs: usize) -> Result<Vec<Replica<TrainReport>>> {
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if replicas == 0 {
        return Err(Error::InvalidArgument("replica count must be >= 1".into()));
    }
    let jobs = jobs.max(1);
    let ids: Vec<usize> = (1..=replicas).collect();
    let mut out = Vec::with_capacity(replicas);
    for chunk in ids.chunks(jobs) {
        let results: Vec<Result<Replica<TrainReport>>> = thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&id| {
                    s.spawn(move || {
                        let seed = base_seed.wrapping_add(id as u64);
                        let sample: Vec<Example> = resample_indices(data.len(), data.len(), seed)
                            .into_iter()
                            .map(|i| data[i].clone())
                            .collect();
                        let h = Hyper { seed, ..hyper.clone() };
                        Ok(Replica { id, seed, model: train(&sample, &h)? })
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::Backend("training thread panicked".into()))))
                .collect()
        });
        for r in results {
            out.push(r?);
        }
    }
    Ok(out)
}
