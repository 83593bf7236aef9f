use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::DigitModel;
use super::{detokenize, DigitToken};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub epochs: usize,
    pub lr: f64,
    pub hidden: usize,
    pub seed: u64,
    pub batch_size: usize,
    /// Gradient norm cap; `0` disables clipping.
    pub clip: f64,
    pub optimizer: Optimizer,
    /// Fail the run when an epoch-mean loss exceeds the previous one by more
    /// than this relative margin.
    pub monotone_tolerance: Option<f64>,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            epochs: 50,
            lr: 1e-2,
            hidden: 64,
            seed: 0,
            batch_size: 32,
            clip: 5.0,
            optimizer: Optimizer::Sgd,
            monotone_tolerance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub model: DigitModel,
    pub hyper: Hyper,
    /// Mean training nll per epoch, accumulated while the epoch ran.
    pub trace: Vec<f64>,
}

pub type Example = (Vec<f64>, Vec<DigitToken>);

pub fn mean_nll(model: &DigitModel, data: &[Example]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    data.iter().map(|(x, y)| model.nll(x, y)).sum::<f64>() / data.len() as f64
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Minimizes mean nll over `data` with mini-batch gradient steps. Pass the
/// concatenation of several datasets to train on their summed objective.
pub fn train(data: &[Example], hyper: &Hyper) -> Result<TrainReport> {
    let Some((x0, _)) = data.first() else {
        return Err(Error::EmptyTrainingSet);
    };
    let d = x0.len();
    for (i, (x, y)) in data.iter().enumerate() {
        if x.len() != d {
            return Err(Error::InvalidArgument(alloc::format!(
                "example {i} has {} features, expected {d}",
                x.len()
            )));
        }
        detokenize(y)?;
    }
    if hyper.hidden == 0 || hyper.batch_size == 0 || !(hyper.lr > 0.0) {
        return Err(Error::InvalidArgument("hidden, batch size and lr must be positive".into()));
    }
    let mut model = DigitModel::new(d, hyper.hidden, hyper.seed);
    let n_params = model.param_count();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ 0x5EED_0F_DA7A);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; n_params];
    let mut adam = Adam {
        m: vec![0.0; n_params],
        v: vec![0.0; n_params],
        t: 0,
    };
    let mut trace = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (x, y) = &data[i];
                let loss = model.accumulate_gradient(x, y, scale, &mut grad);
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, example: i });
                }
                total += loss;
            }
            if hyper.clip > 0.0 {
                let norm = libm::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
                if norm > hyper.clip {
                    let k = hyper.clip / norm;
                    grad.iter_mut().for_each(|g| *g *= k);
                }
            }
            match hyper.optimizer {
                Optimizer::Sgd => {
                    for (p, g) in model.params.iter_mut().zip(&grad) {
                        *p -= hyper.lr * g;
                    }
                }
                Optimizer::Adam => {
                    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
                    adam.t += 1;
                    let c1 = 1.0 - libm::pow(b1, adam.t as f64);
                    let c2 = 1.0 - libm::pow(b2, adam.t as f64);
                    for i in 0..n_params {
                        let g = grad[i];
                        adam.m[i] = b1 * adam.m[i] + (1.0 - b1) * g;
                        adam.v[i] = b2 * adam.v[i] + (1.0 - b2) * g * g;
                        model.params[i] -= hyper.lr * (adam.m[i] / c1) / (libm::sqrt(adam.v[i] / c2) + eps);
                    }
                }
            }
        }
        let mean = total / data.len() as f64;
        if let (Some(tol), Some(&prev)) = (hyper.monotone_tolerance, trace.last()) {
            if mean > prev * (1.0 + tol) {
                return Err(Error::LossIncreased {
                    epoch,
                    previous: prev,
                    current: mean,
                });
            }
        }
        trace.push(mean);
    }
    if !model.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: hyper.epochs,
            example: 0,
        });
    }
    Ok(TrainReport {
        model,
        hyper: hyper.clone(),
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_dev: f64,
    /// `(parameter index, analytic, numeric)` per checked parameter.
    pub checked: Vec<(usize, f64, f64)>,
}

/// Analytic gradient against central differences with step `h`.
/// `indices: None` checks `subset` parameters drawn with `seed`.
/// Relative deviation is `|a - n| / max(|a| + |n|, 1e-6)`.
pub fn grad_check(
    model: &DigitModel,
    x: &[f64],
    target: &[DigitToken],
    h: f64,
    indices: Option<&[usize]>,
    subset: usize,
    seed: u64,
) -> GradCheck {
    let (_, analytic) = model.gradient(x, target);
    let idx: Vec<usize> = match indices {
        Some(i) => i.to_vec(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..subset).map(|_| rng.random_range(0..model.param_count())).collect()
        }
    };
    let mut probe = model.clone();
    let mut checked = Vec::with_capacity(idx.len());
    let mut worst: f64 = 0.0;
    for i in idx {
        let p = probe.params[i];
        probe.params[i] = p + h;
        let up = probe.nll(x, target);
        probe.params[i] = p - h;
        let down = probe.nll(x, target);
        probe.params[i] = p;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic.0[i];
        let dev = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
        worst = worst.max(dev);
        checked.push((i, a, numeric));
    }
    GradCheck {
        max_rel_dev: worst,
        checked,
    }
}

#[cfg(test)]
mod tests {
    use super::super::model::{log_softmax, Layout};
    use super::super::{tokenize_cardinality, DecodeMode, Decoded, VOCAB};
    use super::*;

    fn random_x(d: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn uniform_model_loss() {
        let m = DigitModel::zeros(5, 8);
        for c in [0u64, 7, 21, 123_456] {
            let y = tokenize_cardinality(c);
            let expect = y.len() as f64 * libm::log(12.0);
            assert!((m.nll(&random_x(5, c), &y) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_model_has_zero_loss_on_its_output() {
        // Only the output bias is set: STOP gets all the mass at every step.
        let mut m = DigitModel::zeros(3, 4);
        let l = Layout::new(3, 4);
        for k in 0..VOCAB {
            m.params[l.bo + k] = if k == DigitToken::Stop.index() { 0.0 } else { -1000.0 };
        }
        let x = [0.3, -0.2, 0.1];
        let out = m.decode(&x, DecodeMode::Greedy);
        assert_eq!(out, Decoded::Complete(vec![DigitToken::Stop]));
        assert!(m.nll(&x, out.tokens()) < 1e-12);
    }

    #[test]
    fn nll_matches_log_sum_oracle() {
        for seed in 0..5 {
            let m = DigitModel::new(7, 6, seed);
            let x = random_x(7, 100 + seed);
            let y = tokenize_cardinality(9_876 * seed + 13);
            // Oracle: sum the log of raw step probabilities.
            let dists = m.step_distributions(&x, &y);
            let oracle: f64 = y.iter().zip(&dists).map(|(t, p)| -libm::log(p[t.index()])).sum();
            assert!((m.nll(&x, &y) - oracle).abs() < 1e-10);
            for p in &dists {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                assert!(p.iter().all(|v| *v >= 0.0));
            }
        }
    }

    #[test]
    fn log_softmax_is_stable() {
        let l = log_softmax(&[1000.0, 0.0]);
        assert!(l[0].abs() < 1e-12 && (l[1] + 1000.0).abs() < 1e-9);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..10 {
            let m = DigitModel::new(6, 5, seed);
            let x = random_x(6, seed + 50);
            let y = tokenize_cardinality(31_415 + seed * 977);
            let g = grad_check(&m, &x, &y, 1e-5, None, 60, seed);
            assert!(g.max_rel_dev < 1e-4, "seed {seed}: {}", g.max_rel_dev);
        }
    }

    #[test]
    fn every_parameter_block_is_checked() {
        let m = DigitModel::new(4, 3, 9);
        let all: Vec<usize> = (0..m.param_count()).collect();
        let g = grad_check(&m, &random_x(4, 1), &tokenize_cardinality(4051), 1e-5, Some(&all), 0, 0);
        assert!(g.max_rel_dev < 1e-4, "{}", g.max_rel_dev);
    }

    #[test]
    fn finite_difference_error_grows_with_step() {
        let m = DigitModel::new(6, 5, 3);
        let x = random_x(6, 3);
        let y = tokenize_cardinality(8_080);
        let fine = grad_check(&m, &x, &y, 1e-5, None, 40, 1).max_rel_dev;
        let coarse = grad_check(&m, &x, &y, 1e-1, None, 40, 1).max_rel_dev;
        assert!(coarse > fine * 10.0, "fine {fine} coarse {coarse}");
    }

    #[test]
    fn stationary_point_has_zero_gradient() {
        // Output bias saturated on the target token.
        let mut m = DigitModel::zeros(3, 4);
        let l = Layout::new(3, 4);
        m.params[l.bo] = 200.0;
        let y = [DigitToken::Digit(0)];
        let (loss, g) = m.gradient(&[0.1, 0.2, 0.3], &y);
        assert!(loss < 1e-12);
        assert!(g.0.iter().all(|v| v.abs() < 1e-12));
        let c = grad_check(&m, &[0.1, 0.2, 0.3], &y, 1e-5, None, 20, 0);
        assert!(c.checked.iter().all(|(_, a, n)| a.abs() < 1e-9 && n.abs() < 1e-9));
    }

    #[test]
    fn memorizes_single_example() {
        let x = vec![0.5, -0.25, 1.0];
        let y = tokenize_cardinality(21);
        let data = vec![(x.clone(), y.clone())];
        let h = Hyper {
            epochs: 200,
            lr: 0.1,
            hidden: 16,
            seed: 4,
            batch_size: 1,
            ..Hyper::default()
        };
        let r = train(&data, &h).unwrap();
        assert!(r.model.nll(&x, &y) < 0.01, "{}", r.model.nll(&x, &y));
        assert_eq!(r.model.decode(&x, DecodeMode::Greedy), Decoded::Complete(y));
    }

    #[test]
    fn training_is_deterministic_and_monotone_for_small_lr() {
        let data: Vec<Example> = (0..24u64)
            .map(|i| (random_x(4, i), tokenize_cardinality(i * 37 % 500)))
            .collect();
        let h = Hyper {
            epochs: 15,
            lr: 0.05,
            hidden: 8,
            seed: 11,
            batch_size: 24,
            monotone_tolerance: Some(0.0),
            ..Hyper::default()
        };
        let a = train(&data, &h).unwrap();
        let b = train(&data, &h).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.model, b.model);
        assert!(a.trace.last().unwrap() < a.trace.first().unwrap());
    }

    #[test]
    fn training_errors() {
        assert_eq!(train(&[], &Hyper::default()).unwrap_err(), Error::EmptyTrainingSet);
        let bad = vec![(vec![0.0], vec![DigitToken::Stop])];
        assert!(matches!(train(&bad, &Hyper::default()), Err(Error::MalformedDigits(_))));
        let huge = vec![(vec![f64::NAN], tokenize_cardinality(3))];
        assert!(matches!(train(&huge, &Hyper::default()), Err(Error::NonFiniteLoss { epoch: 0, .. })));
    }

    #[test]
    fn decode_modes() {
        let m = DigitModel::new(5, 8, 2);
        let x = random_x(5, 2);
        let g = m.decode(&x, DecodeMode::Greedy);
        assert_eq!(g, m.decode(&x, DecodeMode::Greedy));
        assert_eq!(g, m.decode(&x, DecodeMode::Sampled { temperature: 0.0, seed: 99 }));
        let s1 = m.decode(&x, DecodeMode::Sampled { temperature: 1.0, seed: 5 });
        assert_eq!(s1, m.decode(&x, DecodeMode::Sampled { temperature: 1.0, seed: 5 }));
        let distinct = (0..20)
            .map(|s| m.decode(&x, DecodeMode::Sampled { temperature: 1.5, seed: s }))
            .collect::<Vec<_>>();
        assert!(distinct.iter().any(|d| *d != distinct[0]));
    }

    #[test]
    fn adversarial_model_overflows() {
        let mut m = DigitModel::zeros(2, 3);
        let l = Layout::new(2, 3);
        m.params[l.bo + 7] = 50.0;
        match m.decode(&[0.0, 0.0], DecodeMode::Greedy) {
            Decoded::Overflow(t) => assert_eq!(t.len(), super::super::MAX_STEPS),
            other => panic!("{other:?}"),
        }
    }
}
