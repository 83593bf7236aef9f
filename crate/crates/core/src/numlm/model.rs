use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DigitToken, MAX_DIGITS, VOCAB};

/// Token positions: up to twelve digits plus `STOP`.
pub const MAX_STEPS: usize = MAX_DIGITS + 1;

/// Offsets of each parameter block inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub d: usize,
    pub h: usize,
    pub we: usize,
    pub be: usize,
    pub ws: usize,
    pub u: usize,
    pub emb: usize,
    pub pos: usize,
    pub bs: usize,
    pub wo: usize,
    pub bo: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(d: usize, h: usize) -> Self {
        let we = 0;
        let be = we + h * d;
        let ws = be + h;
        let u = ws + h * h;
        let emb = u + h * h;
        let pos = emb + VOCAB * h;
        let bs = pos + MAX_STEPS * h;
        let wo = bs + h;
        let bo = wo + VOCAB * h;
        let total = bo + VOCAB;
        Layout {
            d,
            h,
            we,
            be,
            ws,
            u,
            emb,
            pos,
            bs,
            wo,
            bo,
            total,
        }
    }
}

/// Parameters of the digit model, stored flat.
///
/// ```text
/// h0  = tanh(We x + be)
/// s_t = tanh(Ws s_{t-1} + U h0 + E[prev_t] + P[t] + bs),   s_{-1} = h0, prev_0 = PAD
/// p_t = softmax(Wo s_t + bo)
/// ```
///
/// `params` holds, in order: `We` (`h x d`, row-major), `be`, `Ws` (`h x h`),
/// `U` (`h x h`), `E` (`VOCAB x h`, one row per token index), `P`
/// (`MAX_STEPS x h`), `bs`, `Wo` (`VOCAB x h`), `bo`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitModel {
    pub input_dim: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

/// Flat gradient with the same layout as [`DigitModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeMode {
    Greedy,
    Sampled { temperature: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    /// Ended by `STOP` (or by an emitted `PAD`, which leaves it malformed).
    Complete(Vec<DigitToken>),
    /// Twelve digits and no `STOP`.
    Overflow(Vec<DigitToken>),
}

impl Decoded {
    pub fn tokens(&self) -> &[DigitToken] {
        match self {
            Decoded::Complete(t) | Decoded::Overflow(t) => t,
        }
    }
}

fn matvec_add(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        out[r] += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += W^T g`
fn matvec_t_add(w: &[f64], rows: usize, cols: usize, g: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let gr = g[r];
        if gr == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * gr;
        }
    }
}

/// `W += g x^T`
fn outer_add(w: &mut [f64], rows: usize, cols: usize, g: &[f64], x: &[f64]) {
    for r in 0..rows {
        let gr = g[r];
        if gr == 0.0 {
            continue;
        }
        let row = &mut w[r * cols..(r + 1) * cols];
        for (o, b) in row.iter_mut().zip(x) {
            *o += gr * b;
        }
    }
}

pub(crate) fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + libm::log(logits.iter().map(|l| libm::exp(l - m)).sum::<f64>());
    logits.iter().map(|l| l - lse).collect()
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(libm::exp).collect()
}

pub(crate) struct Trace {
    pub h0: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub logits: Vec<Vec<f64>>,
}

impl DigitModel {
    /// Uniform init in `±1/sqrt(fan_in)` for weights, zero biases.
    pub fn new(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let l = Layout::new(input_dim, hidden);
        let mut params = vec![0.0; l.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |range: core::ops::Range<usize>, fan_in: usize, params: &mut [f64]| {
            let a = 1.0 / libm::sqrt(fan_in.max(1) as f64);
            for p in &mut params[range] {
                *p = rng.random_range(-a..a);
            }
        };
        fill(l.we..l.be, input_dim, &mut params);
        fill(l.ws..l.u, hidden, &mut params);
        fill(l.u..l.emb, hidden, &mut params);
        fill(l.emb..l.pos, 1, &mut params);
        fill(l.pos..l.bs, 1, &mut params);
        fill(l.wo..l.bo, hidden, &mut params);
        DigitModel {
            input_dim,
            hidden,
            params,
        }
    }

    /// A model with every parameter zero (uniform outputs).
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        DigitModel {
            input_dim,
            hidden,
            params: vec![0.0; Layout::new(input_dim, hidden).total],
        }
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout::new(self.input_dim, self.hidden)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub(crate) fn encode(&self, x: &[f64]) -> Vec<f64> {
        let l = self.layout();
        let p = &self.params;
        let mut a = p[l.be..l.ws].to_vec();
        matvec_add(&p[l.we..l.be], l.h, l.d, x, &mut a);
        a.into_iter().map(libm::tanh).collect()
    }

    /// One recurrent step: new state and output logits.
    pub(crate) fn step(&self, h0: &[f64], prev_state: &[f64], prev: DigitToken, t: usize) -> (Vec<f64>, Vec<f64>) {
        let l = self.layout();
        let p = &self.params;
        let h = l.h;
        let mut z = p[l.bs..l.wo].to_vec();
        matvec_add(&p[l.ws..l.u], h, h, prev_state, &mut z);
        matvec_add(&p[l.u..l.emb], h, h, h0, &mut z);
        let e = l.emb + prev.index() * h;
        let ps = l.pos + t.min(MAX_STEPS - 1) * h;
        for i in 0..h {
            z[i] += p[e + i] + p[ps + i];
        }
        let s: Vec<f64> = z.into_iter().map(libm::tanh).collect();
        let mut o = p[l.bo..l.bo + VOCAB].to_vec();
        matvec_add(&p[l.wo..l.bo], VOCAB, h, &s, &mut o);
        (s, o)
    }

    pub(crate) fn forward(&self, x: &[f64], target: &[DigitToken]) -> Trace {
        let h0 = self.encode(x);
        let mut states = Vec::with_capacity(target.len());
        let mut logits = Vec::with_capacity(target.len());
        let mut prev_state = h0.clone();
        let mut prev = DigitToken::Pad;
        for (t, &tok) in target.iter().enumerate() {
            let (s, o) = self.step(&h0, &prev_state, prev, t);
            prev_state = s.clone();
            states.push(s);
            logits.push(o);
            prev = tok;
        }
        Trace { h0, states, logits }
    }

    /// Per-step output distributions under teacher forcing on `target`.
    pub fn step_distributions(&self, x: &[f64], target: &[DigitToken]) -> Vec<Vec<f64>> {
        self.forward(x, target).logits.iter().map(|o| softmax(o)).collect()
    }

    /// `-sum_t log p(target_t | x, target_<t)`.
    pub fn nll(&self, x: &[f64], target: &[DigitToken]) -> f64 {
        let tr = self.forward(x, target);
        target
            .iter()
            .zip(&tr.logits)
            .map(|(tok, o)| -log_softmax(o)[tok.index()])
            .sum()
    }

    /// Adds the gradient of `scale * nll` to `grad` and returns the nll.
    pub fn accumulate_gradient(&self, x: &[f64], target: &[DigitToken], scale: f64, grad: &mut [f64]) -> f64 {
        let l = self.layout();
        let h = l.h;
        let p = &self.params;
        let tr = self.forward(x, target);
        let mut loss = 0.0;
        let mut dh0 = vec![0.0; h];
        let mut ds_next = vec![0.0; h];
        for t in (0..target.len()).rev() {
            let logp = log_softmax(&tr.logits[t]);
            let y = target[t].index();
            loss -= logp[y];
            let mut d_o: Vec<f64> = logp.iter().map(|lp| libm::exp(*lp) * scale).collect();
            d_o[y] -= scale;
            let s = &tr.states[t];
            outer_add(&mut grad[l.wo..l.bo], VOCAB, h, &d_o, s);
            for (g, d) in grad[l.bo..l.bo + VOCAB].iter_mut().zip(&d_o) {
                *g += d;
            }
            let mut ds = ds_next.clone();
            matvec_t_add(&p[l.wo..l.bo], VOCAB, h, &d_o, &mut ds);
            let dz: Vec<f64> = ds.iter().zip(s).map(|(d, sv)| d * (1.0 - sv * sv)).collect();
            let prev_state = if t == 0 { &tr.h0 } else { &tr.states[t - 1] };
            outer_add(&mut grad[l.ws..l.u], h, h, &dz, prev_state);
            outer_add(&mut grad[l.u..l.emb], h, h, &dz, &tr.h0);
            let prev = if t == 0 { DigitToken::Pad } else { target[t - 1] };
            let e = l.emb + prev.index() * h;
            let ps = l.pos + t.min(MAX_STEPS - 1) * h;
            for i in 0..h {
                grad[e + i] += dz[i];
                grad[ps + i] += dz[i];
                grad[l.bs + i] += dz[i];
            }
            matvec_t_add(&p[l.u..l.emb], h, h, &dz, &mut dh0);
            let mut back = vec![0.0; h];
            matvec_t_add(&p[l.ws..l.u], h, h, &dz, &mut back);
            if t == 0 {
                for (a, b) in dh0.iter_mut().zip(&back) {
                    *a += b;
                }
            } else {
                ds_next = back;
            }
        }
        let da: Vec<f64> = dh0.iter().zip(&tr.h0).map(|(d, hv)| d * (1.0 - hv * hv)).collect();
        outer_add(&mut grad[l.we..l.be], h, l.d, &da, x);
        for (g, d) in grad[l.be..l.ws].iter_mut().zip(&da) {
            *g += d;
        }
        loss
    }

    pub fn gradient(&self, x: &[f64], target: &[DigitToken]) -> (f64, Gradients) {
        let mut g = vec![0.0; self.params.len()];
        let loss = self.accumulate_gradient(x, target, 1.0, &mut g);
        (loss, Gradients(g))
    }

    /// Autoregressive generation until `STOP` (or an emitted `PAD`), or
    /// overflow after twelve digits.
    pub fn decode(&self, x: &[f64], mode: DecodeMode) -> Decoded {
        let mut rng = match mode {
            DecodeMode::Sampled { seed, temperature } if temperature > 0.0 => Some((ChaCha8Rng::seed_from_u64(seed), temperature)),
            _ => None,
        };
        let h0 = self.encode(x);
        let mut state = h0.clone();
        let mut prev = DigitToken::Pad;
        let mut out = Vec::new();
        for t in 0..MAX_STEPS {
            let (s, o) = self.step(&h0, &state, prev, t);
            let idx = match &mut rng {
                None => argmax(&o),
                Some((rng, temp)) => {
                    let scaled: Vec<f64> = o.iter().map(|v| v / *temp).collect();
                    let probs = softmax(&scaled);
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut pick = VOCAB - 1;
                    for (i, p) in probs.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            pick = i;
                            break;
                        }
                    }
                    pick
                }
            };
            let tok = DigitToken::from_index(idx);
            out.push(tok);
            if !matches!(tok, DigitToken::Digit(_)) {
                return Decoded::Complete(out);
            }
            state = s;
            prev = tok;
        }
        Decoded::Overflow(out)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}
