use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::finite::invert;
use super::{log_add, ModelKind, ProcessModel};
use crate::error::{invalid, Result};
use crate::measure::Point;
use crate::seed::rng_from_seed;

/// A realisation of `(X₁, …, Xₙ)` plus latent values where the model has them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub model_id: String,
    pub seed: u64,
    pub values: Vec<Point>,
    /// Triple: one uniform per triple. Sine pair: `Y₁, Z₁, Y₂, Z₂, …`.
    /// m-dependent: `Y₁, …, Y_{n+m}`. CLT: `Z₁, …, Zₙ`.
    pub auxiliary: Option<Vec<f64>>,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scalars(&self) -> Vec<f64> {
        self.values.iter().map(Point::x).collect()
    }
}

/// Sample the first `n` coordinates of `model` from `seed`.
pub fn sample_path(model: &ProcessModel, n: usize, seed: u64) -> Result<PathSample> {
    if n == 0 {
        return invalid("path length must be at least 1");
    }
    let mut rng = rng_from_seed(seed);
    let (values, auxiliary) = draw(model, n, &mut rng);
    Ok(PathSample { model_id: model.id.clone(), seed, values, auxiliary })
}

/// `(qₙ, 1 − qₙ)` for `n = 0..len` under the recursive or mixture update.
pub(crate) fn mixing_schedule(kind: &ModelKind, len: usize) -> Vec<(f64, f64)> {
    match kind {
        ModelKind::RecursivePredictive { q, .. } => (0..len as u64).map(|n| (q.term(n), q.complement(n))).collect(),
        ModelKind::KernelMixture { d, .. } => {
            let mut out = Vec::with_capacity(len);
            let mut ln_acc = f64::NEG_INFINITY;
            for n in 0..len as u64 {
                let ln_d = d.ln_term(n);
                let next = log_add(ln_acc, ln_d);
                out.push(((ln_acc - next).exp(), (ln_d - next).exp()));
                ln_acc = next;
            }
            out
        }
        _ => Vec::new(),
    }
}

fn draw(model: &ProcessModel, n: usize, rng: &mut ChaCha8Rng) -> (Vec<Point>, Option<Vec<f64>>) {
    let mut values = Vec::with_capacity(n);
    match &model.kind {
        ModelKind::Iid { base } => {
            for _ in 0..n {
                values.push(base.point(invert(&base.weights, rng.random())));
            }
            (values, None)
        }
        ModelKind::PolyaUrn { b, r, reinforcement } => {
            let probs: Vec<f64> = reinforcement.iter().map(|x| x.prob).collect();
            let (mut black, mut total) = (*b, b + r);
            for _ in 0..n {
                let y = rng.random::<f64>() < black / total;
                let j = if probs.len() > 1 { invert(&probs, rng.random()) } else { 0 };
                let (bb, rr) = (reinforcement[j].black, reinforcement[j].red);
                if y {
                    black += bb;
                    total += bb;
                } else {
                    total += rr;
                }
                values.push(Point::new(&[bb, rr, f64::from(u8::from(y))]).expect("three coordinates"));
            }
            (values, None)
        }
        ModelKind::RecursivePredictive { initial, kernels, .. } | ModelKind::KernelMixture { initial, kernels, .. } => {
            let schedule = mixing_schedule(&model.kind, n);
            let mut w = initial.weights.clone();
            for (step, &(q, c)) in schedule.iter().enumerate() {
                let i = invert(&w, rng.random());
                values.push(initial.point(i));
                let row = kernels[step % kernels.len()].row(i);
                for (wj, kj) in w.iter_mut().zip(row) {
                    *wj = q * *wj + c * kj;
                }
            }
            (values, None)
        }
        ModelKind::Triple { d } => {
            let mut aux = Vec::with_capacity(n / 3 + 1);
            let mut k = 1u64;
            while values.len() < n {
                let dk = d.term(k);
                let a = rng.random::<f64>() < dk;
                let b = rng.random::<f64>() < dk;
                let u: f64 = rng.random();
                let c = (a && b) || (!a && !b && u < dk / (1.0 - dk));
                for bit in [a, b, c] {
                    values.push(Point::scalar(f64::from(u8::from(bit))));
                }
                aux.push(u);
                k += 1;
            }
            values.truncate(n);
            (values, Some(aux))
        }
        ModelKind::SinePair {} => {
            let mut aux = Vec::with_capacity(n + 1);
            values.push(Point::scalar(0.0));
            let mut k = 1u64;
            while values.len() < n {
                let freq = TAU * k as f64;
                let (y, z) = loop {
                    let y: f64 = rng.random();
                    let z: f64 = rng.random();
                    let w = 2.0 * rng.random::<f64>();
                    if w < 1.0 + (freq * y).sin() * (TAU * z).cos() {
                        break (y, z);
                    }
                };
                values.push(Point::scalar(y));
                values.push(Point::scalar(z));
                aux.push(y);
                aux.push(z);
                k += 1;
            }
            values.truncate(n);
            (values, Some(aux))
        }
        ModelKind::MDependent { m, base } => {
            let m = *m as usize;
            let ys: Vec<f64> = (0..n + m).map(|_| base.alphabet[invert(&base.weights, rng.random())]).collect();
            for i in 0..n {
                values.push(Point::scalar(ys[i] - ys[i + m]));
            }
            (values, Some(ys))
        }
        ModelKind::Clt { innovation } => {
            let zs: Vec<f64> = (0..n).map(|_| innovation.sample(rng)).collect();
            let mut s = 0.0;
            for (i, z) in zs.iter().enumerate() {
                s += z;
                values.push(Point::scalar(s / ((i + 1) as f64).sqrt()));
            }
            (values, Some(zs))
        }
    }
}
