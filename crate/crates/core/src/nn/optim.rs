use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamStore};
use super::tensor::Tensor;
use crate::scalar::Scalar;

/// Linear warmup to the peak rate, then linear decay to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarmupLinear {
    pub peak: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl WarmupLinear {
    pub fn new(peak: f64, warmup_ratio: f64, total_steps: usize) -> Self {
        WarmupLinear {
            peak,
            warmup_steps: (warmup_ratio * total_steps as f64).ceil() as usize,
            total_steps,
        }
    }

    /// Rate for the zero-based optimizer step `step`.
    pub fn rate(&self, step: usize) -> f64 {
        if step < self.warmup_steps {
            self.peak * step as f64 / self.warmup_steps.max(1) as f64
        } else {
            let left = self.total_steps.saturating_sub(step) as f64;
            self.peak * left / self.total_steps.saturating_sub(self.warmup_steps).max(1) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adafactor,
    Adam,
}

pub trait Optimizer<F: Scalar> {
    fn step(&mut self, params: &mut ParamStore<F>, grads: &Grads<F>, lr: F);
}

pub fn make_optimizer<F: Scalar>(kind: OptimizerKind, params: &ParamStore<F>) -> Box<dyn Optimizer<F> + Send> {
    match kind {
        OptimizerKind::Adam => Box::new(Adam::new(params)),
        OptimizerKind::Adafactor => Box::new(Adafactor::new(params)),
    }
}

pub struct Adam<F> {
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Tensor<F>>,
    v: Vec<Tensor<F>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(params: &ParamStore<F>) -> Self {
        let zeros = params.zeros_like().tensors;
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

impl<F: Scalar> Optimizer<F> for Adam<F> {
    fn step(&mut self, params: &mut ParamStore<F>, grads: &Grads<F>, lr: F) {
        self.t += 1;
        let (b1, b2) = (F::of(self.beta1), F::of(self.beta2));
        let c1 = F::one() - F::of(self.beta1.powi(self.t));
        let c2 = F::one() - F::of(self.beta2.powi(self.t));
        let eps = F::of(self.eps);
        for (i, id) in params.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let g = &grads.tensors[i].data;
            let (m, v) = (&mut self.m[i].data, &mut self.v[i].data);
            let p = &mut params.get_mut(id).data;
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (F::one() - b1) * g[k];
                v[k] = b2 * v[k] + (F::one() - b2) * g[k] * g[k];
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                p[k] = p[k] - lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

enum SecondMoment<F> {
    Factored { row: Vec<F>, col: Vec<F> },
    Full(Vec<F>),
}

/// Adafactor with an externally supplied learning rate, no first moment,
/// factored second moments for matrices and update clipping at RMS 1.
pub struct Adafactor<F> {
    eps: f64,
    clip: f64,
    decay_rate: f64,
    t: i32,
    state: Vec<SecondMoment<F>>,
}

impl<F: Scalar> Adafactor<F> {
    pub fn new(params: &ParamStore<F>) -> Self {
        let state = params
            .ids()
            .map(|id| {
                let t = params.get(id);
                if t.rows > 1 && t.cols > 1 {
                    SecondMoment::Factored {
                        row: vec![F::zero(); t.rows],
                        col: vec![F::zero(); t.cols],
                    }
                } else {
                    SecondMoment::Full(vec![F::zero(); t.len()])
                }
            })
            .collect();
        Adafactor {
            eps: 1e-30,
            clip: 1.0,
            decay_rate: -0.8,
            t: 0,
            state,
        }
    }
}

impl<F: Scalar> Optimizer<F> for Adafactor<F> {
    fn step(&mut self, params: &mut ParamStore<F>, grads: &Grads<F>, lr: F) {
        self.t += 1;
        let beta2 = F::of(1.0 - (self.t as f64).powf(self.decay_rate));
        let eps = F::of(self.eps);
        for (i, id) in params.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let g = &grads.tensors[i];
            let mut update = vec![F::zero(); g.len()];
            match &mut self.state[i] {
                SecondMoment::Factored { row, col } => {
                    let (r, c) = (g.rows, g.cols);
                    for (ri, rv) in row.iter_mut().enumerate() {
                        let mean = g.row(ri).iter().map(|&x| x * x + eps).sum::<F>() / F::of_usize(c);
                        *rv = beta2 * *rv + (F::one() - beta2) * mean;
                    }
                    for (ci, cv) in col.iter_mut().enumerate() {
                        let mean = (0..r).map(|ri| g.get(ri, ci) * g.get(ri, ci) + eps).sum::<F>()
                            / F::of_usize(r);
                        *cv = beta2 * *cv + (F::one() - beta2) * mean;
                    }
                    let row_mean = row.iter().copied().sum::<F>() / F::of_usize(r);
                    for ri in 0..r {
                        for ci in 0..c {
                            let v = row[ri] * col[ci] / row_mean;
                            update[ri * c + ci] = g.get(ri, ci) / v.sqrt();
                        }
                    }
                }
                SecondMoment::Full(v) => {
                    for (k, vk) in v.iter_mut().enumerate() {
                        let gk = g.data[k];
                        *vk = beta2 * *vk + (F::one() - beta2) * (gk * gk + eps);
                        update[k] = gk / vk.sqrt();
                    }
                }
            }
            let rms = (update.iter().map(|&u| u * u).sum::<F>() / F::of_usize(update.len().max(1))).sqrt();
            let denom = (rms / F::of(self.clip)).max(F::one());
            let p = &mut params.get_mut(id).data;
            for (pk, &u) in p.iter_mut().zip(&update) {
                *pk = *pk - lr * u / denom;
            }
        }
    }
}
