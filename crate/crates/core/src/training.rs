//! Optimisation loop and finite-difference checking shared by every reranker.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{make_optimizer, Grads, OptimizerKind, ParamId, ParamStore, WarmupLinear};
use crate::scalar::Scalar;

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heldout_pair_acc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LoopSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub max_learning_rate: f64,
    pub warmup_ratio: f64,
    pub optimizer: OptimizerKind,
    pub max_grad_norm: Option<f64>,
    pub seed: u64,
    pub start_step: usize,
}

pub(crate) struct LoopOutcome<F: Scalar> {
    pub best: ParamStore<F>,
    pub best_score: Option<f64>,
    pub log: Vec<LogEntry>,
    pub epoch_losses: Vec<f64>,
}

/// Mini-batch descent with warmup + linear decay. `epoch_samples` draws the
/// samples for an epoch (it must return the same count every epoch);
/// `sample_grad` returns one sample's loss and gradients; `evaluate` scores
/// the current parameters after each epoch (higher is better) and picks the
/// snapshot that is returned.
pub(crate) fn run_loop<F, S, E, G, V>(
    mut params: ParamStore<F>,
    spec: LoopSpec,
    mut epoch_samples: E,
    sample_grad: G,
    mut evaluate: V,
) -> Result<LoopOutcome<F>>
where
    F: Scalar,
    S: Send + Sync,
    E: FnMut(usize, &mut ChaCha8Rng) -> Result<Vec<S>>,
    G: Fn(&ParamStore<F>, &S) -> Result<(f64, Grads<F>)> + Sync,
    V: FnMut(&ParamStore<F>) -> Result<Option<f64>>,
{
    if spec.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut optimizer = make_optimizer(spec.optimizer, &params);
    let mut log = Vec::new();
    let mut epoch_losses = Vec::new();
    let mut best = params.clone();
    let mut best_score: Option<f64> = None;
    let mut schedule: Option<WarmupLinear> = None;
    let mut step = spec.start_step;
    let mut expected = None;

    for epoch in 0..spec.epochs {
        let mut samples = epoch_samples(epoch, &mut rng)?;
        if samples.is_empty() {
            return Err(Error::Validation("no training samples".into()));
        }
        if *expected.get_or_insert(samples.len()) != samples.len() {
            return Err(Error::Validation("sample count changed between epochs".into()));
        }
        samples.shuffle(&mut rng);
        let sched = *schedule.get_or_insert_with(|| {
            let per_epoch = samples.len().div_ceil(spec.batch_size);
            WarmupLinear::new(spec.max_learning_rate, spec.warmup_ratio, per_epoch * spec.epochs)
        });
        let mut epoch_loss = 0.0;
        for batch in samples.chunks(spec.batch_size) {
            let results: Vec<(f64, Grads<F>)> = batch
                .par_iter()
                .map(|s| sample_grad(&params, s))
                .collect::<Result<_>>()?;
            let mut grads = params.zeros_like();
            let mut loss = 0.0;
            for (l, g) in &results {
                loss += l;
                grads.add_assign(g);
            }
            let n = batch.len() as f64;
            loss /= n;
            grads.scale(F::of(1.0 / n));
            if let Some(max) = spec.max_grad_norm {
                grads.clip_global_norm(F::of(max));
            }
            let lr = sched.rate(step - spec.start_step);
            optimizer.step(&mut params, &grads, F::of(lr));
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("loss became {loss} at step {step}")));
            }
            epoch_loss += loss * n;
            log.push(LogEntry {
                step,
                epoch,
                loss,
                lr,
                heldout_pair_acc: None,
            });
            step += 1;
        }
        epoch_losses.push(epoch_loss / samples.len() as f64);
        let score = evaluate(&params)?;
        if let Some(last) = log.last_mut() {
            last.heldout_pair_acc = score;
        }
        let improved = match (score, best_score) {
            (Some(s), Some(b)) => s > b,
            (Some(_), None) => true,
            (None, _) => true,
        };
        if improved {
            best = params.clone();
            best_score = score.or(best_score);
        }
    }
    Ok(LoopOutcome {
        best,
        best_score,
        log,
        epoch_losses,
    })
}

/// Largest relative gap between analytic and central-difference gradients
/// over the listed parameters. Entries where both are below `1e-10` count as exact.
pub fn finite_difference_check<F, L>(
    params: &mut ParamStore<F>,
    ids: &[ParamId],
    step: f64,
    loss_and_grads: L,
) -> Result<f64>
where
    F: Scalar,
    L: Fn(&ParamStore<F>) -> Result<(F, Grads<F>)>,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Validation(format!("finite-difference step must be positive, got {step}")));
    }
    let (_, analytic) = loss_and_grads(params)?;
    let h = F::of(step);
    let mut worst = 0.0f64;
    for &id in ids {
        for k in 0..params.get(id).len() {
            let orig = params.get(id).data[k];
            params.get_mut(id).data[k] = orig + h;
            let up = loss_and_grads(params)?.0;
            params.get_mut(id).data[k] = orig - h;
            let down = loss_and_grads(params)?.0;
            params.get_mut(id).data[k] = orig;
            let fd = ((up - down) / (h + h)).as_f64();
            let an = analytic.get(id).data[k].as_f64();
            let scale = fd.abs().max(an.abs());
            if scale > 1e-10 {
                worst = worst.max((fd - an).abs() / scale);
            }
        }
    }
    Ok(worst)
}
