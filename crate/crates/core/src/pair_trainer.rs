//! Training pairs, the multi-metric pairwise loss and the PairReranker trainer.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricId;
use crate::nn::{Graph, Grads, OptimizerKind, ParamId, ParamStore, Tensor};
use crate::pair_encoder::{ScoreVector, ScorerModel};
use crate::scalar::{log_sigmoid, sigmoid, Scalar};
use crate::store::ScoredPool;
use crate::training::{finite_difference_check, run_loop, LogEntry, LoopSpec};

/// An ordered candidate pair with per-metric labels for slot `a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSample {
    pub source: String,
    pub cand_a: String,
    pub cand_b: String,
    pub index_a: usize,
    pub index_b: usize,
    /// `true` iff `cand_a` scores at least as high as `cand_b` on that metric.
    pub labels: Vec<bool>,
}

impl PairSample {
    pub fn labels_b(&self) -> Vec<bool> {
        self.labels.iter().map(|z| !z).collect()
    }

    /// The same pair with slots exchanged and labels complemented.
    pub fn swapped(&self) -> PairSample {
        PairSample {
            source: self.source.clone(),
            cand_a: self.cand_b.clone(),
            cand_b: self.cand_a.clone(),
            index_a: self.index_b,
            index_b: self.index_a,
            labels: self.labels_b(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossForm {
    /// Binary cross-entropy on each slot: slot a with label z, slot b with 1 − z.
    #[default]
    Symmetric,
    /// `−z_a·log σ(s_a) − (1 − z_b)·log σ(s_b)`, kept for comparison.
    Printed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub k_pairs: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub max_learning_rate: f64,
    pub warmup_ratio: f64,
    pub optimizer: OptimizerKind,
    pub max_grad_norm: Option<f64>,
    pub heldout_fraction: f64,
    pub loss_form: LossForm,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k_pairs: 1,
            epochs: 5,
            batch_size: 64,
            max_learning_rate: 1e-5,
            warmup_ratio: 0.05,
            optimizer: OptimizerKind::Adafactor,
            max_grad_norm: Some(1.0),
            heldout_fraction: 0.05,
            loss_form: LossForm::Symmetric,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.k_pairs == 0 {
            errs.push("k_pairs must be >= 1".to_string());
        }
        if self.batch_size == 0 {
            errs.push("batch_size must be >= 1".to_string());
        }
        if !(self.max_learning_rate > 0.0) {
            errs.push("max_learning_rate must be positive".to_string());
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            errs.push("warmup_ratio must lie in [0, 1)".to_string());
        }
        if !(0.0..1.0).contains(&self.heldout_fraction) {
            errs.push("heldout_fraction must lie in [0, 1)".to_string());
        }
        if self.max_grad_norm.is_some_and(|n| !(n > 0.0)) {
            errs.push("max_grad_norm must be positive".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs.join("; ")))
        }
    }

    pub(crate) fn loop_spec(&self, start_step: usize) -> LoopSpec {
        LoopSpec {
            epochs: self.epochs,
            batch_size: self.batch_size,
            max_learning_rate: self.max_learning_rate,
            warmup_ratio: self.warmup_ratio,
            optimizer: self.optimizer,
            max_grad_norm: self.max_grad_norm,
            seed: self.seed,
            start_step,
        }
    }
}

/// Fractional (tie-averaged) ranks, 1 = best, for descending `scores`.
fn fractional_ranks(scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Candidate indices from best to worst by mean per-metric rank; ties keep pool order.
pub fn aggregate_order(pool: &ScoredPool, metrics: &[MetricId]) -> Result<Vec<usize>> {
    let m = pool.len();
    let mut mean_rank = vec![0.0; m];
    for &metric in metrics {
        for (acc, r) in mean_rank.iter_mut().zip(fractional_ranks(&pool.metric_scores(metric)?)) {
            *acc += r / metrics.len() as f64;
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| mean_rank[a].total_cmp(&mean_rank[b]));
    Ok(order)
}

/// Per-metric labels for the ordered pair `(a, b)`.
pub fn pair_labels(pool: &ScoredPool, metrics: &[MetricId], a: usize, b: usize) -> Result<Vec<bool>> {
    metrics
        .iter()
        .map(|&m| {
            let s = pool.metric_scores(m)?;
            Ok(s[a] >= s[b])
        })
        .collect()
}

/// Couple the r-th best with the r-th worst candidate, `k` times, each pair
/// in a random slot order.
pub fn select_training_pairs(
    pool: &ScoredPool,
    metrics: &[MetricId],
    k: usize,
    rng: &mut impl Rng,
) -> Result<Vec<PairSample>> {
    if k == 0 {
        return Err(Error::Config("k_pairs must be >= 1".into()));
    }
    if pool.len() < 2 * k {
        return Err(Error::Validation(format!(
            "pool `{}` has {} candidates, {k} pairs need {}",
            pool.example_id,
            pool.len(),
            2 * k
        )));
    }
    let order = aggregate_order(pool, metrics)?;
    let m = order.len();
    (0..k)
        .map(|r| {
            let (mut a, mut b) = (order[r], order[m - 1 - r]);
            if rng.gen_bool(0.5) {
                std::mem::swap(&mut a, &mut b);
            }
            Ok(PairSample {
                source: pool.source.clone(),
                cand_a: pool.candidates[a].text.clone(),
                cand_b: pool.candidates[b].text.clone(),
                index_a: a,
                index_b: b,
                labels: pair_labels(pool, metrics, a, b)?,
            })
        })
        .collect()
}

/// Loss value and its gradient with respect to both slots' scores.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<F> {
    pub loss: F,
    pub grad_a: Vec<F>,
    pub grad_b: Vec<F>,
}

/// Pairwise loss averaged over metrics.
pub fn pair_loss<F: Scalar>(
    s_a: &ScoreVector<F>,
    s_b: &ScoreVector<F>,
    labels: &[bool],
    form: LossForm,
) -> Result<LossGrad<F>> {
    if s_a.len() != s_b.len() || s_a.len() != labels.len() || labels.is_empty() {
        return Err(Error::Shape(format!(
            "pair_loss: scores {} / {} and labels {}",
            s_a.len(),
            s_b.len(),
            labels.len()
        )));
    }
    if s_a.0.iter().chain(&s_b.0).any(|x| !x.is_finite()) {
        return Err(Error::Numerical("pair_loss received a non-finite score".into()));
    }
    let n = F::of_usize(labels.len());
    let mut loss = F::zero();
    let mut grad_a = Vec::with_capacity(labels.len());
    let mut grad_b = Vec::with_capacity(labels.len());
    for ((&a, &b), &z) in s_a.0.iter().zip(&s_b.0).zip(labels) {
        let (l, ga, gb) = match (form, z) {
            // slot a target z, slot b target 1 − z
            (LossForm::Symmetric, true) => (
                -log_sigmoid(a) - log_sigmoid(-b),
                sigmoid(a) - F::one(),
                sigmoid(b),
            ),
            (LossForm::Symmetric, false) => (
                -log_sigmoid(-a) - log_sigmoid(b),
                sigmoid(a),
                sigmoid(b) - F::one(),
            ),
            // z_a = z, z_b = 1 − z, so (1 − z_b) = z
            (LossForm::Printed, true) => (
                -log_sigmoid(a) - log_sigmoid(b),
                sigmoid(a) - F::one(),
                sigmoid(b) - F::one(),
            ),
            (LossForm::Printed, false) => (F::zero(), F::zero(), F::zero()),
        };
        loss = loss + l;
        grad_a.push(ga / n);
        grad_b.push(gb / n);
    }
    Ok(LossGrad {
        loss: loss / n,
        grad_a,
        grad_b,
    })
}

/// Loss and parameter gradients of one sample.
pub fn sample_loss_and_grads<F: Scalar>(
    model: &ScorerModel<F>,
    params: &ParamStore<F>,
    sample: &PairSample,
    form: LossForm,
) -> Result<(F, Grads<F>)> {
    let input = model.assemble(&sample.source, &sample.cand_a, &sample.cand_b)?;
    let mut g = Graph::new(params);
    let vars = model.forward(&mut g, &input)?;
    let s_a = ScoreVector(g.value(vars.s_i).data.clone());
    let s_b = ScoreVector(g.value(vars.s_j).data.clone());
    let lg = pair_loss(&s_a, &s_b, &sample.labels, form)?;
    let m = lg.grad_a.len();
    let grads = g.backward(&[
        (vars.s_i, Tensor::from_vec(1, m, lg.grad_a)),
        (vars.s_j, Tensor::from_vec(1, m, lg.grad_b)),
    ]);
    Ok((lg.loss, grads))
}

/// Fraction of (pair, metric) entries where `s_a ≥ s_b` matches the label.
pub fn pairwise_accuracy<F: Scalar>(
    model: &ScorerModel<F>,
    params: &ParamStore<F>,
    samples: &[PairSample],
) -> Result<f64> {
    use rayon::prelude::*;
    let per: Vec<(usize, usize)> = samples
        .par_iter()
        .map(|s| {
            let input = model.assemble(&s.source, &s.cand_a, &s.cand_b)?;
            let mut g = Graph::new(params);
            let v = model.forward(&mut g, &input)?;
            let (a, b) = (g.value(v.s_i), g.value(v.s_j));
            let hits = s
                .labels
                .iter()
                .zip(a.data.iter().zip(&b.data))
                .filter(|(&z, (&x, &y))| (x >= y) == z)
                .count();
            Ok((hits, s.labels.len()))
        })
        .collect::<Result<_>>()?;
    let (hits, total) = per.iter().fold((0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
}

/// Seeded split of pool indices into (train, held-out).
pub fn heldout_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_4e1d));
    let held = if n >= 2 && fraction > 0.0 {
        ((n as f64 * fraction).ceil() as usize).clamp(1, n - 1)
    } else {
        0
    };
    let train = idx.split_off(held);
    (train, idx)
}

pub struct TrainOutcome<F: Scalar> {
    /// Parameters from the epoch with the best held-out pairwise accuracy.
    pub model: ScorerModel<F>,
    pub log: Vec<LogEntry>,
    pub best_heldout_acc: Option<f64>,
    pub epoch_losses: Vec<f64>,
    pub heldout_pools: Vec<usize>,
}

/// Train PairReranker on scored pools.
pub fn train<F: Scalar>(
    model: ScorerModel<F>,
    pools: &[ScoredPool],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<F>> {
    train_from_step(model, pools, cfg, 0)
}

/// [`train`] with log step numbers continuing from `start_step`.
pub fn train_from_step<F: Scalar>(
    mut model: ScorerModel<F>,
    pools: &[ScoredPool],
    cfg: &TrainConfig,
    start_step: usize,
) -> Result<TrainOutcome<F>> {
    cfg.validate()?;
    if pools.is_empty() {
        return Err(Error::Validation("no training pools".into()));
    }
    let metrics = model.metrics.clone();
    for p in pools {
        for &m in &metrics {
            p.metric_scores(m).map_err(|_| {
                Error::Config(format!(
                    "pool `{}` is not scored for `{m}`, which the model is configured for",
                    p.example_id
                ))
            })?;
        }
        if p.len() < 2 * cfg.k_pairs {
            return Err(Error::Validation(format!(
                "pool `{}` has {} candidates, fewer than 2·k_pairs",
                p.example_id,
                p.len()
            )));
        }
    }
    let (train_idx, held_idx) = heldout_split(pools.len(), cfg.heldout_fraction, cfg.seed);
    let mut held_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut heldout = Vec::new();
    for &i in &held_idx {
        heldout.extend(select_training_pairs(&pools[i], &metrics, cfg.k_pairs, &mut held_rng)?);
    }

    let params = std::mem::take(&mut model.params);
    let structure = &model;
    let outcome = run_loop(
        params,
        cfg.loop_spec(start_step),
        |_, rng| {
            let mut out = Vec::with_capacity(train_idx.len() * cfg.k_pairs);
            for &i in &train_idx {
                out.extend(select_training_pairs(&pools[i], &metrics, cfg.k_pairs, rng)?);
            }
            Ok(out)
        },
        |params, s| {
            let (l, g) = sample_loss_and_grads(structure, params, s, cfg.loss_form)?;
            Ok((l.as_f64(), g))
        },
        |params| {
            if heldout.is_empty() {
                Ok(None)
            } else {
                pairwise_accuracy(structure, params, &heldout).map(Some)
            }
        },
    )?;
    model.params = outcome.best;
    Ok(TrainOutcome {
        model,
        log: outcome.log,
        best_heldout_acc: outcome.best_score,
        epoch_losses: outcome.epoch_losses,
        heldout_pools: held_idx,
    })
}

/// Max relative error between analytic head gradients and central differences.
pub fn gradient_check<F: Scalar>(
    model: &ScorerModel<F>,
    sample: &PairSample,
    form: LossForm,
    step: f64,
) -> Result<f64> {
    let mut params = model.params.clone();
    let head_ids: Vec<ParamId> = model
        .head
        .layers()
        .iter()
        .flat_map(|l| [l.weight, l.bias])
        .collect();
    finite_difference_check(&mut params, &head_ids, step, |p| {
        sample_loss_and_grads(model, p, sample, form)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{CandidateRecord, Example};

    fn pool(scores: &[&[f64]], metrics: &[MetricId]) -> ScoredPool {
        let ex = Example {
            id: "e".into(),
            source: "src".into(),
            target: "t".into(),
        };
        let cands = scores
            .iter()
            .enumerate()
            .map(|(i, s)| CandidateRecord {
                text: format!("c{i}"),
                method: "beam".into(),
                scores: Some(metrics.iter().copied().zip(s.iter().copied()).collect()),
            })
            .collect();
        ScoredPool::new(&ex, cands)
    }

    #[test]
    fn best_worst_coupling() {
        let m = [MetricId::Rouge1];
        let p = pool(&[&[0.9], &[0.1], &[0.5], &[0.4]], &m);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pairs = select_training_pairs(&p, &m, 2, &mut rng).unwrap();
        let mut sets: Vec<[usize; 2]> = pairs
            .iter()
            .map(|s| {
                let mut v = [s.index_a, s.index_b];
                v.sort();
                v
            })
            .collect();
        sets.sort();
        assert_eq!(sets, vec![[0, 1], [2, 3]]);
        for s in &pairs {
            let sc = p.metric_scores(m[0]).unwrap();
            assert_eq!(s.labels[0], sc[s.index_a] >= sc[s.index_b]);
        }
    }

    #[test]
    fn thirty_candidates_one_pair() {
        let m = [MetricId::Rouge1, MetricId::Bleu];
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 30.0, (i % 7) as f64]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let p = pool(&refs, &m);
        let order = aggregate_order(&p, &m).unwrap();
        let pairs = select_training_pairs(&p, &m, 1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(pairs.len(), 1);
        let mut got = [pairs[0].index_a, pairs[0].index_b];
        got.sort();
        let mut want = [order[0], order[29]];
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn equal_scores_label_slot_a() {
        let m = [MetricId::Rouge1];
        let p = pool(&[&[0.5], &[0.5], &[0.5]], &m);
        let pairs = select_training_pairs(&p, &m, 1, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!(pairs[0].labels[0]);
    }

    #[test]
    fn too_small_pool_rejected() {
        let m = [MetricId::Rouge1];
        let p = pool(&[&[0.5], &[0.4], &[0.1]], &m);
        assert!(select_training_pairs(&p, &m, 2, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn loss_at_zero_logits() {
        let z = ScoreVector(vec![0.0f64]);
        let lg = pair_loss(&z, &z, &[true], LossForm::Symmetric).unwrap();
        assert!((lg.loss - 2.0 * 2f64.ln()).abs() < 1e-12);
        let lg = pair_loss(&z, &z, &[true], LossForm::Printed).unwrap();
        assert!((lg.loss - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_correct_loss_vanishes() {
        let lg = pair_loss(&ScoreVector(vec![40.0f64]), &ScoreVector(vec![-40.0]), &[true], LossForm::Symmetric)
            .unwrap();
        assert!(lg.loss < 1e-15);
        assert!(lg.grad_a[0].abs() < 1e-15 && lg.grad_b[0].abs() < 1e-15);
    }

    #[test]
    fn metric_average() {
        let a = ScoreVector(vec![0.3f64, -1.2]);
        let b = ScoreVector(vec![0.7f64, 0.4]);
        let l1 = pair_loss(&ScoreVector(vec![0.3]), &ScoreVector(vec![0.7]), &[true], LossForm::Symmetric).unwrap();
        let l2 = pair_loss(&ScoreVector(vec![-1.2]), &ScoreVector(vec![0.4]), &[false], LossForm::Symmetric).unwrap();
        let both = pair_loss(&a, &b, &[true, false], LossForm::Symmetric).unwrap();
        assert!((both.loss - (l1.loss + l2.loss) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_scores_rejected() {
        let r = pair_loss(&ScoreVector(vec![f64::NAN]), &ScoreVector(vec![0.0]), &[true], LossForm::Symmetric);
        assert!(matches!(r, Err(Error::Numerical(_))));
    }

    #[test]
    fn heldout_split_partitions() {
        let (t, h) = heldout_split(40, 0.05, 3);
        assert_eq!(h.len(), 2);
        let mut all: Vec<_> = t.iter().chain(&h).copied().collect();
        all.sort();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
        assert_eq!(heldout_split(1, 0.05, 3).1.len(), 0);
    }

    #[test]
    fn fractional_ranks_average_ties() {
        assert_eq!(fractional_ranks(&[0.1, 0.5, 0.5, 0.9]), vec![4.0, 2.5, 2.5, 1.0]);
    }
}
