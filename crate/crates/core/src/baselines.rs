//! Pointwise baselines sharing the encoder family and training loop of PairReranker.
//!
//! * SimCLS: cosine between first-token states of separately encoded source
//!   and candidate, trained with a margin ranking loss against the reference.
//! * SummaReranker (our setup): cross-encoder over `(source, candidate)` with a
//!   per-metric sigmoid head, trained to separate the best candidate from the
//!   rest. A single shared head stands in for the mixture of experts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{Checkpoint, RerankerKind, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::metrics::{argmax_first, oracle_select, MetricId};
use crate::nn::{Encoder, Graph, Grads, Mlp, ParamId, ParamStore, Tensor, Var};
use crate::pair_encoder::{ArchConfig, TruncationLimits};
use crate::pair_trainer::{aggregate_order, heldout_split, select_training_pairs, PairSample, TrainConfig};
use crate::scalar::{sigmoid, Scalar};
use crate::store::ScoredPool;
use crate::training::{finite_difference_check, run_loop, LogEntry};
use crate::vocab::{Vocab, BOS_ID, CANDIDATE1_ID, SEP_ID, SOURCE_ID};

/// Probabilities are clamped into `[ε, 1 − ε]` before taking logs.
pub const PROB_EPS: f64 = 1e-7;

/// Hinge loss value with gradients for candidate scores and the reference score.
#[derive(Debug, Clone, PartialEq)]
pub struct SimClsLoss<F> {
    pub loss: F,
    pub grad_scores: Vec<F>,
    pub grad_reference: F,
}

/// Margin ranking loss over candidate scores listed best-first.
///
/// `Σ_j max(0, s_j − ŝ) + Σ_i Σ_{j>i} max(0, s_j − s_i + (j − i)·λ)`.
/// `quality` holds the metric values behind the order and must be non-increasing.
pub fn simcls_loss<F: Scalar>(
    scores: &[F],
    quality: &[f64],
    reference_score: F,
    lambda: F,
) -> Result<SimClsLoss<F>> {
    if scores.len() != quality.len() {
        return Err(Error::Shape(format!(
            "{} scores but {} quality values",
            scores.len(),
            quality.len()
        )));
    }
    if lambda < F::zero() {
        return Err(Error::Validation("margin λ must be non-negative".into()));
    }
    if quality.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Validation("candidates are not sorted by descending quality".into()));
    }
    let mut loss = F::zero();
    let mut grad = vec![F::zero(); scores.len()];
    let mut grad_ref = F::zero();
    for (j, &s) in scores.iter().enumerate() {
        let h = s - reference_score;
        if h > F::zero() {
            loss = loss + h;
            grad[j] = grad[j] + F::one();
            grad_ref = grad_ref - F::one();
        }
    }
    for i in 0..scores.len() {
        for j in i + 1..scores.len() {
            let h = scores[j] - scores[i] + F::of_usize(j - i) * lambda;
            if h > F::zero() {
                loss = loss + h;
                grad[j] = grad[j] + F::one();
                grad[i] = grad[i] - F::one();
            }
        }
    }
    Ok(SimClsLoss {
        loss,
        grad_scores: grad,
        grad_reference: grad_ref,
    })
}

/// `−log p* − Σ_{i≠*} log(1 − p_i)` per metric, averaged over metrics.
///
/// `probs[c][m]` is candidate `c`'s probability for metric `m`; `best[m]` the
/// index of the best candidate under metric `m`. Returns the loss and its
/// gradient with respect to `probs`.
pub fn summareranker_loss<F: Scalar>(probs: &[Vec<F>], best: &[usize]) -> Result<(F, Vec<Vec<F>>)> {
    let metrics = best.len();
    if metrics == 0 || probs.iter().any(|p| p.len() != metrics) {
        return Err(Error::Shape("probabilities must have one column per metric".into()));
    }
    if let Some(&b) = best.iter().find(|&&b| b >= probs.len()) {
        return Err(Error::Validation(format!("best index {b} outside pool of {}", probs.len())));
    }
    let (lo, hi) = (F::of(PROB_EPS), F::one() - F::of(PROB_EPS));
    let n = F::of_usize(metrics);
    let mut loss = F::zero();
    let mut grad = vec![vec![F::zero(); metrics]; probs.len()];
    let mut clamped = false;
    for (m, &b) in best.iter().enumerate() {
        for (c, p) in probs.iter().enumerate() {
            let raw = p[m];
            let q = raw.max(lo).min(hi);
            clamped |= q != raw;
            if c == b {
                loss = loss - q.ln();
                grad[c][m] = -F::one() / (q * n);
            } else {
                loss = loss - (F::one() - q).ln();
                grad[c][m] = F::one() / ((F::one() - q) * n);
            }
        }
    }
    if clamped {
        log::warn!("summareranker_loss: probabilities clamped to [{PROB_EPS}, 1 - {PROB_EPS}]");
    }
    Ok((loss / n, grad))
}

/// Argmax of predicted scores; ties go to the lowest index.
pub fn rank_by_scores(scores: &[f64]) -> Result<usize> {
    argmax_first(scores).ok_or_else(|| Error::Validation("cannot rank an empty pool".into()))
}

fn truncated(vocab: &Vocab, text: &str, max: usize, what: &str) -> Result<Vec<usize>> {
    let mut ids = vocab.encode(text);
    if ids.is_empty() {
        return Err(Error::Validation(format!("{what} segment is empty")));
    }
    ids.truncate(max.max(1));
    Ok(ids)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseScorer<F: Scalar> {
    pub kind: RerankerKind,
    pub params: ParamStore<F>,
    pub encoder: Encoder,
    /// Scoring head; SummaReranker only.
    pub head: Option<Mlp>,
    pub vocab: Vocab,
    pub metrics: Vec<MetricId>,
    pub limits: TruncationLimits,
}

impl<F: Scalar> PointwiseScorer<F> {
    pub fn new(
        kind: RerankerKind,
        vocab: Vocab,
        arch: &ArchConfig,
        metrics: &[MetricId],
        limits: Option<TruncationLimits>,
        seed: u64,
    ) -> Result<Self> {
        if kind == RerankerKind::PairReranker {
            return Err(Error::Config("PairReranker is not a pointwise scorer".into()));
        }
        if metrics.is_empty() {
            return Err(Error::Config("metric list is empty".into()));
        }
        if !vocab.has_special_tokens() {
            return Err(Error::Config("vocabulary lacks the marker tokens".into()));
        }
        let limits = limits.unwrap_or_else(|| TruncationLimits::for_capacity(arch.max_len));
        if limits.assembled_max() > arch.max_len {
            return Err(Error::Config("truncation limits exceed encoder capacity".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::default();
        let encoder = Encoder::new(&mut params, "encoder", arch.encoder_config(vocab.len()), &mut rng)?;
        let d = arch.width;
        let head = (kind == RerankerKind::SummaReranker)
            .then(|| Mlp::new(&mut params, "head", &[2 * d, d, d, d, d, metrics.len()], &mut rng));
        Ok(PointwiseScorer {
            kind,
            params,
            encoder,
            head,
            vocab,
            metrics: metrics.to_vec(),
            limits,
        })
    }

    /// First-token final state of `<s> text </s>`.
    fn embed(&self, g: &mut Graph<'_, F>, text: &str, max: usize) -> Result<Var> {
        let mut ids = vec![BOS_ID];
        ids.extend(truncated(&self.vocab, text, max, "text")?);
        ids.push(SEP_ID);
        let h = self.encoder.forward(g, &ids)?;
        Ok(g.gather_rows(h, &[0]))
    }

    fn cosine_checked(&self, g: &mut Graph<'_, F>, a: Var, b: Var) -> Result<Var> {
        let zero = |v: Var, g: &Graph<'_, F>| g.value(v).sum_sq() == F::zero();
        if zero(a, g) || zero(b, g) {
            return Err(Error::Numerical("zero-norm embedding in cosine score".into()));
        }
        Ok(g.cosine(a, b))
    }

    pub fn simcls_score(&self, source: &str, candidate: &str) -> Result<F> {
        self.require(RerankerKind::SimCls)?;
        let mut g = Graph::new(&self.params);
        let hs = self.embed(&mut g, source, self.limits.source_max)?;
        let hc = self.embed(&mut g, candidate, self.limits.cand_max)?;
        let c = self.cosine_checked(&mut g, hs, hc)?;
        Ok(g.value(c).data[0])
    }

    /// Per-metric logits for `<s><source> x </s><candidate1> c </s>`.
    fn cross_logits(&self, g: &mut Graph<'_, F>, source: &str, candidate: &str) -> Result<Var> {
        let head = self.head.as_ref().ok_or_else(|| Error::Config("model has no scoring head".into()))?;
        let src = truncated(&self.vocab, source, self.limits.source_max, "source")?;
        let cand = truncated(&self.vocab, candidate, self.limits.cand_max, "candidate")?;
        let mut ids = vec![BOS_ID, SOURCE_ID];
        ids.extend(&src);
        ids.push(SEP_ID);
        let anchor = ids.len();
        ids.push(CANDIDATE1_ID);
        ids.extend(&cand);
        ids.push(SEP_ID);
        let h = self.encoder.forward(g, &ids)?;
        let hs = g.gather_rows(h, &[1]);
        let hc = g.gather_rows(h, &[anchor]);
        let x = g.concat_cols(&[hs, hc]);
        Ok(head.forward(g, x))
    }

    /// Per-metric probabilities of `candidate` being the best.
    pub fn summareranker_probs(&self, source: &str, candidate: &str) -> Result<Vec<F>> {
        self.require(RerankerKind::SummaReranker)?;
        let mut g = Graph::new(&self.params);
        let l = self.cross_logits(&mut g, source, candidate)?;
        Ok(g.value(l).data.iter().map(|&x| sigmoid(x)).collect())
    }

    fn require(&self, kind: RerankerKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Config(format!("model is {}, not {}", self.kind.name(), kind.name())));
        }
        Ok(())
    }

    /// Predicted per-metric scores of one candidate (SimCLS repeats its single score).
    pub fn candidate_scores(&self, source: &str, candidate: &str) -> Result<Vec<F>> {
        match self.kind {
            RerankerKind::SimCls => Ok(vec![self.simcls_score(source, candidate)?; self.metrics.len()]),
            _ => self.summareranker_probs(source, candidate),
        }
    }

    /// One scalar per candidate: the cosine, or the mean over metric heads.
    pub fn pool_scores(&self, pool: &ScoredPool) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        pool.candidates
            .par_iter()
            .map(|c| {
                let s = self.candidate_scores(&pool.source, &c.text)?;
                Ok(s.iter().map(|x| x.as_f64()).sum::<f64>() / s.len() as f64)
            })
            .collect()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: FORMAT_VERSION,
            kind: self.kind,
            metrics: self.metrics.clone(),
            limits: self.limits,
            encoder: self.encoder.config,
            vocab: self.vocab.clone(),
            notes: Default::default(),
            params: self.params.to_file(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let arch = ArchConfig {
            width: ck.encoder.width,
            layers: ck.encoder.layers,
            heads: ck.encoder.heads,
            ff_width: ck.encoder.ff_width,
            max_len: ck.encoder.max_len,
            use_positions: ck.encoder.use_positions,
            vocab_max: ck.vocab.len(),
        };
        let mut m = PointwiseScorer::new(ck.kind, ck.vocab.clone(), &arch, &ck.metrics, Some(ck.limits), 0)?;
        m.params.load_file(&ck.params)?;
        Ok(m)
    }
}

/// Pointwise selection: argmax predicted score, lowest index on ties.
pub fn rank_pointwise<F: Scalar>(model: &PointwiseScorer<F>, pool: &ScoredPool) -> Result<usize> {
    if pool.is_empty() {
        return Err(Error::Validation(format!("pool `{}` is empty", pool.example_id)));
    }
    rank_by_scores(&model.pool_scores(pool)?)
}

/// One training unit for a pointwise baseline: a pool in quality order.
#[derive(Debug, Clone)]
pub struct PoolSample {
    pub source: String,
    pub target: String,
    /// Candidate texts, best first.
    pub texts: Vec<String>,
    /// Mean-rank keys matching `texts` (non-increasing).
    pub quality: Vec<f64>,
    /// Per-metric index (into `texts`) of the best candidate.
    pub best: Vec<usize>,
}

impl PoolSample {
    pub fn from_pool(pool: &ScoredPool, metrics: &[MetricId]) -> Result<Self> {
        let order = aggregate_order(pool, metrics)?;
        let pos_of: Vec<usize> = {
            let mut p = vec![0; order.len()];
            for (pos, &i) in order.iter().enumerate() {
                p[i] = pos;
            }
            p
        };
        let m = order.len() as f64;
        let best = metrics
            .iter()
            .map(|&mt| oracle_select(pool, mt).map(|i| pos_of[i]))
            .collect::<Result<_>>()?;
        Ok(PoolSample {
            source: pool.source.clone(),
            target: pool.target.clone(),
            texts: order.iter().map(|&i| pool.candidates[i].text.clone()).collect(),
            quality: (0..order.len()).map(|p| m - p as f64).collect(),
            best,
        })
    }
}

/// Loss and gradients of one pool for either baseline.
pub fn pool_loss_and_grads<F: Scalar>(
    model: &PointwiseScorer<F>,
    params: &ParamStore<F>,
    sample: &PoolSample,
    lambda: f64,
) -> Result<(F, Grads<F>)> {
    let mut g = Graph::new(params);
    match model.kind {
        RerankerKind::SimCls => {
            let hs = model.embed(&mut g, &sample.source, model.limits.source_max)?;
            let href = model.embed(&mut g, &sample.target, model.limits.cand_max)?;
            let ref_var = model.cosine_checked(&mut g, hs, href)?;
            let mut vars = Vec::with_capacity(sample.texts.len());
            for t in &sample.texts {
                let hc = model.embed(&mut g, t, model.limits.cand_max)?;
                vars.push(model.cosine_checked(&mut g, hs, hc)?);
            }
            let scores: Vec<F> = vars.iter().map(|&v| g.value(v).data[0]).collect();
            let r = simcls_loss(&scores, &sample.quality, g.value(ref_var).data[0], F::of(lambda))?;
            let mut seeds: Vec<(Var, Tensor<F>)> = vars
                .iter()
                .zip(&r.grad_scores)
                .map(|(&v, &d)| (v, Tensor::from_vec(1, 1, vec![d])))
                .collect();
            seeds.push((ref_var, Tensor::from_vec(1, 1, vec![r.grad_reference])));
            Ok((r.loss, g.backward(&seeds)))
        }
        RerankerKind::SummaReranker => {
            let mut logits = Vec::with_capacity(sample.texts.len());
            for t in &sample.texts {
                logits.push(model.cross_logits(&mut g, &sample.source, t)?);
            }
            let probs: Vec<Vec<F>> = logits
                .iter()
                .map(|&v| g.value(v).data.iter().map(|&x| sigmoid(x)).collect())
                .collect();
            let (loss, dprob) = summareranker_loss(&probs, &sample.best)?;
            let seeds: Vec<(Var, Tensor<F>)> = logits
                .iter()
                .zip(probs.iter().zip(&dprob))
                .map(|(&v, (p, d))| {
                    let dl = p.iter().zip(d).map(|(&p, &d)| d * p * (F::one() - p)).collect::<Vec<_>>();
                    (v, Tensor::row_vector(dl))
                })
                .collect();
            Ok((loss, g.backward(&seeds)))
        }
        RerankerKind::PairReranker => Err(Error::Config("not a pointwise model".into())),
    }
}

/// Pairwise accuracy of pointwise scores on labelled pairs.
pub fn pointwise_pair_accuracy<F: Scalar>(
    model: &PointwiseScorer<F>,
    params: &ParamStore<F>,
    pairs: &[PairSample],
) -> Result<f64> {
    let view = PointwiseScorer {
        params: params.clone(),
        ..model.clone()
    };
    let (mut hits, mut total) = (0usize, 0usize);
    for s in pairs {
        let a = view.candidate_scores(&s.source, &s.cand_a)?;
        let b = view.candidate_scores(&s.source, &s.cand_b)?;
        for (z, (x, y)) in s.labels.iter().zip(a.iter().zip(&b)) {
            total += 1;
            if (x >= y) == *z {
                hits += 1;
            }
        }
    }
    Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
}

pub struct PointwiseOutcome<F: Scalar> {
    pub model: PointwiseScorer<F>,
    pub log: Vec<LogEntry>,
    pub best_heldout_acc: Option<f64>,
    pub epoch_losses: Vec<f64>,
}

/// Train a pointwise baseline with the same schedule, held-out split and
/// model selection as PairReranker. `lambda` is SimCLS's margin step.
pub fn train_pointwise<F: Scalar>(
    mut model: PointwiseScorer<F>,
    pools: &[ScoredPool],
    cfg: &TrainConfig,
    lambda: f64,
    start_step: usize,
) -> Result<PointwiseOutcome<F>> {
    cfg.validate()?;
    if pools.is_empty() {
        return Err(Error::Validation("no training pools".into()));
    }
    let metrics = model.metrics.clone();
    let samples: Vec<PoolSample> = pools
        .iter()
        .map(|p| {
            if p.is_transfer() {
                return Err(Error::TransferMode(p.example_id.clone()));
            }
            PoolSample::from_pool(p, &metrics).map_err(|e| Error::Config(format!("{e}")))
        })
        .collect::<Result<_>>()?;
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
        |_, _| Ok(train_idx.iter().map(|&i| &samples[i]).collect::<Vec<_>>()),
        |params, s| {
            let (l, g) = pool_loss_and_grads(structure, params, s, lambda)?;
            Ok((l.as_f64(), g))
        },
        |params| {
            if heldout.is_empty() {
                Ok(None)
            } else {
                pointwise_pair_accuracy(structure, params, &heldout).map(Some)
            }
        },
    )?;
    model.params = outcome.best;
    Ok(PointwiseOutcome {
        model,
        log: outcome.log,
        best_heldout_acc: outcome.best_score,
        epoch_losses: outcome.epoch_losses,
    })
}

/// Finite-difference check of a baseline's loss over all parameters.
pub fn pointwise_gradient_check<F: Scalar>(
    model: &PointwiseScorer<F>,
    sample: &PoolSample,
    lambda: f64,
    step: f64,
) -> Result<f64> {
    let mut params = model.params.clone();
    let ids: Vec<ParamId> = params.ids().collect();
    finite_difference_check(&mut params, &ids, step, |p| pool_loss_and_grads(model, p, sample, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simcls_hand_cases() {
        let r = simcls_loss(&[0.9f64, 0.5, 0.1], &[3.0, 2.0, 1.0], 1.0, 0.1).unwrap();
        assert!(r.loss.abs() < 1e-12);
        let r = simcls_loss(&[0.1f64, 0.9], &[2.0, 1.0], 0.0, 0.0).unwrap();
        assert!((r.loss - 1.8).abs() < 1e-12);
        assert_eq!(r.grad_scores, vec![1.0 - 1.0, 1.0 + 1.0]);
        assert_eq!(r.grad_reference, -2.0);
        assert!(simcls_loss(&[0.1f64, 0.9], &[1.0, 2.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn summareranker_hand_cases() {
        let ln2 = 2f64.ln();
        let (l, _) = summareranker_loss(&[vec![0.5f64], vec![0.5]], &[0]).unwrap();
        assert!((l - 2.0 * ln2).abs() < 1e-12);
        let (l, _) = summareranker_loss(&[vec![0.5f64], vec![0.5], vec![0.5]], &[0]).unwrap();
        assert!((l - 3.0 * ln2).abs() < 1e-12);
        let (l, _) = summareranker_loss(&[vec![1.0f64 - 1e-12], vec![1e-12]], &[0]).unwrap();
        assert!(l < 1e-6);
        assert!(summareranker_loss(&[vec![0.5f64]], &[3]).is_err());
    }

    #[test]
    fn pointwise_argmax() {
        assert_eq!(rank_by_scores(&[0.2, 0.8, 0.3]).unwrap(), 1);
        assert_eq!(rank_by_scores(&[0.4, 0.4, 0.4]).unwrap(), 0);
        assert!(rank_by_scores(&[]).is_err());
    }
}
