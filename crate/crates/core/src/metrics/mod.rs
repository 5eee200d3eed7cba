//! Reference-based quality metrics, pool scoring, oracle selection and gains.
//!
//! All metrics share one tokenizer ([`tokenize`]) and return fractions:
//! ROUGE and BLEU lie in `[0, 1]`, CIDEr in `[0, 10]`. Reports multiply by
//! [`MetricId::display_scale`] so the printed numbers read like the
//! conventional percentages.

mod bleu;
mod cider;
mod ngram;
mod rouge;
mod tokenize;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::store::ScoredPool;

pub use bleu::{bleu, corpus_bleu};
pub use cider::{cider, CiderIdf, CIDER_MAX_ORDER, CIDER_SCALE};
pub use rouge::{rouge_l, rouge_n, rouge_n_recall};
pub use tokenize::tokenize;

pub const BLEU_MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricId {
    #[serde(rename = "rouge1")]
    Rouge1,
    #[serde(rename = "rouge2")]
    Rouge2,
    #[serde(rename = "rougeL")]
    RougeL,
    #[serde(rename = "bleu")]
    Bleu,
    #[serde(rename = "cider")]
    Cider,
}

impl MetricId {
    pub const ALL: [MetricId; 5] = [
        MetricId::Rouge1,
        MetricId::Rouge2,
        MetricId::RougeL,
        MetricId::Bleu,
        MetricId::Cider,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricId::Rouge1 => "rouge1",
            MetricId::Rouge2 => "rouge2",
            MetricId::RougeL => "rougeL",
            MetricId::Bleu => "bleu",
            MetricId::Cider => "cider",
        }
    }

    /// Multiplier applied when printing: fractions become percentages and
    /// CIDEr's 0..10 range becomes 0..100.
    pub fn display_scale(self) -> f64 {
        match self {
            MetricId::Cider => 10.0,
            _ => 100.0,
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<MetricId>> {
        let list: Vec<MetricId> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if list.is_empty() {
            return Err(Error::Config("metric list is empty".into()));
        }
        Ok(list)
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}

/// Scores candidates against a pool's target. CIDEr needs a corpus-level
/// IDF table, built from the targets of every pool the scorer is made for.
#[derive(Debug, Clone)]
pub struct PoolScorer {
    metrics: Vec<MetricId>,
    cider: Option<CiderIdf>,
}

impl PoolScorer {
    pub fn for_pools(metrics: &[MetricId], pools: &[ScoredPool]) -> Result<Self> {
        if metrics.is_empty() {
            return Err(Error::Config("metric list is empty".into()));
        }
        if let Some(p) = pools.iter().find(|p| p.is_transfer()) {
            return Err(Error::TransferMode(p.example_id.clone()));
        }
        let cider = if metrics.contains(&MetricId::Cider) {
            Some(CiderIdf::new(pools.iter().map(|p| std::iter::once(p.target.as_str())))?)
        } else {
            None
        };
        Ok(PoolScorer {
            metrics: metrics.to_vec(),
            cider,
        })
    }

    pub fn metrics(&self) -> &[MetricId] {
        &self.metrics
    }

    /// Number of documents behind the CIDEr IDF table, if CIDEr is scored.
    pub fn cider_corpus_size(&self) -> Option<usize> {
        self.cider.as_ref().map(CiderIdf::num_docs)
    }

    pub fn score_text(&self, metric: MetricId, candidate: &str, target: &str) -> Result<f64> {
        let value = match metric {
            MetricId::Rouge1 => rouge_n(candidate, target, 1),
            MetricId::Rouge2 => rouge_n(candidate, target, 2),
            MetricId::RougeL => rouge_l(candidate, target),
            MetricId::Bleu => bleu(candidate, &[target], BLEU_MAX_ORDER)?,
            MetricId::Cider => self
                .cider
                .as_ref()
                .ok_or_else(|| Error::Config("scorer was built without CIDEr".into()))?
                .score(candidate, &[target])?,
        };
        Ok(value)
    }

    /// Fill (and overwrite) every candidate's score map for the configured metrics.
    pub fn score_pool(&self, pool: &ScoredPool) -> Result<ScoredPool> {
        if pool.is_transfer() {
            return Err(Error::TransferMode(pool.example_id.clone()));
        }
        let mut out = pool.clone();
        for cand in &mut out.candidates {
            let scores = cand.scores.get_or_insert_with(BTreeMap::new);
            for &m in &self.metrics {
                let v = self.score_text(m, &cand.text, &pool.target)?;
                debug_assert!(v.is_finite());
                scores.insert(m, v);
            }
        }
        Ok(out)
    }

    pub fn score_pools(&self, pools: &[ScoredPool]) -> Result<Vec<ScoredPool>> {
        pools.par_iter().map(|p| self.score_pool(p)).collect()
    }
}

/// Score one pool; CIDEr's IDF corpus is the pool's own target.
pub fn score_pool(pool: &ScoredPool, metrics: &[MetricId]) -> Result<ScoredPool> {
    PoolScorer::for_pools(metrics, std::slice::from_ref(pool))?.score_pool(pool)
}

/// Score a whole split with one shared CIDEr IDF table.
pub fn score_pools(pools: &[ScoredPool], metrics: &[MetricId]) -> Result<Vec<ScoredPool>> {
    PoolScorer::for_pools(metrics, pools)?.score_pools(pools)
}

/// Index of the best candidate; ties go to the lowest index.
pub fn argmax_first<F: PartialOrd + Copy>(values: &[F]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if !(v > values[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}

/// The candidate maximising `metric` against the reference.
pub fn oracle_select(pool: &ScoredPool, metric: MetricId) -> Result<usize> {
    let scores = pool.metric_scores(metric)?;
    argmax_first(&scores)
        .ok_or_else(|| Error::Validation(format!("pool `{}` is empty", pool.example_id)))
}

/// Percentage improvement of `new_value` over `base_value`.
pub fn gain<F: Scalar>(new_value: F, base_value: F) -> Result<F> {
    if !(base_value > F::zero()) {
        return Err(Error::Validation(format!(
            "gain needs a positive base value, got {base_value}"
        )));
    }
    Ok(F::of(100.0) * (new_value - base_value) / base_value)
}

/// Per-metric means over a collection of selected candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub means: BTreeMap<MetricId, f64>,
    pub count: usize,
}

impl MetricReport {
    /// Mean score of the candidate picked by `select` in each pool.
    pub fn from_selection<S>(pools: &[ScoredPool], metrics: &[MetricId], mut select: S) -> Result<Self>
    where
        S: FnMut(&ScoredPool) -> Result<usize>,
    {
        let mut sums: BTreeMap<MetricId, f64> = metrics.iter().map(|&m| (m, 0.0)).collect();
        for pool in pools {
            let idx = select(pool)?;
            let cand = pool.candidates.get(idx).ok_or_else(|| {
                Error::Validation(format!(
                    "selection {idx} out of range for pool `{}` of {}",
                    pool.example_id,
                    pool.len()
                ))
            })?;
            for &m in metrics {
                let v = cand.score(m).ok_or_else(|| {
                    Error::Validation(format!(
                        "pool `{}`: candidate {idx} has no `{m}` score",
                        pool.example_id
                    ))
                })?;
                *sums.get_mut(&m).expect("metric present") += v;
            }
        }
        let n = pools.len();
        let means = sums
            .into_iter()
            .map(|(m, s)| (m, if n == 0 { 0.0 } else { s / n as f64 }))
            .collect();
        Ok(MetricReport { means, count: n })
    }

    pub fn mean(&self, metric: MetricId) -> Option<f64> {
        self.means.get(&metric).copied()
    }
}
