//! Candidate selection with a pairwise comparator: one bubble pass (m − 1
//! comparisons), a full round robin for analysis, and the self-consistency
//! rate under slot swaps.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricId;
use crate::pair_encoder::ScorerModel;
use crate::scalar::{sigmoid, Scalar};
use crate::store::ScoredPool;

/// Anything that scores an ordered candidate pair of a pool, one value per metric and slot.
pub trait Comparator: Sync {
    fn num_metrics(&self) -> usize;

    fn pair_scores(&self, pool: &ScoredPool, a: usize, b: usize) -> Result<(Vec<f64>, Vec<f64>)>;
}

impl<F: Scalar> Comparator for ScorerModel<F> {
    fn num_metrics(&self) -> usize {
        self.metrics.len()
    }

    fn pair_scores(&self, pool: &ScoredPool, a: usize, b: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let (sa, sb) = self.score_texts(&pool.source, &pool.candidates[a].text, &pool.candidates[b].text)?;
        Ok((sa.to_f64(), sb.to_f64()))
    }
}

/// Reads the reference-based metric scores stored on the pool.
#[derive(Debug, Clone)]
pub struct OracleComparator {
    pub metrics: Vec<MetricId>,
}

impl Comparator for OracleComparator {
    fn num_metrics(&self) -> usize {
        self.metrics.len()
    }

    fn pair_scores(&self, pool: &ScoredPool, a: usize, b: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut sa = Vec::with_capacity(self.metrics.len());
        let mut sb = Vec::with_capacity(self.metrics.len());
        for &m in &self.metrics {
            let s = pool.metric_scores(m)?;
            sa.push(s[a]);
            sb.push(s[b]);
        }
        Ok((sa, sb))
    }
}

/// How per-metric margins decide a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "metric")]
pub enum WinnerRule {
    #[default]
    Mean,
    SingleMetric(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    #[serde(rename = "a")]
    pub index_a: usize,
    #[serde(rename = "b")]
    pub index_b: usize,
    pub winner: usize,
    /// `s_a − s_b` per metric.
    pub margins: Vec<f64>,
    /// `σ(s_a − s_b)` per metric.
    #[serde(skip)]
    pub confidence: Vec<f64>,
}

impl ComparisonResult {
    pub fn mean_margin(&self) -> f64 {
        self.margins.iter().sum::<f64>() / self.margins.len().max(1) as f64
    }
}

/// Slot `a` wins unless the aggregated margin is negative; exact ties keep `a`.
pub fn compare<C: Comparator + ?Sized>(
    cmp: &C,
    pool: &ScoredPool,
    a: usize,
    b: usize,
    rule: WinnerRule,
) -> Result<ComparisonResult> {
    let (sa, sb) = cmp.pair_scores(pool, a, b)?;
    if sa.len() != sb.len() || sa.is_empty() {
        return Err(Error::Shape(format!("comparator returned {} and {} scores", sa.len(), sb.len())));
    }
    let margins: Vec<f64> = sa.iter().zip(&sb).map(|(x, y)| x - y).collect();
    let decisive = match rule {
        WinnerRule::Mean => margins.iter().sum::<f64>() / margins.len() as f64,
        WinnerRule::SingleMetric(i) => *margins.get(i).ok_or_else(|| {
            Error::Config(format!("winner metric index {i} out of range for {} metrics", margins.len()))
        })?,
    };
    let winner = if decisive < 0.0 { b } else { a };
    let confidence = margins.iter().map(|&m| sigmoid(m)).collect();
    Ok(ComparisonResult {
        index_a: a,
        index_b: b,
        winner,
        margins,
        confidence,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BubbleResult {
    /// Index into the original pool.
    pub selected: usize,
    /// Visiting order after the shuffle.
    pub order: Vec<usize>,
    pub trace: Vec<ComparisonResult>,
}

/// One incumbent sweep over `order`; the incumbent always sits in slot a.
pub fn bubble_pass<C: Comparator + ?Sized>(
    cmp: &C,
    pool: &ScoredPool,
    order: &[usize],
    rule: WinnerRule,
) -> Result<BubbleResult> {
    let (&first, rest) = order
        .split_first()
        .ok_or_else(|| Error::Validation(format!("pool `{}` is empty", pool.example_id)))?;
    let mut incumbent = first;
    let mut trace = Vec::with_capacity(rest.len());
    for &challenger in rest {
        let r = compare(cmp, pool, incumbent, challenger, rule)?;
        incumbent = r.winner;
        trace.push(r);
    }
    Ok(BubbleResult {
        selected: incumbent,
        order: order.to_vec(),
        trace,
    })
}

/// Shuffle the pool order, then run a single bubble pass.
pub fn bubble_select<C: Comparator + ?Sized>(
    cmp: &C,
    pool: &ScoredPool,
    rng: &mut impl Rng,
    rule: WinnerRule,
) -> Result<BubbleResult> {
    if pool.is_empty() {
        return Err(Error::Validation(format!("pool `{}` is empty", pool.example_id)));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(rng);
    bubble_pass(cmp, pool, &order, rule)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRobin {
    /// Candidate indices, most wins first.
    pub ranking: Vec<usize>,
    pub wins: Vec<usize>,
    pub mean_margin: Vec<f64>,
    pub comparisons: usize,
}

/// All unordered pairs once, lower index in slot a. Ranked by wins, then by
/// mean margin from the candidate's side, then by index.
pub fn round_robin_rank<C: Comparator + ?Sized>(
    cmp: &C,
    pool: &ScoredPool,
    rule: WinnerRule,
) -> Result<RoundRobin> {
    use rayon::prelude::*;
    let m = pool.len();
    if m == 0 {
        return Err(Error::Validation(format!("pool `{}` is empty", pool.example_id)));
    }
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let results: Vec<ComparisonResult> = pairs
        .par_iter()
        .map(|&(i, j)| compare(cmp, pool, i, j, rule))
        .collect::<Result<_>>()?;
    let mut wins = vec![0usize; m];
    let mut margin_sum = vec![0.0f64; m];
    for r in &results {
        wins[r.winner] += 1;
        let mm = r.mean_margin();
        margin_sum[r.index_a] += mm;
        margin_sum[r.index_b] -= mm;
    }
    let denom = (m.max(2) - 1) as f64;
    let mean_margin: Vec<f64> = margin_sum.iter().map(|s| s / denom).collect();
    let mut ranking: Vec<usize> = (0..m).collect();
    ranking.sort_by(|&x, &y| {
        wins[y]
            .cmp(&wins[x])
            .then(mean_margin[y].total_cmp(&mean_margin[x]))
            .then(x.cmp(&y))
    });
    Ok(RoundRobin {
        ranking,
        wins,
        mean_margin,
        comparisons: results.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub rate: f64,
    pub sampled_pairs: usize,
    pub agreeing_pairs: usize,
    pub skipped_pools: usize,
}

/// Fraction of sampled pairs whose winner is the same candidate under both slot orders.
pub fn consistency_rate<C: Comparator + ?Sized>(
    cmp: &C,
    pools: &[ScoredPool],
    pairs_per_pool: usize,
    rng: &mut impl Rng,
    rule: WinnerRule,
) -> Result<ConsistencyReport> {
    if pools.is_empty() {
        return Err(Error::Validation("consistency needs at least one pool".into()));
    }
    let (mut sampled, mut agree, mut skipped) = (0, 0, 0);
    for pool in pools {
        let m = pool.len();
        if m < 2 {
            log::warn!("pool `{}` has {m} candidate(s); skipped for consistency", pool.example_id);
            skipped += 1;
            continue;
        }
        for _ in 0..pairs_per_pool {
            let a = rng.gen_range(0..m);
            let b = (a + rng.gen_range(1..m)) % m;
            let fwd = compare(cmp, pool, a, b, rule)?;
            let bwd = compare(cmp, pool, b, a, rule)?;
            sampled += 1;
            if fwd.winner == bwd.winner {
                agree += 1;
            }
        }
    }
    Ok(ConsistencyReport {
        rate: if sampled == 0 { 0.0 } else { agree as f64 / sampled as f64 },
        sampled_pairs: sampled,
        agreeing_pairs: agree,
        skipped_pools: skipped,
    })
}

/// One line of a selections file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub example_id: String,
    pub selected_index: usize,
    pub selected_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<ComparisonResult>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{CandidateRecord, Example};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pool(scores: &[f64]) -> ScoredPool {
        let ex = Example {
            id: "e".into(),
            source: "s".into(),
            target: "t".into(),
        };
        ScoredPool::new(
            &ex,
            scores
                .iter()
                .enumerate()
                .map(|(i, &s)| CandidateRecord {
                    text: format!("c{i}"),
                    method: "beam".into(),
                    scores: Some([(MetricId::Rouge1, s)].into_iter().collect()),
                })
                .collect(),
        )
    }

    struct Fixed(Vec<f64>, Vec<f64>);
    impl Comparator for Fixed {
        fn num_metrics(&self) -> usize {
            self.0.len()
        }
        fn pair_scores(&self, _: &ScoredPool, _: usize, _: usize) -> Result<(Vec<f64>, Vec<f64>)> {
            Ok((self.0.clone(), self.1.clone()))
        }
    }

    #[test]
    fn winner_rules() {
        let p = pool(&[0.0, 0.0]);
        let r = compare(&Fixed(vec![1.0, 1.0], vec![0.0, 0.0]), &p, 0, 1, WinnerRule::Mean).unwrap();
        assert_eq!(r.winner, 0);
        let r = compare(&Fixed(vec![0.3, 0.3], vec![0.3, 0.3]), &p, 0, 1, WinnerRule::Mean).unwrap();
        assert_eq!(r.winner, 0);
        assert_eq!(r.confidence, vec![0.5, 0.5]);
        let r = compare(&Fixed(vec![2.0, -1.0], vec![0.0, 0.0]), &p, 0, 1, WinnerRule::Mean).unwrap();
        assert_eq!(r.winner, 0);
        let r = compare(&Fixed(vec![2.0, -1.0], vec![0.0, 0.0]), &p, 0, 1, WinnerRule::SingleMetric(1)).unwrap();
        assert_eq!(r.winner, 1);
    }

    #[test]
    fn bubble_counts() {
        let oracle = OracleComparator {
            metrics: vec![MetricId::Rouge1],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let one = bubble_select(&oracle, &pool(&[0.3]), &mut rng, WinnerRule::Mean).unwrap();
        assert_eq!((one.selected, one.trace.len()), (0, 0));
        let scores: Vec<f64> = (0..30).map(|i| ((i * 17) % 30) as f64).collect();
        let r = bubble_select(&oracle, &pool(&scores), &mut rng, WinnerRule::Mean).unwrap();
        assert_eq!(r.trace.len(), 29);
        assert_eq!(scores[r.selected], 29.0);
        assert!(bubble_select(&oracle, &pool(&[]), &mut rng, WinnerRule::Mean).is_err());
    }

    #[test]
    fn round_robin_counts_and_order() {
        let oracle = OracleComparator {
            metrics: vec![MetricId::Rouge1],
        };
        let rr = round_robin_rank(&oracle, &pool(&[0.2, 0.9, 0.5, 0.1]), WinnerRule::Mean).unwrap();
        assert_eq!(rr.comparisons, 6);
        assert_eq!(rr.ranking, vec![1, 2, 0, 3]);
        let rr = round_robin_rank(&oracle, &pool(&[0.1, 0.4]), WinnerRule::Mean).unwrap();
        assert_eq!(rr.ranking, vec![1, 0]);
    }

    #[test]
    fn consistency_extremes() {
        let oracle = OracleComparator {
            metrics: vec![MetricId::Rouge1],
        };
        let pools = vec![pool(&[0.1, 0.2, 0.3, 0.4]), pool(&[0.5, 0.9])];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = consistency_rate(&oracle, &pools, 10, &mut rng, WinnerRule::Mean).unwrap();
        assert_eq!(r.rate, 1.0);
        assert_eq!(r.sampled_pairs, 20);
        let biased = Fixed(vec![1.0], vec![0.0]);
        let r = consistency_rate(&biased, &pools, 10, &mut rng, WinnerRule::Mean).unwrap();
        assert_eq!(r.rate, 0.0);
        let r = consistency_rate(&oracle, &[pool(&[0.3])], 5, &mut rng, WinnerRule::Mean).unwrap();
        assert_eq!((r.sampled_pairs, r.skipped_pools), (0, 1));
    }

    #[test]
    fn selection_record_trace_optional() {
        let rec = SelectionRecord {
            example_id: "e".into(),
            selected_index: 2,
            selected_text: "x".into(),
            trace: None,
        };
        assert!(!serde_json::to_string(&rec).unwrap().contains("trace"));
    }
}
