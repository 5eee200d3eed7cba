#![allow(dead_code)]

pub mod oracles;

use std::collections::BTreeMap;

use pairrank::metrics::MetricId;
use pairrank::store::{CandidateRecord, Example, ScoredPool};

pub fn example(id: &str) -> Example {
    Example {
        id: id.to_string(),
        source: format!("source {id}"),
        target: format!("target {id}"),
    }
}

/// Pool whose candidate `i` carries `scores[m][i]` for `metrics[m]`.
pub fn pool_with(id: &str, metrics: &[MetricId], scores: &[Vec<f64>], method: &str) -> ScoredPool {
    let m = scores.first().map_or(0, Vec::len);
    let candidates = (0..m)
        .map(|i| CandidateRecord {
            text: format!("cand {i}"),
            method: method.to_string(),
            scores: Some(metrics.iter().zip(scores).map(|(&k, s)| (k, s[i])).collect::<BTreeMap<_, _>>()),
        })
        .collect();
    ScoredPool::new(&example(id), candidates)
}

use pairrank::decoding::{generate_pools, DecodingConfig, StubGenerator};
use pairrank::metrics::score_pools;
use pairrank::pair_encoder::ArchConfig;
use pairrank::synthetic::SyntheticTask;
use pairrank::vocab::Vocab;

/// Scored stub pools for the synthetic task: (train, test).
pub fn synthetic_pools(task: &SyntheticTask, configs: &[DecodingConfig], metrics: &[MetricId]) -> (Vec<ScoredPool>, Vec<ScoredPool>) {
    let s = task.generate();
    let gen = StubGenerator::new(s.train.iter().chain(&s.test), 0.6);
    let train = score_pools(&generate_pools(&gen, &s.train, configs).unwrap(), metrics).unwrap();
    let test = score_pools(&generate_pools(&gen, &s.test, configs).unwrap(), metrics).unwrap();
    (train, test)
}

pub fn vocab_for(pools: &[ScoredPool]) -> Vocab {
    Vocab::build(
        pools.iter().flat_map(|p| [p.source.as_str(), p.target.as_str()].into_iter().chain(p.texts())),
        1000,
        1,
    )
}

pub fn tiny_arch(width: usize) -> ArchConfig {
    ArchConfig {
        width,
        layers: 1,
        heads: 2,
        ff_width: 2 * width,
        max_len: 64,
        use_positions: true,
        vocab_max: 1000,
    }
}
