//! Seeded toy translation task with a planted quality feature.
//!
//! Sources are random strings over `w00 … wNN`; targets map each word to
//! `tNN`. Candidates come from [`StubGenerator`](crate::decoding::StubGenerator),
//! whose noise words lower every metric and are visible to a reranker.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::store::Example;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticTask {
    pub num_train: usize,
    pub num_val: usize,
    pub num_test: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub lexicon: usize,
    pub seed: u64,
}

impl Default for SyntheticTask {
    fn default() -> Self {
        SyntheticTask {
            num_train: 400,
            num_val: 50,
            num_test: 100,
            min_len: 6,
            max_len: 10,
            lexicon: 30,
            seed: 0,
        }
    }
}

pub struct SyntheticSplits {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
}

impl SyntheticTask {
    pub fn generate(&self) -> SyntheticSplits {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut make = |prefix: &str, n: usize| -> Vec<Example> {
            (0..n)
                .map(|i| {
                    let len = rng.gen_range(self.min_len..=self.max_len.max(self.min_len));
                    let ids: Vec<usize> = (0..len).map(|_| rng.gen_range(0..self.lexicon.max(1))).collect();
                    Example {
                        id: format!("{prefix}-{i:05}"),
                        source: ids.iter().map(|w| format!("w{w:02}")).collect::<Vec<_>>().join(" "),
                        target: ids.iter().map(|w| format!("t{w:02}")).collect::<Vec<_>>().join(" "),
                    }
                })
                .collect()
        };
        let train = make("train", self.num_train);
        let val = make("val", self.num_val);
        let test = make("test", self.num_test);
        SyntheticSplits { train, val, test }
    }
}
