use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fnv1a, DecodingConfig, Generator};
use crate::store::Example;

/// Deterministic test generator: perturbs the known reference of each source.
///
/// Every candidate replaces a random fraction of reference tokens with words
/// from a fixed noise lexicon, so candidate quality is a visible feature (the
/// count of noise words). The fraction is drawn independently per candidate,
/// so the first candidate is no better than any other on average.
#[derive(Debug, Clone)]
pub struct StubGenerator {
    references: HashMap<String, String>,
    noise_words: Vec<String>,
    max_noise: f64,
}

impl StubGenerator {
    pub const NOISE_WORDS: [&'static str; 8] = ["zzq", "zzv", "zzx", "zzk", "zzj", "zzw", "zzy", "zzf"];

    pub fn new<'a>(examples: impl IntoIterator<Item = &'a Example>, max_noise: f64) -> Self {
        StubGenerator {
            references: examples
                .into_iter()
                .map(|e| (e.source.clone(), e.target.clone()))
                .collect(),
            noise_words: Self::NOISE_WORDS.iter().map(|s| s.to_string()).collect(),
            max_noise: max_noise.clamp(0.0, 1.0),
        }
    }
}

impl Generator for StubGenerator {
    fn generate(&self, source: &str, config: &DecodingConfig) -> Result<Vec<String>, String> {
        let reference = self
            .references
            .get(source)
            .ok_or_else(|| "stub generator has no reference for this source".to_string())?;
        let words: Vec<&str> = reference.split_whitespace().collect();
        let salt = fnv1a(config.method.name());
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(source) ^ salt ^ config.seed.unwrap_or(0));
        Ok((0..config.num_candidates)
            .map(|_| {
                let rate = rng.gen::<f64>() * self.max_noise;
                words
                    .iter()
                    .map(|&w| {
                        if rng.gen::<f64>() < rate {
                            self.noise_words[rng.gen_range(0..self.noise_words.len())].as_str()
                        } else {
                            w
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_noisy() {
        let ex = Example {
            id: "1".into(),
            source: "a b c".into(),
            target: "one two three four five six".into(),
        };
        let g = StubGenerator::new([&ex], 0.8);
        let c = DecodingConfig::beam(15);
        let a = g.generate(&ex.source, &c).unwrap();
        assert_eq!(a, g.generate(&ex.source, &c).unwrap());
        assert_eq!(a.len(), 15);
        assert!(a.iter().any(|t| t.contains("zz")));
        assert!(g.generate("unknown", &c).is_err());
    }
}
