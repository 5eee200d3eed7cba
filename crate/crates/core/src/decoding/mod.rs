//! Candidate generation under the four decoding methods and the half-split
//! training-pool protocol.

mod lexical;
mod stub;

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{merge_pools, read_pools, CandidateRecord, Example, Half, HalfSplitPlan, ScoredPool};

pub use lexical::{LexicalConfig, LexicalGenerator};
pub use stub::StubGenerator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodingMethod {
    Beam,
    DiverseBeam,
    TopK,
    TopP,
}

impl DecodingMethod {
    pub const ALL: [DecodingMethod; 4] = [
        DecodingMethod::Beam,
        DecodingMethod::DiverseBeam,
        DecodingMethod::TopK,
        DecodingMethod::TopP,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DecodingMethod::Beam => "beam",
            DecodingMethod::DiverseBeam => "diverse_beam",
            DecodingMethod::TopK => "top_k",
            DecodingMethod::TopP => "top_p",
        }
    }

    pub fn is_sampling(self) -> bool {
        matches!(self, DecodingMethod::TopK | DecodingMethod::TopP)
    }
}

pub const DEFAULT_NUM_CANDIDATES: usize = 15;

fn default_num_candidates() -> usize {
    DEFAULT_NUM_CANDIDATES
}

fn default_temperature() -> f64 {
    1.0
}

/// One decoding setting. Method-specific fields must be present for their method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodingConfig {
    pub method: DecodingMethod,
    #[serde(default = "default_num_candidates")]
    pub num_candidates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_width: Option<usize>,
    /// Defaults to `beam_width`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diversity_groups: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diversity_penalty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl DecodingConfig {
    fn base(method: DecodingMethod) -> Self {
        DecodingConfig {
            method,
            num_candidates: DEFAULT_NUM_CANDIDATES,
            beam_width: None,
            diversity_groups: None,
            diversity_penalty: None,
            k: None,
            p: None,
            temperature: 1.0,
            seed: None,
        }
    }

    pub fn beam(num_candidates: usize) -> Self {
        DecodingConfig {
            num_candidates,
            beam_width: Some(num_candidates),
            ..Self::base(DecodingMethod::Beam)
        }
    }

    pub fn diverse_beam(num_candidates: usize) -> Self {
        DecodingConfig {
            num_candidates,
            beam_width: Some(num_candidates),
            diversity_groups: Some(num_candidates),
            diversity_penalty: Some(1.0),
            ..Self::base(DecodingMethod::DiverseBeam)
        }
    }

    pub fn top_k(num_candidates: usize, k: usize, seed: u64) -> Self {
        DecodingConfig {
            num_candidates,
            k: Some(k),
            seed: Some(seed),
            ..Self::base(DecodingMethod::TopK)
        }
    }

    pub fn top_p(num_candidates: usize, p: f64, seed: u64) -> Self {
        DecodingConfig {
            num_candidates,
            p: Some(p),
            seed: Some(seed),
            ..Self::base(DecodingMethod::TopP)
        }
    }

    /// Beam + diverse beam, the reranker's training and inference pools.
    pub fn reranker_defaults() -> Vec<Self> {
        vec![Self::beam(DEFAULT_NUM_CANDIDATES), Self::diverse_beam(DEFAULT_NUM_CANDIDATES)]
    }

    /// All four methods, for oracle analysis.
    pub fn all_methods(seed: u64) -> Vec<Self> {
        let n = DEFAULT_NUM_CANDIDATES;
        vec![Self::beam(n), Self::diverse_beam(n), Self::top_k(n, 50, seed), Self::top_p(n, 0.95, seed)]
    }

    pub fn groups(&self) -> usize {
        self.diversity_groups.or(self.beam_width).unwrap_or(1)
    }

    /// Every problem with this config, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let m = self.method.name();
        let mut out = Vec::new();
        if self.num_candidates == 0 {
            out.push(format!("{m}: num_candidates must be at least 1"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            out.push(format!("{m}: temperature must be positive"));
        }
        match self.method {
            DecodingMethod::Beam | DecodingMethod::DiverseBeam => match self.beam_width {
                None => out.push(format!("{m}: beam_width is required")),
                Some(0) => out.push(format!("{m}: beam_width must be at least 1")),
                Some(_) => {}
            },
            DecodingMethod::TopK => match self.k {
                None => out.push(format!("{m}: k is required")),
                Some(0) => out.push(format!("{m}: k must be at least 1")),
                Some(_) => {}
            },
            DecodingMethod::TopP => match self.p {
                None => out.push(format!("{m}: p is required")),
                Some(p) if !(p > 0.0 && p <= 1.0) => out.push(format!("{m}: p must lie in (0, 1]")),
                Some(_) => {}
            },
        }
        if self.method == DecodingMethod::DiverseBeam {
            if let (Some(g), Some(w)) = (self.diversity_groups, self.beam_width) {
                if g == 0 || g > w {
                    out.push(format!("{m}: diversity_groups must lie in 1..=beam_width"));
                }
            }
            if self.diversity_penalty.is_some_and(|x| !(x >= 0.0 && x.is_finite())) {
                out.push(format!("{m}: diversity_penalty must be non-negative"));
            }
        }
        if self.method.is_sampling() && self.seed.is_none() {
            out.push(format!("{m}: sampling requires a seed"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p.join("; ")))
        }
    }
}

/// Anything that maps a source text to candidate texts under a decoding config.
///
/// Implementations must be deterministic in `(source, config)`.
pub trait Generator: Send + Sync {
    fn generate(&self, source: &str, config: &DecodingConfig) -> std::result::Result<Vec<String>, String>;
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn generate(&self, source: &str, config: &DecodingConfig) -> std::result::Result<Vec<String>, String> {
        (**self).generate(source, config)
    }
}

/// FNV-1a, used to derive per-example seeds from source text.
pub fn fnv1a(text: &str) -> u64 {
    text.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Unscored pool of exactly `num_candidates` candidates tagged with the method.
pub fn generate_candidates<G: Generator + ?Sized>(
    gen: &G,
    example: &Example,
    config: &DecodingConfig,
) -> Result<ScoredPool> {
    config.validate()?;
    let fail = |message: String| Error::Generator {
        example_id: example.id.clone(),
        message,
    };
    let texts = gen.generate(&example.source, config).map_err(fail)?;
    if texts.len() != config.num_candidates {
        return Err(fail(format!(
            "returned {} candidates, expected {}",
            texts.len(),
            config.num_candidates
        )));
    }
    let candidates = texts
        .into_iter()
        .map(|t| CandidateRecord::unscored(t, config.method.name()))
        .collect();
    Ok(ScoredPool::new(example, candidates))
}

/// Pools for one split from a single generator, all configs merged per example.
pub fn generate_pools<G: Generator + ?Sized>(
    gen: &G,
    examples: &[Example],
    configs: &[DecodingConfig],
) -> Result<Vec<ScoredPool>> {
    for c in configs {
        c.validate()?;
    }
    examples
        .par_iter()
        .map(|ex| {
            let parts = configs
                .iter()
                .map(|c| generate_candidates(gen, ex, c))
                .collect::<Result<Vec<_>>>()?;
            merge_pools(&parts)
        })
        .collect()
}

/// Which generator produced a training pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub example_id: String,
    pub example_half: Half,
    /// Half the generator was trained on; always the other one.
    pub generator_half: Half,
}

/// Training pools under the half-split protocol.
///
/// `gen_factory(half, examples)` builds a generator trained only on `examples`,
/// the members of `half`. Each example is decoded by the generator of the
/// opposite half.
pub fn build_training_pools<G, F>(
    gen_factory: F,
    train: &[Example],
    plan: &HalfSplitPlan,
    configs: &[DecodingConfig],
) -> Result<(Vec<ScoredPool>, Vec<Provenance>)>
where
    G: Generator,
    F: Fn(Half, &[Example]) -> Result<G>,
{
    if configs.is_empty() {
        return Err(Error::Config("no decoding configs".into()));
    }
    for c in configs {
        c.validate()?;
    }
    let halves: Vec<Half> = train
        .iter()
        .map(|ex| {
            plan.half_of(&ex.id)
                .ok_or_else(|| Error::Validation(format!("example `{}` is missing from the half-split plan", ex.id)))
        })
        .collect::<Result<_>>()?;
    let mut members: HashMap<Half, Vec<Example>> = HashMap::new();
    for (ex, &h) in train.iter().zip(&halves) {
        members.entry(h).or_default().push(ex.clone());
    }
    let mut gens = HashMap::new();
    for h in [Half::A, Half::B] {
        let own = members.get(&h).map(Vec::as_slice).unwrap_or(&[]);
        gens.insert(h, gen_factory(h, own)?);
    }
    let pools = train
        .par_iter()
        .zip(&halves)
        .map(|(ex, &h)| {
            let gen = &gens[&h.other()];
            let parts = configs
                .iter()
                .map(|c| generate_candidates(gen, ex, c))
                .collect::<Result<Vec<_>>>()?;
            merge_pools(&parts)
        })
        .collect::<Result<Vec<_>>>()?;
    let provenance = train
        .iter()
        .zip(&halves)
        .map(|(ex, &h)| Provenance {
            example_id: ex.id.clone(),
            example_half: h,
            generator_half: h.other(),
        })
        .collect();
    Ok((pools, provenance))
}

/// Load candidate pools produced elsewhere; an empty target marks transfer mode.
pub fn import_external_candidates(path: &Path) -> Result<Vec<ScoredPool>> {
    read_pools(path)
}
