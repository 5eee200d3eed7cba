use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decoding::{DecodingConfig, LexicalConfig};
use crate::error::{Error, Result};
use crate::metrics::MetricId;
use crate::pair_encoder::ArchConfig;
use crate::pair_trainer::TrainConfig;
use crate::synthetic::SyntheticTask;

/// Dataset files, or a synthetic task generated into the output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticTask>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorConfig {
    /// Reference perturbation; needs targets for every split it decodes.
    Stub { max_noise: f64 },
    Lexical {
        #[serde(default)]
        settings: LexicalConfig,
    },
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig::Lexical {
            settings: LexicalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMode {
    #[default]
    Bubble,
    RoundRobin,
    Pointwise,
}

impl std::str::FromStr for InferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bubble" => Ok(InferenceMode::Bubble),
            "round_robin" => Ok(InferenceMode::RoundRobin),
            "pointwise" => Ok(InferenceMode::Pointwise),
            _ => Err(Error::Config(format!("unknown inference mode `{s}`"))),
        }
    }
}

impl InferenceMode {
    pub fn name(self) -> &'static str {
        match self {
            InferenceMode::Bubble => "bubble",
            InferenceMode::RoundRobin => "round_robin",
            InferenceMode::Pointwise => "pointwise",
        }
    }
}

/// The three sources of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    /// Half split and synthetic data.
    pub data: u64,
    /// Parameter initialisation.
    pub model: u64,
    /// Pair slot order, batch order, held-out split and inference order.
    pub shuffle: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    /// SimCLS margin step λ.
    pub simcls_margin: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { simcls_margin: 0.01 }
    }
}

fn default_metrics() -> Vec<MetricId> {
    MetricId::ALL.to_vec()
}

fn default_decoding() -> Vec<DecodingConfig> {
    DecodingConfig::reranker_defaults()
}

fn default_consistency_pairs() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub out: PathBuf,
    pub seeds: Seeds,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default = "default_decoding")]
    pub decoding: Vec<DecodingConfig>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricId>,
    #[serde(default)]
    pub arch: ArchConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub baselines: BaselineConfig,
    #[serde(default)]
    pub mode: InferenceMode,
    #[serde(default = "default_consistency_pairs")]
    pub consistency_pairs: usize,
}

/// Command-line values that replace config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed_data: Option<u64>,
    pub seed_model: Option<u64>,
    pub seed_shuffle: Option<u64>,
    pub metrics: Option<Vec<MetricId>>,
    pub mode: Option<InferenceMode>,
}

impl RunConfig {
    /// Parse a TOML document; relative paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_toml(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out);
        for p in [&mut self.data.train, &mut self.data.val, &mut self.data.test].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(s) = o.seed_data {
            self.seeds.data = s;
        }
        if let Some(s) = o.seed_model {
            self.seeds.model = s;
        }
        if let Some(s) = o.seed_shuffle {
            self.seeds.shuffle = s;
        }
        if let Some(m) = &o.metrics {
            self.metrics = m.clone();
        }
        if let Some(m) = o.mode {
            self.mode = m;
        }
    }

    /// Training settings with the shuffle seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seeds.shuffle,
            ..self.train.clone()
        }
    }

    /// Every problem found, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.metrics.is_empty() {
            out.push("metrics: list is empty".to_string());
        }
        let mut seen = std::collections::HashSet::new();
        for m in &self.metrics {
            if !seen.insert(m) {
                out.push(format!("metrics: `{m}` listed twice"));
            }
        }
        if self.decoding.is_empty() {
            out.push("decoding: no decoding configs".to_string());
        }
        for (i, d) in self.decoding.iter().enumerate() {
            out.extend(d.problems().into_iter().map(|p| format!("decoding[{i}]: {p}")));
        }
        if let Err(e) = self.train.validate() {
            out.push(format!("train: {e}"));
        }
        if let Err(e) = self.arch.encoder_config(8).validate() {
            out.push(format!("arch: {e}"));
        }
        if self.arch.max_len < crate::pair_encoder::PAIR_OVERHEAD + 3 {
            out.push("arch: max_len too small to hold a pair".to_string());
        }
        if !(self.baselines.simcls_margin >= 0.0) {
            out.push("baselines: simcls_margin must be non-negative".to_string());
        }
        if let GeneratorConfig::Stub { max_noise } = self.generator {
            if !(0.0..=1.0).contains(&max_noise) {
                out.push("generator: max_noise must lie in [0, 1]".to_string());
            }
        }
        match (&self.data.synthetic, &self.data.train) {
            (Some(_), Some(_)) => out.push("data: give either synthetic or dataset paths, not both".to_string()),
            (None, None) => out.push("data: train path (or a synthetic task) is required".to_string()),
            _ => {}
        }
        for (name, p) in [("train", &self.data.train), ("val", &self.data.val), ("test", &self.data.test)] {
            if let Some(p) = p {
                if !p.is_file() {
                    out.push(format!("data.{name}: `{}` does not exist", p.display()));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p.join("\n  ")))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_and_overrides() {
        let text = r#"
out = "runs/x"
[seeds]
data = 1
model = 2
shuffle = 3
[data.synthetic]
num_train = 10
"#;
        let mut cfg = RunConfig::from_toml(text, Path::new("/base")).unwrap();
        assert_eq!(cfg.out, Path::new("/base/runs/x"));
        assert_eq!(cfg.decoding.len(), 2);
        assert!(cfg.validate().is_ok());
        cfg.apply(&Overrides {
            seed_model: Some(9),
            mode: Some(InferenceMode::Pointwise),
            ..Default::default()
        });
        assert_eq!(cfg.seeds.model, 9);
        assert_eq!(cfg.train_config().seed, 3);
        let back = RunConfig::from_toml(&cfg.to_toml(), Path::new("/")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn seeds_are_required_and_unknown_keys_rejected() {
        assert!(RunConfig::from_toml("out = \"x\"", Path::new(".")).is_err());
        let bad = "out = \"x\"\nbogus = 1\n[seeds]\ndata = 1\nmodel = 1\nshuffle = 1\n";
        assert!(RunConfig::from_toml(bad, Path::new(".")).is_err());
    }

    #[test]
    fn all_problems_are_listed() {
        let text = r#"
out = "x"
metrics = []
[seeds]
data = 1
model = 2
shuffle = 3
[data]
train = "missing.jsonl"
[[decoding]]
method = "top_k"
num_candidates = 0
"#;
        let cfg = RunConfig::from_toml(text, Path::new("/nonexistent")).unwrap();
        let p = cfg.problems();
        assert!(p.len() >= 4, "{p:?}");
    }
}
