//! Versioned model checkpoints shared by PairReranker and the baselines.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricId;
use crate::nn::{EncoderConfig, ParamsFile};
use crate::pair_encoder::TruncationLimits;
use crate::vocab::Vocab;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RerankerKind {
    PairReranker,
    SimCls,
    SummaReranker,
}

impl RerankerKind {
    pub fn name(self) -> &'static str {
        match self {
            RerankerKind::PairReranker => "pairreranker",
            RerankerKind::SimCls => "simcls",
            RerankerKind::SummaReranker => "summareranker",
        }
    }

    /// Label used in report rows.
    pub fn display_name(self) -> &'static str {
        match self {
            RerankerKind::PairReranker => "PairReranker",
            RerankerKind::SimCls => "SimCLS",
            RerankerKind::SummaReranker => "SummaReranker (our setup)",
        }
    }
}

impl std::str::FromStr for RerankerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pairreranker" => Ok(RerankerKind::PairReranker),
            "simcls" => Ok(RerankerKind::SimCls),
            "summareranker" => Ok(RerankerKind::SummaReranker),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected pairreranker, simcls or summareranker)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub kind: RerankerKind,
    pub metrics: Vec<MetricId>,
    pub limits: TruncationLimits,
    pub encoder: EncoderConfig,
    pub vocab: Vocab,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
    pub params: ParamsFile,
}

impl Checkpoint {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        if ck.format_version != FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "{}: checkpoint format {} is not supported (expected {FORMAT_VERSION})",
                path.display(),
                ck.format_version
            )));
        }
        Ok(ck)
    }

    /// Write to a sibling temp file, then rename over `path`.
    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string(self).expect("checkpoint serializes");
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    /// Refuse to evaluate with a metric list different from the trained one.
    pub fn check_metrics(&self, requested: &[MetricId]) -> Result<()> {
        if self.metrics != requested {
            return Err(Error::Config(format!(
                "checkpoint was trained for metrics [{}] but [{}] were requested",
                join(&self.metrics),
                join(requested)
            )));
        }
        Ok(())
    }

    pub fn expect_kind(&self, kind: RerankerKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Config(format!(
                "checkpoint holds a {} model, expected {}",
                self.kind.name(),
                kind.name()
            )));
        }
        Ok(())
    }
}

fn join(ms: &[MetricId]) -> String {
    ms.iter().map(|m| m.name()).collect::<Vec<_>>().join(", ")
}
