//! Examples, candidate pools and their JSONL persistence.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// One task instance: a source text and its reference target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example {
    pub id: String,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateRecord {
    pub text: String,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<BTreeMap<MetricId, f64>>,
}

impl CandidateRecord {
    pub fn unscored(text: impl Into<String>, method: impl Into<String>) -> Self {
        CandidateRecord {
            text: text.into(),
            method: method.into(),
            scores: None,
        }
    }

    pub fn score(&self, metric: MetricId) -> Option<f64> {
        self.scores.as_ref().and_then(|s| s.get(&metric).copied())
    }
}

/// The candidate set generated for one source, with optional per-metric quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoredPool {
    pub example_id: String,
    pub source: String,
    pub target: String,
    pub candidates: Vec<CandidateRecord>,
}

impl ScoredPool {
    pub fn new(example: &Example, candidates: Vec<CandidateRecord>) -> Self {
        ScoredPool {
            example_id: example.id.clone(),
            source: example.source.clone(),
            target: example.target.clone(),
            candidates,
        }
    }

    /// Pools without a reference can be reranked but never scored.
    pub fn is_transfer(&self) -> bool {
        self.target.trim().is_empty()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Scores of every candidate for `metric`, or an error naming the first unscored one.
    pub fn metric_scores(&self, metric: MetricId) -> Result<Vec<f64>> {
        self.candidates
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.score(metric).ok_or_else(|| {
                    Error::Validation(format!(
                        "pool `{}`: candidate {i} has no `{}` score",
                        self.example_id,
                        metric.name()
                    ))
                })
            })
            .collect()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.candidates.iter().map(|c| c.text.as_str()).collect()
    }
}

/// Leakage-free partition of the training ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfSplitPlan {
    pub seed: u64,
    pub half_a: Vec<String>,
    pub half_b: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Half {
    A,
    B,
}

impl Half {
    pub fn other(self) -> Half {
        match self {
            Half::A => Half::B,
            Half::B => Half::A,
        }
    }
}

impl HalfSplitPlan {
    pub fn half(&self, which: Half) -> &[String] {
        match which {
            Half::A => &self.half_a,
            Half::B => &self.half_b,
        }
    }

    pub fn half_of(&self, id: &str) -> Option<Half> {
        if self.half_a.iter().any(|x| x == id) {
            Some(Half::A)
        } else if self.half_b.iter().any(|x| x == id) {
            Some(Half::B)
        } else {
            None
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("plan serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Shuffle the ids under `seed`, then cut evenly; the first half takes the odd element.
pub fn make_half_split(examples: &[Example], seed: u64) -> Result<HalfSplitPlan> {
    if examples.len() < 2 {
        return Err(Error::Validation(format!(
            "half split needs at least 2 examples, got {}",
            examples.len()
        )));
    }
    let mut ids: Vec<String> = examples.iter().map(|e| e.id.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let cut = ids.len().div_ceil(2);
    let half_b = ids.split_off(cut);
    Ok(HalfSplitPlan {
        seed,
        half_a: ids,
        half_b,
    })
}

/// Concatenate pools of one example in input order, keeping duplicates.
pub fn merge_pools(pools: &[ScoredPool]) -> Result<ScoredPool> {
    let first = pools
        .first()
        .ok_or_else(|| Error::Validation("merge_pools called with no pools".into()))?;
    let mut merged = ScoredPool {
        example_id: first.example_id.clone(),
        source: first.source.clone(),
        target: first.target.clone(),
        candidates: Vec::with_capacity(pools.iter().map(ScoredPool::len).sum()),
    };
    for p in pools {
        if p.example_id != first.example_id || p.source != first.source || p.target != first.target
        {
            return Err(Error::Validation(format!(
                "cannot merge pool `{}` into pool `{}`",
                p.example_id, first.example_id
            )));
        }
        merged.candidates.extend(p.candidates.iter().cloned());
    }
    Ok(merged)
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        out.push((line_no, rec));
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Load a dataset file; ids must be unique and sources nonempty.
///
/// Training examples must carry a target. Val/test files may leave it empty,
/// which puts the resulting pools in transfer mode.
pub fn load_dataset(path: &Path, split: Split) -> Result<Vec<Example>> {
    let records: Vec<(usize, Example)> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (line, ex) in records {
        if !seen.insert(ex.id.clone()) {
            return Err(Error::Validation(format!(
                "{}:{line}: duplicate example id `{}`",
                path.display(),
                ex.id
            )));
        }
        if ex.source.trim().is_empty() {
            return Err(Error::Validation(format!(
                "{}:{line}: example `{}` has an empty source",
                path.display(),
                ex.id
            )));
        }
        if split == Split::Train && ex.target.trim().is_empty() {
            return Err(Error::Validation(format!(
                "{}:{line}: training example `{}` has an empty target",
                path.display(),
                ex.id
            )));
        }
        out.push(ex);
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, examples: &[Example]) -> Result<()> {
    write_jsonl(path, examples)
}

pub fn read_pools(path: &Path) -> Result<Vec<ScoredPool>> {
    let records: Vec<(usize, ScoredPool)> = read_jsonl(path)?;
    let mut out = Vec::with_capacity(records.len());
    for (line, pool) in records {
        for (i, c) in pool.candidates.iter().enumerate() {
            if let Some(bad) = c.scores.iter().flatten().find(|(_, v)| !v.is_finite()) {
                return Err(Error::parse(
                    path,
                    line,
                    format!("candidate {i} has non-finite `{}` score", bad.0.name()),
                ));
            }
        }
        out.push(pool);
    }
    Ok(out)
}

pub fn write_pools(path: &Path, pools: &[ScoredPool]) -> Result<()> {
    write_jsonl(path, pools)
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    write_jsonl(path, records)
}

pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    Ok(read_jsonl(path)?.into_iter().map(|(_, r)| r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(id: &str) -> Example {
        Example {
            id: id.into(),
            source: format!("source of {id}"),
            target: format!("target of {id}"),
        }
    }

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn load_three_records_in_order() {
        let f = write_lines(&[
            r#"{"id":"a","source":"x","target":"y"}"#,
            r#"{"id":"b","source":"x","target":"y"}"#,
            r#"{"id":"c","source":"x","target":"y"}"#,
        ]);
        let got = load_dataset(f.path(), Split::Train).unwrap();
        let ids: Vec<_> = got.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn load_empty_file() {
        let f = write_lines(&[]);
        assert!(load_dataset(f.path(), Split::Test).unwrap().is_empty());
    }

    #[test]
    fn duplicate_id_cites_second_line() {
        let f = write_lines(&[
            r#"{"id":"ex1","source":"x","target":"y"}"#,
            r#"{"id":"ex2","source":"x","target":"y"}"#,
            r#"{"id":"ex3","source":"x","target":"y"}"#,
            r#"{"id":"ex1","source":"x","target":"y"}"#,
        ]);
        let err = load_dataset(f.path(), Split::Train).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Validation(_)));
        assert!(msg.contains(":4:") && msg.contains("ex1"), "{msg}");
    }

    #[test]
    fn malformed_line_names_line_number() {
        let f = write_lines(&[r#"{"id":"a","source":"x","target":"y"}"#, "{not json"]);
        match load_dataset(f.path(), Split::Train).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn empty_target_only_outside_train() {
        let f = write_lines(&[r#"{"id":"a","source":"x","target":""}"#]);
        assert!(load_dataset(f.path(), Split::Train).is_err());
        assert!(load_dataset(f.path(), Split::Test).is_ok());
    }

    #[test]
    fn half_split_even_and_odd() {
        let ten: Vec<_> = (0..10).map(|i| ex(&format!("e{i}"))).collect();
        let plan = make_half_split(&ten, 7).unwrap();
        assert_eq!((plan.half_a.len(), plan.half_b.len()), (5, 5));
        assert!(plan.half_a.iter().all(|id| !plan.half_b.contains(id)));
        assert_eq!(plan, make_half_split(&ten, 7).unwrap());

        let eleven: Vec<_> = (0..11).map(|i| ex(&format!("e{i}"))).collect();
        let plan = make_half_split(&eleven, 7).unwrap();
        assert_eq!((plan.half_a.len(), plan.half_b.len()), (6, 5));
    }

    #[test]
    fn half_split_needs_two() {
        assert!(make_half_split(&[ex("a")], 1).is_err());
    }

    fn pool(id: &str, texts: &[&str], method: &str) -> ScoredPool {
        ScoredPool::new(
            &ex(id),
            texts.iter().map(|t| CandidateRecord::unscored(*t, method)).collect(),
        )
    }

    #[test]
    fn merge_four_by_fifteen() {
        let texts: Vec<String> = (0..15).map(|i| format!("c{i}")).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let pools: Vec<_> = ["beam", "diverse_beam", "top_k", "top_p"]
            .iter()
            .map(|m| pool("e", &refs, m))
            .collect();
        let merged = merge_pools(&pools).unwrap();
        assert_eq!(merged.len(), 60);
        assert_eq!(merged.candidates[15].method, "diverse_beam");
    }

    #[test]
    fn merge_single_is_identity_and_keeps_duplicates() {
        let p = pool("e", &["same", "other"], "beam");
        assert_eq!(merge_pools(std::slice::from_ref(&p)).unwrap(), p);
        let q = pool("e", &["same"], "top_k");
        let merged = merge_pools(&[p, q]).unwrap();
        assert_eq!(merged.texts().iter().filter(|t| **t == "same").count(), 2);
    }

    #[test]
    fn merge_rejects_other_example() {
        assert!(merge_pools(&[pool("a", &["x"], "beam"), pool("b", &["x"], "beam")]).is_err());
    }

    #[test]
    fn unscored_pool_roundtrips_without_scores_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let p = pool("e", &["x", "y"], "beam");
        write_pools(&path, std::slice::from_ref(&p)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains("scores"));
        assert_eq!(read_pools(&path).unwrap(), vec![p]);
    }

    #[test]
    fn corrupted_pool_file_reports_line() {
        let f = write_lines(&[
            r#"{"example_id":"e","source":"s","target":"t","candidates":[]}"#,
            r#"{"example_id":"e","source":"s","target":"t","candidates":[{"method":"beam"}]}"#,
        ]);
        match read_pools(f.path()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_file_has_path_context() {
        let err = read_pools(Path::new("/nonexistent/pools.jsonl")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/pools.jsonl"));
    }
}
