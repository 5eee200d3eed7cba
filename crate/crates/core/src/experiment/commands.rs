use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{GeneratorConfig, InferenceMode, RunConfig};
use super::report::TableReport;
use crate::baselines::{rank_pointwise, train_pointwise, PointwiseScorer};
use crate::checkpoint::{Checkpoint, RerankerKind};
use crate::decoding::{
    build_training_pools, fnv1a, generate_pools, import_external_candidates, Generator, LexicalGenerator,
    Provenance, StubGenerator,
};
use crate::error::{Error, Result};
use crate::metrics::{oracle_select, MetricId, MetricReport, PoolScorer};
use crate::pair_encoder::ScorerModel;
use crate::pair_trainer::train_from_step;
use crate::rank_inference::{
    bubble_select, consistency_rate, round_robin_rank, ConsistencyReport, SelectionRecord, WinnerRule,
};
use crate::store::{
    load_dataset, make_half_split, read_pools, read_records, write_dataset, write_pools, write_records, Example,
    HalfSplitPlan, ScoredPool, Split,
};
use crate::training::LogEntry;
use crate::vocab::Vocab;

/// Fixed output layout under the run directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout { root: root.to_path_buf() }
    }

    pub fn data_file(&self, split: Split) -> PathBuf {
        self.root.join("data").join(format!("{}.jsonl", split.name()))
    }

    pub fn pools(&self, name: &str) -> PathBuf {
        self.root.join("pools").join(format!("{name}.jsonl"))
    }

    pub fn scored_pools(&self, name: &str) -> PathBuf {
        self.root.join("pools").join(format!("{name}.scored.jsonl"))
    }

    pub fn checkpoint(&self, kind: RerankerKind) -> PathBuf {
        self.root.join("checkpoints").join(format!("{}.json", kind.name()))
    }

    pub fn train_log(&self, kind: RerankerKind) -> PathBuf {
        self.root.join("checkpoints").join(format!("{}.log.jsonl", kind.name()))
    }

    pub fn selections_dir(&self) -> PathBuf {
        self.root.join("selections")
    }

    pub fn selection(&self, kind: RerankerKind, mode: InferenceMode) -> PathBuf {
        self.selections_dir().join(format!("{}-{}.jsonl", kind.name(), mode.name()))
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn effective_config(&self) -> PathBuf {
        self.root.join("config.effective.toml")
    }

    fn lock(&self) -> PathBuf {
        self.root.join(".lock")
    }
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct RunLock(PathBuf);

impl RunLock {
    pub fn acquire(layout: &Layout) -> Result<Self> {
        std::fs::create_dir_all(&layout.root).map_err(|e| Error::io(&layout.root, e))?;
        let path = layout.lock();
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(RunLock(path))
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

/// Validate, then claim the directory and record the effective config.
fn begin(cfg: &RunConfig, inputs: &[(&Path, &str)]) -> Result<(Layout, RunLock)> {
    let mut problems = cfg.problems();
    for (p, hint) in inputs {
        if !p.is_file() {
            problems.push(format!("`{}` not found; {hint}", p.display()));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Config(problems.join("\n  ")));
    }
    let layout = Layout::new(&cfg.out);
    let lock = RunLock::acquire(&layout)?;
    let path = layout.effective_config();
    std::fs::write(&path, cfg.to_toml()).map_err(|e| Error::io(&path, e))?;
    Ok((layout, lock))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub plan: HalfSplitPlan,
    pub provenance: Vec<Provenance>,
    pub pool_counts: BTreeMap<String, usize>,
}

fn boxed_generator(cfg: &RunConfig, fit: &[Example], references: &[&Example]) -> Result<Box<dyn Generator>> {
    Ok(match &cfg.generator {
        GeneratorConfig::Stub { max_noise } => Box::new(StubGenerator::new(references.iter().copied(), *max_noise)),
        GeneratorConfig::Lexical { settings } => Box::new(LexicalGenerator::train(fit, settings.clone())?),
    })
}

/// Write datasets (synthetic or copied), half-split training pools, val/test pools and the manifest.
pub fn cmd_generate(cfg: &RunConfig) -> Result<BTreeMap<String, usize>> {
    let (layout, _lock) = begin(cfg, &[])?;
    let (train, val, test) = match &cfg.data.synthetic {
        Some(task) => {
            let task = crate::synthetic::SyntheticTask {
                seed: cfg.seeds.data,
                ..task.clone()
            };
            let s = task.generate();
            write_dataset(&layout.data_file(Split::Train), &s.train)?;
            write_dataset(&layout.data_file(Split::Val), &s.val)?;
            write_dataset(&layout.data_file(Split::Test), &s.test)?;
            (s.train, Some(s.val), Some(s.test))
        }
        None => {
            let train = load_dataset(cfg.data.train.as_ref().expect("validated"), Split::Train)?;
            let val = cfg.data.val.as_deref().map(|p| load_dataset(p, Split::Val)).transpose()?;
            let test = cfg.data.test.as_deref().map(|p| load_dataset(p, Split::Test)).transpose()?;
            (train, val, test)
        }
    };
    let plan = make_half_split(&train, cfg.seeds.data)?;
    let all: Vec<&Example> = train.iter().chain(val.iter().flatten()).chain(test.iter().flatten()).collect();
    let (train_pools, provenance) = build_training_pools(
        |_, half| boxed_generator(cfg, half, &all),
        &train,
        &plan,
        &cfg.decoding,
    )?;
    let mut counts = BTreeMap::new();
    write_pools(&layout.pools("train"), &train_pools)?;
    counts.insert("train".to_string(), train_pools.len());
    let full = boxed_generator(cfg, &train, &all)?;
    for (name, split) in [("val", &val), ("test", &test)] {
        if let Some(examples) = split {
            let pools = generate_pools(&full, examples, &cfg.decoding)?;
            write_pools(&layout.pools(name), &pools)?;
            counts.insert(name.to_string(), pools.len());
        }
    }
    let manifest = Manifest {
        config: cfg.clone(),
        plan,
        provenance,
        pool_counts: counts.clone(),
    };
    let path = layout.manifest();
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(counts)
}

/// Score every pool file that has references; transfer-mode files are skipped with a warning.
pub fn cmd_score(cfg: &RunConfig) -> Result<BTreeMap<String, usize>> {
    let layout = Layout::new(&cfg.out);
    let names = ["train", "val", "test", "external"];
    if !names.iter().any(|n| layout.pools(n).is_file()) {
        return Err(Error::Config(format!("no pool files under `{}`; run generate first", cfg.out.display())));
    }
    let (layout, _lock) = begin(cfg, &[])?;
    let mut counts = BTreeMap::new();
    for name in names {
        let path = layout.pools(name);
        if !path.is_file() {
            continue;
        }
        let pools = read_pools(&path)?;
        if let Some(p) = pools.iter().find(|p| p.is_transfer()) {
            log::warn!("{name}: pool `{}` has no reference; leaving this split unscored", p.example_id);
            continue;
        }
        let scored = PoolScorer::for_pools(&cfg.metrics, &pools)?.score_pools(&pools)?;
        write_pools(&layout.scored_pools(name), &scored)?;
        counts.insert(name.to_string(), scored.len());
    }
    Ok(counts)
}

fn check_pool_metrics(pools: &[ScoredPool], metrics: &[MetricId]) -> Result<()> {
    for p in pools {
        for &m in metrics {
            if p.metric_scores(m).is_err() {
                return Err(Error::Config(format!(
                    "metric mismatch: pool `{}` has no `{m}` scores but the config asks for it; rerun score",
                    p.example_id
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub kind: RerankerKind,
    pub best_heldout_acc: Option<f64>,
    pub first_step: usize,
    pub last_step: usize,
    pub epoch_losses: Vec<f64>,
    pub checkpoint: PathBuf,
}

/// Train one reranker on the scored training pools.
pub fn cmd_train(cfg: &RunConfig, kind: RerankerKind, resume: bool) -> Result<TrainSummary> {
    let layout = Layout::new(&cfg.out);
    let pools_path = layout.scored_pools("train");
    let (layout, _lock) = begin(cfg, &[(&pools_path, "run generate and score first")])?;
    let pools = read_pools(&pools_path)?;
    check_pool_metrics(&pools, &cfg.metrics)?;
    let ck_path = layout.checkpoint(kind);
    let log_path = layout.train_log(kind);

    let mut previous: Vec<LogEntry> = Vec::new();
    let mut resumed: Option<Checkpoint> = None;
    if resume {
        if log_path.is_file() && ck_path.is_file() {
            previous = read_records(&log_path)?;
            let ck = Checkpoint::read(&ck_path)?;
            ck.expect_kind(kind)?;
            ck.check_metrics(&cfg.metrics)?;
            resumed = Some(ck);
        } else {
            log::warn!("--resume: no earlier log for {}; starting from scratch", kind.name());
        }
    }
    let start_step = previous.last().map_or(0, |e| e.step + 1);
    let vocab = || {
        Vocab::build(
            pools.iter().flat_map(|p| {
                [p.source.as_str(), p.target.as_str()].into_iter().chain(p.texts())
            }),
            cfg.arch.vocab_max,
            1,
        )
    };
    let tc = cfg.train_config();
    let (ck, acc, log, losses) = match kind {
        RerankerKind::PairReranker => {
            let model = match &resumed {
                Some(ck) => ScorerModel::<f32>::from_checkpoint(ck)?,
                None => ScorerModel::new(vocab(), &cfg.arch, &cfg.metrics, None, cfg.seeds.model)?,
            };
            let out = train_from_step(model, &pools, &tc, start_step)?;
            (out.model.to_checkpoint(), out.best_heldout_acc, out.log, out.epoch_losses)
        }
        _ => {
            let model = match &resumed {
                Some(ck) => PointwiseScorer::<f32>::from_checkpoint(ck)?,
                None => PointwiseScorer::new(kind, vocab(), &cfg.arch, &cfg.metrics, None, cfg.seeds.model)?,
            };
            let out = train_pointwise(model, &pools, &tc, cfg.baselines.simcls_margin, start_step)?;
            (out.model.to_checkpoint(), out.best_heldout_acc, out.log, out.epoch_losses)
        }
    };
    let mut ck = ck;
    if let Some(a) = acc {
        ck.notes.insert("heldout_pair_acc".into(), format!("{a}"));
    }
    let last_step = log.last().map_or(start_step, |e| e.step);
    ck.notes.insert("last_step".into(), last_step.to_string());
    ck.write(&ck_path)?;
    previous.extend(log);
    write_records(&log_path, &previous)?;
    Ok(TrainSummary {
        kind,
        best_heldout_acc: acc,
        first_step: start_step,
        last_step,
        epoch_losses: losses,
        checkpoint: ck_path,
    })
}

fn default_eval_pools(layout: &Layout) -> PathBuf {
    let scored = layout.scored_pools("test");
    if scored.is_file() {
        scored
    } else {
        layout.pools("test")
    }
}

fn pool_rng(seed: u64, pool: &ScoredPool) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(&pool.example_id))
}

fn warn_truncation(vocab: &Vocab, limits: crate::pair_encoder::TruncationLimits, pool: &ScoredPool) {
    let src = vocab.encode(&pool.source).len() > limits.source_max;
    let cands = pool
        .candidates
        .iter()
        .filter(|c| vocab.encode(&c.text).len() > limits.cand_max)
        .count();
    if src || cands > 0 {
        log::warn!(
            "example `{}`: truncated to fit the encoder (source: {src}, candidates: {cands})",
            pool.example_id
        );
    }
}

#[derive(Debug, Clone)]
pub struct RerankSummary {
    pub output: PathBuf,
    pub selections: Vec<SelectionRecord>,
    pub comparisons: usize,
}

/// Select one candidate per pool with a trained reranker.
pub fn cmd_rerank(cfg: &RunConfig, kind: RerankerKind, pools: Option<&Path>) -> Result<RerankSummary> {
    let layout = Layout::new(&cfg.out);
    let ck_path = layout.checkpoint(kind);
    let pools_path = pools.map(Path::to_path_buf).unwrap_or_else(|| default_eval_pools(&layout));
    if kind == RerankerKind::PairReranker && cfg.mode == InferenceMode::Pointwise {
        return Err(Error::Config("PairReranker needs mode bubble or round_robin".into()));
    }
    let (layout, _lock) = begin(cfg, &[(&ck_path, "train the model first"), (&pools_path, "no pools to rerank")])?;
    let ck = Checkpoint::read(&ck_path)?;
    ck.expect_kind(kind)?;
    ck.check_metrics(&cfg.metrics)?;
    let pools = read_pools(&pools_path)?;
    if let Some(p) = pools.iter().find(|p| p.is_empty()) {
        return Err(Error::Validation(format!("pool `{}` has no candidates", p.example_id)));
    }
    let seed = cfg.seeds.shuffle;
    let (mode, results): (InferenceMode, Vec<(usize, Option<Vec<_>>, usize)>) = match kind {
        RerankerKind::PairReranker => {
            let model = ScorerModel::<f32>::from_checkpoint(&ck)?;
            pools.iter().for_each(|p| warn_truncation(&model.vocab, model.limits, p));
            let r = pools
                .par_iter()
                .map(|p| match cfg.mode {
                    InferenceMode::Bubble => {
                        let b = bubble_select(&model, p, &mut pool_rng(seed, p), WinnerRule::Mean)?;
                        let n = b.trace.len();
                        Ok((b.selected, Some(b.trace), n))
                    }
                    _ => {
                        let rr = round_robin_rank(&model, p, WinnerRule::Mean)?;
                        Ok((rr.ranking[0], None, rr.comparisons))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            (cfg.mode, r)
        }
        _ => {
            if cfg.mode != InferenceMode::Pointwise {
                log::info!("{} is pointwise; ignoring mode {}", kind.name(), cfg.mode.name());
            }
            let model = PointwiseScorer::<f32>::from_checkpoint(&ck)?;
            pools.iter().for_each(|p| warn_truncation(&model.vocab, model.limits, p));
            let r = pools
                .iter()
                .map(|p| Ok((rank_pointwise(&model, p)?, None, 0)))
                .collect::<Result<Vec<_>>>()?;
            (InferenceMode::Pointwise, r)
        }
    };
    let comparisons = results.iter().map(|r| r.2).sum();
    let selections: Vec<SelectionRecord> = pools
        .iter()
        .zip(results)
        .map(|(p, (i, trace, _))| SelectionRecord {
            example_id: p.example_id.clone(),
            selected_index: i,
            selected_text: p.candidates[i].text.clone(),
            trace,
        })
        .collect();
    let output = layout.selection(kind, mode);
    write_records(&output, &selections)?;
    Ok(RerankSummary {
        output,
        selections,
        comparisons,
    })
}

fn scored_eval_pools(layout: &Layout, path: Option<&Path>) -> Result<(PathBuf, Vec<ScoredPool>)> {
    let path = path.map(Path::to_path_buf).unwrap_or_else(|| layout.scored_pools("test"));
    if !path.is_file() {
        let raw = layout.pools("test");
        if raw.is_file() {
            if let Some(p) = read_pools(&raw)?.into_iter().find(|p| p.is_transfer()) {
                return Err(Error::TransferMode(p.example_id));
            }
        }
        return Err(Error::Config(format!("`{}` not found; run score first", path.display())));
    }
    let pools = read_pools(&path)?;
    if let Some(p) = pools.iter().find(|p| p.is_transfer()) {
        return Err(Error::TransferMode(p.example_id.clone()));
    }
    Ok((path, pools))
}

const SCALE_NOTE: &str = "ROUGE and BLEU x100, CIDEr x10 with IDF from this split's references";

fn selection_label(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn write_table(layout: &Layout, name: &str, table: &TableReport) -> Result<()> {
    table.self_check()?;
    for (ext, body) in [("csv", table.to_csv()), ("txt", table.to_text())] {
        let path = layout.report(&format!("{name}.{ext}"));
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Rows: top-beam, random, each selection file, oracle; gain columns against top-beam.
pub fn cmd_evaluate(cfg: &RunConfig, selections: &[PathBuf], pools: Option<&Path>) -> Result<TableReport> {
    let layout = Layout::new(&cfg.out);
    let mut files = selections.to_vec();
    if files.is_empty() {
        if let Ok(rd) = std::fs::read_dir(layout.selections_dir()) {
            files = rd
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            files.sort();
        }
    }
    let inputs: Vec<(&Path, &str)> = files.iter().map(|f| (f.as_path(), "selection file missing")).collect();
    let (_, pools) = scored_eval_pools(&layout, pools)?;
    let (layout, _lock) = begin(cfg, &inputs)?;
    check_pool_metrics(&pools, &cfg.metrics)?;
    let metrics = &cfg.metrics;
    let means = |r: MetricReport| metrics.iter().map(|&m| r.mean(m).unwrap_or(0.0)).collect::<Vec<_>>();
    let mut rows = vec![("top-beam".to_string(), means(MetricReport::from_selection(&pools, metrics, |_| Ok(0))?))];
    let random = MetricReport::from_selection(&pools, metrics, |p| {
        Ok(*(0..p.len()).collect::<Vec<_>>().choose(&mut pool_rng(cfg.seeds.shuffle, p)).expect("nonempty"))
    })?;
    rows.push(("random".to_string(), means(random)));
    for f in &files {
        let recs: Vec<SelectionRecord> = read_records(f)?;
        let by_id: HashMap<&str, &SelectionRecord> = recs.iter().map(|r| (r.example_id.as_str(), r)).collect();
        if by_id.len() != pools.len() || recs.len() != pools.len() {
            return Err(Error::Validation(format!(
                "{}: {} selections for {} pools",
                f.display(),
                recs.len(),
                pools.len()
            )));
        }
        let report = MetricReport::from_selection(&pools, metrics, |p| {
            let r = by_id.get(p.example_id.as_str()).ok_or_else(|| {
                Error::Validation(format!("{}: no selection for pool `{}`", f.display(), p.example_id))
            })?;
            match p.candidates.get(r.selected_index) {
                Some(c) if c.text == r.selected_text => Ok(r.selected_index),
                _ => Err(Error::Validation(format!(
                    "{}: selection for `{}` does not match the pool",
                    f.display(),
                    p.example_id
                ))),
            }
        })?;
        rows.push((selection_label(f), means(report)));
    }
    let mut oracle = Vec::new();
    for &m in metrics {
        let r = MetricReport::from_selection(&pools, &[m], |p| oracle_select(p, m))?;
        oracle.push(r.mean(m).unwrap_or(0.0));
    }
    rows.push(("oracle".to_string(), oracle));
    let table = TableReport::new(format!("Reranking on {} pools ({SCALE_NOTE})", pools.len()), metrics, rows, 0, true)?;
    write_table(&layout, "evaluate", &table)?;
    Ok(table)
}

/// Table-1 style: top-beam, oracle per decoding method, oracle over the merged pool, gain row.
pub fn cmd_oracle_analysis(cfg: &RunConfig, pools: Option<&Path>) -> Result<TableReport> {
    let layout = Layout::new(&cfg.out);
    let (_, pools) = scored_eval_pools(&layout, pools)?;
    let (layout, _lock) = begin(cfg, &[])?;
    let table = oracle_analysis(&pools, &cfg.metrics)?;
    write_table(&layout, "oracle_analysis", &table)?;
    Ok(table)
}

/// Split merged pools by method tag and tabulate their oracles.
pub fn oracle_analysis(pools: &[ScoredPool], metrics: &[MetricId]) -> Result<TableReport> {
    check_pool_metrics(pools, metrics)?;
    let first = pools.first().ok_or_else(|| Error::Validation("no pools to analyse".into()))?;
    let mut methods: Vec<String> = Vec::new();
    for c in &first.candidates {
        if !methods.contains(&c.method) {
            methods.push(c.method.clone());
        }
    }
    let split: Vec<Vec<ScoredPool>> = methods
        .iter()
        .map(|m| {
            pools
                .iter()
                .map(|p| {
                    let sub = ScoredPool {
                        candidates: p.candidates.iter().filter(|c| &c.method == m).cloned().collect(),
                        ..p.clone()
                    };
                    if sub.is_empty() {
                        return Err(Error::Validation(format!(
                            "method `{m}` has no candidates for `{}`; methods must cover the same examples",
                            p.example_id
                        )));
                    }
                    Ok(sub)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    for p in pools {
        if let Some(c) = p.candidates.iter().find(|c| !methods.contains(&c.method)) {
            return Err(Error::Validation(format!(
                "method `{}` appears only for some examples (e.g. `{}`)",
                c.method, p.example_id
            )));
        }
    }
    let oracle = |ps: &[ScoredPool]| -> Result<Vec<f64>> {
        metrics
            .iter()
            .map(|&m| Ok(MetricReport::from_selection(ps, &[m], |p| oracle_select(p, m))?.mean(m).unwrap_or(0.0)))
            .collect()
    };
    let top = MetricReport::from_selection(&split[0], metrics, |_| Ok(0))?;
    let mut rows = vec![("top-beam".to_string(), metrics.iter().map(|&m| top.mean(m).unwrap_or(0.0)).collect())];
    for (m, ps) in methods.iter().zip(&split) {
        rows.push((format!("oracle {m}"), oracle(ps)?));
    }
    rows.push(("oracle all".to_string(), oracle(pools)?));
    let last = rows.len() - 1;
    TableReport::new(format!("Oracle analysis over {} pools ({SCALE_NOTE})", pools.len()), metrics, rows, 0, false)?
        .with_gain_row("gain", last, 0)
}

/// Self-consistency of the trained PairReranker under slot swaps.
pub fn cmd_consistency(cfg: &RunConfig, pools: Option<&Path>) -> Result<ConsistencyReport> {
    let layout = Layout::new(&cfg.out);
    let kind = RerankerKind::PairReranker;
    let ck_path = layout.checkpoint(kind);
    let pools_path = pools.map(Path::to_path_buf).unwrap_or_else(|| default_eval_pools(&layout));
    let (layout, _lock) = begin(cfg, &[(&ck_path, "train pairreranker first"), (&pools_path, "no pools")])?;
    let ck = Checkpoint::read(&ck_path)?;
    ck.expect_kind(kind)?;
    ck.check_metrics(&cfg.metrics)?;
    let model = ScorerModel::<f32>::from_checkpoint(&ck)?;
    let pools = read_pools(&pools_path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.shuffle);
    let report = consistency_rate(&model, &pools, cfg.consistency_pairs, &mut rng, WinnerRule::Mean)?;
    let path = layout.report("consistency.json");
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

/// Copy an external candidate file into `pools/external.jsonl`.
pub fn cmd_import_external(cfg: &RunConfig, path: &Path) -> Result<usize> {
    let pools = import_external_candidates(path)?;
    let (layout, _lock) = begin(cfg, &[(path, "external candidate file")])?;
    let transfer = pools.iter().filter(|p| p.is_transfer()).count();
    if transfer > 0 {
        log::info!("{transfer} imported pools have no reference (transfer mode)");
    }
    write_pools(&layout.pools("external"), &pools)?;
    Ok(pools.len())
}
