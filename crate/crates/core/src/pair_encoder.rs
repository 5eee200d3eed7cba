//! Joint encoding of (source, candidate, candidate) and the shared scoring head.
//!
//! The assembled sequence is
//! `<s> <source> x… </s> <candidate1> a… </s> <candidate2> b… </s>`.
//! The final hidden states at the three marker tokens are the segment
//! representations; the head maps `[h_source ; h_candidate]` to one score per
//! metric and is applied with the same parameters to both candidate slots.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, RerankerKind, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::metrics::MetricId;
use crate::nn::{Encoder, EncoderConfig, Graph, Mlp, ParamStore, Tensor, Var};
use crate::scalar::{sigmoid, Scalar};
use crate::vocab::{Vocab, BOS_ID, CANDIDATE1_ID, CANDIDATE2_ID, SEP_ID, SOURCE_ID};

/// Marker and separator tokens in a pair sequence.
pub const PAIR_OVERHEAD: usize = 7;
pub const HEAD_DEPTH: usize = 5;

/// Per-segment token budgets; segments keep their first tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationLimits {
    pub source_max: usize,
    pub cand_max: usize,
}

impl TruncationLimits {
    /// Half of the room left after markers goes to the source, a quarter to each candidate.
    pub fn for_capacity(capacity: usize) -> Self {
        let room = capacity.saturating_sub(PAIR_OVERHEAD);
        TruncationLimits {
            source_max: room / 2,
            cand_max: room / 4,
        }
    }

    pub fn assembled_max(&self) -> usize {
        PAIR_OVERHEAD + self.source_max + 2 * self.cand_max
    }
}

/// Architecture knobs exposed in run configs; the vocabulary size comes from data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    pub width: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_width: usize,
    pub max_len: usize,
    pub use_positions: bool,
    pub vocab_max: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            width: 256,
            layers: 4,
            heads: 4,
            ff_width: 1024,
            max_len: 512,
            use_positions: true,
            vocab_max: 30_000,
        }
    }
}

impl ArchConfig {
    pub fn encoder_config(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            vocab_size,
            max_len: self.max_len,
            width: self.width,
            layers: self.layers,
            heads: self.heads,
            ff_width: self.ff_width,
            use_positions: self.use_positions,
        }
    }
}

/// Token ids of an assembled pair sequence and where its markers sit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairInput {
    pub source_tokens: Vec<usize>,
    pub cand1_tokens: Vec<usize>,
    pub cand2_tokens: Vec<usize>,
    pub limits: TruncationLimits,
    pub ids: Vec<usize>,
    /// Positions of `<source>`, `<candidate1>`, `<candidate2>`.
    pub anchors: [usize; 3],
    pub truncated: bool,
}

fn truncate(mut toks: Vec<usize>, max: usize, what: &str) -> Result<(Vec<usize>, bool)> {
    if toks.is_empty() {
        return Err(Error::Validation(format!("{what} segment is empty")));
    }
    let cut = toks.len() > max;
    toks.truncate(max);
    if toks.is_empty() {
        return Err(Error::Config(format!("{what} limit of 0 tokens leaves the segment empty")));
    }
    Ok((toks, cut))
}

/// Build the joint input. Errors on an empty segment or if the limits cannot fit `capacity`.
pub fn assemble_pair_sequence(
    vocab: &Vocab,
    source: &str,
    cand1: &str,
    cand2: &str,
    limits: TruncationLimits,
    capacity: usize,
) -> Result<PairInput> {
    let (src, t0) = truncate(vocab.encode(source), limits.source_max, "source")?;
    let (c1, t1) = truncate(vocab.encode(cand1), limits.cand_max, "candidate1")?;
    let (c2, t2) = truncate(vocab.encode(cand2), limits.cand_max, "candidate2")?;
    let total = PAIR_OVERHEAD + src.len() + c1.len() + c2.len();
    if total > capacity {
        return Err(Error::Config(format!(
            "assembled pair of {total} tokens exceeds encoder capacity {capacity}; lower the truncation limits"
        )));
    }
    let mut ids = Vec::with_capacity(total);
    ids.extend([BOS_ID, SOURCE_ID]);
    ids.extend(&src);
    ids.push(SEP_ID);
    let a1 = ids.len();
    ids.push(CANDIDATE1_ID);
    ids.extend(&c1);
    ids.push(SEP_ID);
    let a2 = ids.len();
    ids.push(CANDIDATE2_ID);
    ids.extend(&c2);
    ids.push(SEP_ID);
    Ok(PairInput {
        source_tokens: src,
        cand1_tokens: c1,
        cand2_tokens: c2,
        limits,
        ids,
        anchors: [1, a1, a2],
        truncated: t0 || t1 || t2,
    })
}

/// Per-metric scores for one candidate slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector<F>(pub Vec<F>);

impl<F: Scalar> ScoreVector<F> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|x| x.as_f64()).collect()
    }
}

/// `σ(s_i − s_j)` per metric: confidence that slot i beats slot j.
pub fn confidence<F: Scalar>(s_i: &ScoreVector<F>, s_j: &ScoreVector<F>) -> Result<Vec<F>> {
    if s_i.len() != s_j.len() {
        return Err(Error::Shape(format!(
            "score vectors of length {} and {}",
            s_i.len(),
            s_j.len()
        )));
    }
    Ok(s_i.0.iter().zip(&s_j.0).map(|(&a, &b)| sigmoid(a - b)).collect())
}

/// Graph handles for one scored pair.
#[derive(Debug, Clone, Copy)]
pub struct PairVars {
    pub hidden: Var,
    pub s_i: Var,
    pub s_j: Var,
}

/// PairReranker: encoder plus a 5-layer tanh head shared by both slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerModel<F: Scalar> {
    pub params: ParamStore<F>,
    pub encoder: Encoder,
    pub head: Mlp,
    pub vocab: Vocab,
    pub metrics: Vec<MetricId>,
    pub limits: TruncationLimits,
}

impl<F: Scalar> ScorerModel<F> {
    pub fn new(
        vocab: Vocab,
        arch: &ArchConfig,
        metrics: &[MetricId],
        limits: Option<TruncationLimits>,
        seed: u64,
    ) -> Result<Self> {
        if metrics.is_empty() {
            return Err(Error::Config("metric list is empty".into()));
        }
        if !vocab.has_special_tokens() {
            return Err(Error::Config("vocabulary lacks the marker tokens".into()));
        }
        let limits = limits.unwrap_or_else(|| TruncationLimits::for_capacity(arch.max_len));
        if limits.assembled_max() > arch.max_len {
            return Err(Error::Config(format!(
                "truncation limits allow {} tokens but the encoder holds {}",
                limits.assembled_max(),
                arch.max_len
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::default();
        let encoder = Encoder::new(&mut params, "encoder", arch.encoder_config(vocab.len()), &mut rng)?;
        let d = arch.width;
        let head = Mlp::new(
            &mut params,
            "head",
            &[2 * d, d, d, d, d, metrics.len()],
            &mut rng,
        );
        Ok(ScorerModel {
            params,
            encoder,
            head,
            vocab,
            metrics: metrics.to_vec(),
            limits,
        })
    }

    pub fn num_metrics(&self) -> usize {
        self.metrics.len()
    }

    pub fn assemble(&self, source: &str, cand1: &str, cand2: &str) -> Result<PairInput> {
        assemble_pair_sequence(
            &self.vocab,
            source,
            cand1,
            cand2,
            self.limits,
            self.encoder.config.max_len,
        )
    }

    /// Scores for both slots, recorded on `g` for back-propagation.
    pub fn forward(&self, g: &mut Graph<'_, F>, input: &PairInput) -> Result<PairVars> {
        let hidden = self.encoder.forward(g, &input.ids)?;
        let [ps, p1, p2] = input.anchors;
        let h_src = g.gather_rows(hidden, &[ps]);
        let h_1 = g.gather_rows(hidden, &[p1]);
        let h_2 = g.gather_rows(hidden, &[p2]);
        let x1 = g.concat_cols(&[h_src, h_1]);
        let x2 = g.concat_cols(&[h_src, h_2]);
        let s_i = self.head.forward(g, x1);
        let s_j = self.head.forward(g, x2);
        Ok(PairVars { hidden, s_i, s_j })
    }

    pub fn encode_and_score(&self, input: &PairInput) -> Result<(ScoreVector<F>, ScoreVector<F>)> {
        let mut g = Graph::new(&self.params);
        let vars = self.forward(&mut g, input)?;
        Ok((
            ScoreVector(g.value(vars.s_i).data.clone()),
            ScoreVector(g.value(vars.s_j).data.clone()),
        ))
    }

    pub fn score_texts(&self, source: &str, cand1: &str, cand2: &str) -> Result<(ScoreVector<F>, ScoreVector<F>)> {
        let input = self.assemble(source, cand1, cand2)?;
        self.encode_and_score(&input)
    }

    /// Final hidden states at the three marker positions.
    pub fn anchor_states(&self, input: &PairInput) -> Result<[Vec<F>; 3]> {
        let mut g = Graph::new(&self.params);
        let hidden = self.encoder.forward(&mut g, &input.ids)?;
        let h: &Tensor<F> = g.value(hidden);
        Ok(input.anchors.map(|p| h.row(p).to_vec()))
    }

    pub fn hidden_states(&self, ids: &[usize]) -> Result<Tensor<F>> {
        let mut g = Graph::new(&self.params);
        let hidden = self.encoder.forward(&mut g, ids)?;
        Ok(g.value(hidden).clone())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: FORMAT_VERSION,
            kind: RerankerKind::PairReranker,
            metrics: self.metrics.clone(),
            limits: self.limits,
            encoder: self.encoder.config,
            vocab: self.vocab.clone(),
            notes: Default::default(),
            params: self.params.to_file(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind(RerankerKind::PairReranker)?;
        let arch = ArchConfig {
            width: ck.encoder.width,
            layers: ck.encoder.layers,
            heads: ck.encoder.heads,
            ff_width: ck.encoder.ff_width,
            max_len: ck.encoder.max_len,
            use_positions: ck.encoder.use_positions,
            vocab_max: ck.vocab.len(),
        };
        if ck.encoder.vocab_size != ck.vocab.len() {
            return Err(Error::Shape(format!(
                "checkpoint encoder expects {} tokens but carries a vocabulary of {}",
                ck.encoder.vocab_size,
                ck.vocab.len()
            )));
        }
        let mut model = ScorerModel::new(ck.vocab.clone(), &arch, &ck.metrics, Some(ck.limits), 0)?;
        model.params.load_file(&ck.params)?;
        Ok(model)
    }

    /// Same weights in another scalar type.
    pub fn cast<G: Scalar>(&self) -> ScorerModel<G> {
        let mut params = ParamStore::<G>::default();
        for id in self.params.ids() {
            let t = self.params.get(id);
            params.add(
                self.params.name(id),
                Tensor::from_vec(t.rows, t.cols, t.data.iter().map(|x| G::of(x.as_f64())).collect()),
            );
        }
        ScorerModel {
            params,
            encoder: self.encoder.clone(),
            head: self.head.clone(),
            vocab: self.vocab.clone(),
            metrics: self.metrics.clone(),
            limits: self.limits,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocab {
        Vocab::build(["the cat sat on a mat", "dogs run fast", "w0 w1 w2 w3"], 100, 1)
    }

    fn tiny_arch() -> ArchConfig {
        ArchConfig {
            width: 8,
            layers: 1,
            heads: 2,
            ff_width: 16,
            max_len: 64,
            use_positions: true,
            vocab_max: 100,
        }
    }

    #[test]
    fn layout_without_truncation() {
        let v = vocab();
        let p = assemble_pair_sequence(&v, "the cat", "dogs run", "a mat", TruncationLimits::for_capacity(64), 64)
            .unwrap();
        assert_eq!(p.ids.len(), 7 + 2 + 2 + 2);
        assert_eq!(p.anchors, [1, 5, 9]);
        assert_eq!(p.ids[0], BOS_ID);
        assert_eq!(p.ids[p.anchors[0]], SOURCE_ID);
        assert_eq!(p.ids[p.anchors[1]], CANDIDATE1_ID);
        assert_eq!(p.ids[p.anchors[2]], CANDIDATE2_ID);
        assert_eq!(p.ids[4], SEP_ID);
        assert_eq!(*p.ids.last().unwrap(), SEP_ID);
        assert!(!p.truncated);
    }

    #[test]
    fn long_source_keeps_head() {
        let v = vocab();
        let source = vec!["the"; 10_000].join(" ") + " cat";
        let limits = TruncationLimits {
            source_max: 256,
            cand_max: 64,
        };
        let p = assemble_pair_sequence(&v, &source, "dogs", "mat", limits, 512).unwrap();
        assert_eq!(p.source_tokens.len(), 256);
        assert!(p.source_tokens.iter().all(|&t| t == v.id("the")));
        assert!(p.truncated);
    }

    #[test]
    fn swapped_candidates_swap_segments() {
        let v = vocab();
        let l = TruncationLimits::for_capacity(64);
        let a = assemble_pair_sequence(&v, "the cat", "dogs run fast", "a mat", l, 64).unwrap();
        let b = assemble_pair_sequence(&v, "the cat", "a mat", "dogs run fast", l, 64).unwrap();
        assert_eq!(a.ids.len(), b.ids.len());
        assert_eq!(a.anchors[0], b.anchors[0]);
        assert_eq!(a.cand1_tokens, b.cand2_tokens);
        assert_eq!(a.cand2_tokens, b.cand1_tokens);
    }

    #[test]
    fn empty_segment_and_capacity_errors() {
        let v = vocab();
        let l = TruncationLimits::for_capacity(64);
        assert!(assemble_pair_sequence(&v, "", "a", "b", l, 64).is_err());
        assert!(assemble_pair_sequence(&v, "the", "a", "  ", l, 64).is_err());
        let wide = TruncationLimits {
            source_max: 50,
            cand_max: 50,
        };
        let long = vec!["cat"; 60].join(" ");
        assert!(matches!(
            assemble_pair_sequence(&v, &long, &long, &long, wide, 64),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn scores_have_metric_width_and_are_reproducible() {
        let m = [MetricId::Rouge1, MetricId::Rouge2, MetricId::Bleu];
        let model = ScorerModel::<f64>::new(vocab(), &tiny_arch(), &m, None, 3).unwrap();
        assert_eq!(model.head.depth(), HEAD_DEPTH);
        let (a, b) = model.score_texts("the cat", "dogs run", "a mat").unwrap();
        assert_eq!((a.len(), b.len()), (3, 3));
        let (a2, b2) = model.score_texts("the cat", "dogs run", "a mat").unwrap();
        assert_eq!(a.0.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), a2.0.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_eq!(b, b2);
    }

    #[test]
    fn identical_slots_score_equal_without_positions() {
        let arch = ArchConfig {
            use_positions: false,
            ..tiny_arch()
        };
        let mut model = ScorerModel::<f64>::new(vocab(), &arch, &[MetricId::Rouge1, MetricId::Bleu], None, 5).unwrap();
        let table = model.encoder.tokens;
        let row1 = model.params.get(table).row(CANDIDATE1_ID).to_vec();
        model.params.get_mut(table).row_mut(CANDIDATE2_ID).copy_from_slice(&row1);
        let (a, b) = model.score_texts("the cat sat", "dogs run", "dogs run").unwrap();
        for (x, y) in a.0.iter().zip(&b.0) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn confidence_values() {
        let c = confidence(&ScoreVector(vec![1.0f64, 2.0]), &ScoreVector(vec![1.0, 2.0])).unwrap();
        assert_eq!(c, vec![0.5, 0.5]);
        let c = confidence(&ScoreVector(vec![3f64.ln()]), &ScoreVector(vec![0.0])).unwrap();
        assert!((c[0] - 0.75).abs() < 1e-15);
        assert!(confidence(&ScoreVector(vec![1.0f64]), &ScoreVector(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn checkpoint_roundtrip_and_metric_guard() {
        let m = [MetricId::Rouge1, MetricId::Rouge2];
        let model = ScorerModel::<f32>::new(vocab(), &tiny_arch(), &m, None, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        model.to_checkpoint().write(&path).unwrap();
        let ck = Checkpoint::read(&path).unwrap();
        assert!(ck.check_metrics(&m).is_ok());
        assert!(ck.check_metrics(&[MetricId::Rouge1]).is_err());
        let back = ScorerModel::<f32>::from_checkpoint(&ck).unwrap();
        assert_eq!(back, model);
    }
}
