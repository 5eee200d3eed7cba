use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fnv1a, DecodingConfig, DecodingMethod, Generator};
use crate::error::{Error, Result};
use crate::metrics::tokenize;
use crate::store::Example;

const EOS: usize = 0;
const BOS: usize = 1;
const NULL_WORD: &str = "<null>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexicalConfig {
    pub em_iterations: usize,
    /// Weight of the bigram language model against the translation table.
    pub bigram_weight: f64,
    pub repetition_penalty: f64,
    /// Translations kept per source word.
    pub max_translations: usize,
    pub smoothing: f64,
}

impl Default for LexicalConfig {
    fn default() -> Self {
        LexicalConfig {
            em_iterations: 5,
            bigram_weight: 0.5,
            repetition_penalty: 1.0,
            max_translations: 20,
            smoothing: 0.1,
        }
    }
}

/// A tiny trainable sequence generator: word-translation table fitted by EM
/// plus a bigram target language model, decoded left to right.
#[derive(Debug, Clone)]
pub struct LexicalGenerator {
    cfg: LexicalConfig,
    words: Vec<String>,
    trans: HashMap<String, Vec<(usize, f64)>>,
    bigram: HashMap<usize, HashMap<usize, f64>>,
    prev_totals: HashMap<usize, f64>,
    length_ratio: f64,
}

#[derive(Debug, Clone)]
struct Hyp {
    toks: Vec<usize>,
    score: f64,
}

fn by_score(a: &Hyp, b: &Hyp) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.toks.cmp(&b.toks))
}

impl LexicalGenerator {
    pub fn train(examples: &[Example], cfg: LexicalConfig) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::Validation("lexical generator needs training examples".into()));
        }
        let pairs: Vec<(Vec<String>, Vec<String>)> = examples
            .iter()
            .map(|e| {
                let mut s = tokenize(&e.source);
                s.push(NULL_WORD.to_string());
                (s, tokenize(&e.target))
            })
            .collect();
        let mut words = vec!["</s>".to_string(), "<s>".to_string()];
        let mut index: HashMap<String, usize> = HashMap::new();
        let vocab: BTreeSet<&String> = pairs.iter().flat_map(|(_, t)| t).collect();
        for w in vocab {
            index.insert(w.clone(), words.len());
            words.push(w.clone());
        }
        let tgt: Vec<Vec<usize>> = pairs.iter().map(|(_, t)| t.iter().map(|w| index[w]).collect()).collect();

        let mut t: HashMap<(&str, usize), f64> = HashMap::new();
        for ((src, _), ids) in pairs.iter().zip(&tgt) {
            for f in src {
                for &e in ids {
                    t.insert((f.as_str(), e), 1.0);
                }
            }
        }
        for _ in 0..cfg.em_iterations {
            let mut count: HashMap<(&str, usize), f64> = HashMap::new();
            let mut total: HashMap<&str, f64> = HashMap::new();
            for ((src, _), ids) in pairs.iter().zip(&tgt) {
                for &e in ids {
                    let z: f64 = src.iter().map(|f| t[&(f.as_str(), e)]).sum();
                    for f in src {
                        let c = t[&(f.as_str(), e)] / z;
                        *count.entry((f.as_str(), e)).or_default() += c;
                        *total.entry(f.as_str()).or_default() += c;
                    }
                }
            }
            for (k, v) in t.iter_mut() {
                *v = count.get(k).copied().unwrap_or(0.0) / total[k.0];
            }
        }
        let mut trans: HashMap<String, Vec<(usize, f64)>> = HashMap::new();
        for ((f, e), p) in t {
            trans.entry(f.to_string()).or_default().push((e, p));
        }
        for list in trans.values_mut() {
            list.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            list.truncate(cfg.max_translations);
        }

        let mut bigram: HashMap<usize, HashMap<usize, f64>> = HashMap::new();
        let mut prev_totals: HashMap<usize, f64> = HashMap::new();
        let (mut src_len, mut tgt_len) = (0usize, 0usize);
        for ((src, _), ids) in pairs.iter().zip(&tgt) {
            src_len += src.len() - 1;
            tgt_len += ids.len();
            let seq: Vec<usize> = std::iter::once(BOS).chain(ids.iter().copied()).chain([EOS]).collect();
            for w in seq.windows(2) {
                *bigram.entry(w[0]).or_default().entry(w[1]).or_default() += 1.0;
                *prev_totals.entry(w[0]).or_default() += 1.0;
            }
        }
        Ok(LexicalGenerator {
            cfg,
            words,
            trans,
            bigram,
            prev_totals,
            length_ratio: tgt_len as f64 / src_len.max(1) as f64,
        })
    }

    fn bigram_logp(&self, prev: usize, w: usize) -> f64 {
        let s = self.cfg.smoothing;
        let c = self.bigram.get(&prev).and_then(|m| m.get(&w)).copied().unwrap_or(0.0);
        let total = self.prev_totals.get(&prev).copied().unwrap_or(0.0);
        ((c + s) / (total + s * self.words.len() as f64)).ln()
    }

    fn allowed(&self, src: &[String]) -> Vec<usize> {
        let mut set: BTreeSet<usize> = BTreeSet::new();
        for f in src.iter().map(String::as_str).chain([NULL_WORD]) {
            if let Some(list) = self.trans.get(f) {
                set.extend(list.iter().map(|&(e, _)| e));
            }
        }
        set.insert(EOS);
        set.into_iter().collect()
    }

    fn translation_p(&self, src: &[String], w: usize) -> f64 {
        let n = src.len() + 1;
        let sum: f64 = src
            .iter()
            .map(String::as_str)
            .chain([NULL_WORD])
            .filter_map(|f| self.trans.get(f))
            .filter_map(|list| list.iter().find(|&&(e, _)| e == w).map(|&(_, p)| p))
            .sum();
        sum / n as f64
    }

    fn max_len(&self, src: &[String]) -> usize {
        (1.5 * self.length_ratio * src.len() as f64).ceil() as usize + 3
    }

    /// Log-score of every allowed next token; `None` where a token is banned.
    fn step_scores(&self, src: &[String], allowed: &[usize], prefix: &[usize]) -> Vec<Option<f64>> {
        let prev = prefix.last().copied().unwrap_or(BOS);
        let len = prefix.len();
        let at_limit = len + 1 >= self.max_len(src);
        let expected = self.length_ratio * src.len() as f64;
        allowed
            .iter()
            .map(|&w| {
                if w == EOS {
                    if len == 0 {
                        return None;
                    }
                    let short = (expected - len as f64).max(0.0);
                    return Some(self.bigram_logp(prev, EOS) - 2.0 * short);
                }
                if at_limit {
                    return None;
                }
                let reps = prefix.iter().filter(|&&x| x == w).count() as f64;
                Some(
                    self.cfg.bigram_weight * self.bigram_logp(prev, w) + (self.translation_p(src, w) + 1e-6).ln()
                        - self.cfg.repetition_penalty * reps,
                )
            })
            .collect()
    }

    fn render(&self, toks: &[usize]) -> String {
        toks.iter()
            .filter(|&&t| t != EOS)
            .map(|&t| self.words[t].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Group beam search with a Hamming diversity penalty between groups.
    fn search(&self, src: &[String], width: usize, groups: usize, penalty: f64) -> Vec<Hyp> {
        let allowed = self.allowed(src);
        let mut beams: Vec<Vec<Hyp>> = vec![vec![Hyp { toks: vec![], score: 0.0 }]; groups];
        let mut finished = Vec::new();
        for _ in 0..self.max_len(src) {
            let mut chosen: HashMap<usize, f64> = HashMap::new();
            for beam in beams.iter_mut() {
                let mut cands = Vec::new();
                for h in beam.iter() {
                    for (&w, s) in allowed.iter().zip(self.step_scores(src, &allowed, &h.toks)) {
                        let Some(s) = s else { continue };
                        let mut toks = h.toks.clone();
                        toks.push(w);
                        let pen = penalty * chosen.get(&w).copied().unwrap_or(0.0);
                        cands.push(Hyp {
                            toks,
                            score: h.score + s - pen,
                        });
                    }
                }
                cands.sort_by(by_score);
                cands.truncate(width);
                for h in &cands {
                    *chosen.entry(*h.toks.last().unwrap()).or_default() += 1.0;
                }
                let (done, active): (Vec<Hyp>, Vec<Hyp>) = cands.into_iter().partition(|h| h.toks.last() == Some(&EOS));
                finished.extend(done);
                *beam = active;
            }
            if beams.iter().all(Vec::is_empty) {
                break;
            }
        }
        finished.extend(beams.into_iter().flatten());
        finished
    }

    fn sample(&self, src: &[String], config: &DecodingConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let allowed = self.allowed(src);
        let mut toks = Vec::new();
        loop {
            let scores = self.step_scores(src, &allowed, &toks);
            let mut opts: Vec<(usize, f64)> = allowed
                .iter()
                .zip(scores)
                .filter_map(|(&w, s)| s.map(|s| (w, s / config.temperature)))
                .collect();
            opts.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let top = opts[0].1;
            let mut probs: Vec<f64> = opts.iter().map(|&(_, s)| (s - top).exp()).collect();
            let z: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= z);
            let keep = match config.method {
                DecodingMethod::TopK => config.k.unwrap_or(1).min(opts.len()),
                _ => {
                    let p = config.p.unwrap_or(1.0);
                    let mut acc = 0.0;
                    probs.iter().position(|&q| {
                        acc += q;
                        acc >= p
                    }).map_or(opts.len(), |i| i + 1)
                }
            };
            let mass: f64 = probs[..keep].iter().sum();
            let mut r = rng.gen::<f64>() * mass;
            let mut pick = opts[keep - 1].0;
            for i in 0..keep {
                r -= probs[i];
                if r <= 0.0 {
                    pick = opts[i].0;
                    break;
                }
            }
            toks.push(pick);
            if pick == EOS {
                return toks;
            }
        }
    }
}

impl Generator for LexicalGenerator {
    fn generate(&self, source: &str, config: &DecodingConfig) -> std::result::Result<Vec<String>, String> {
        let src = tokenize(source);
        if src.is_empty() {
            return Err("empty source".into());
        }
        let n = config.num_candidates;
        let texts: Vec<String> = match config.method {
            DecodingMethod::Beam | DecodingMethod::DiverseBeam => {
                let width = config.beam_width.unwrap_or(n).max(n);
                let (groups, penalty) = if config.method == DecodingMethod::Beam {
                    (1, 0.0)
                } else {
                    let g = config.groups().clamp(1, width);
                    (g, config.diversity_penalty.unwrap_or(1.0))
                };
                let mut hyps = self.search(&src, width.div_ceil(groups), groups, penalty);
                for h in hyps.iter_mut() {
                    h.score /= h.toks.len() as f64;
                }
                hyps.sort_by(by_score);
                let mut seen = HashSet::new();
                hyps.iter()
                    .map(|h| self.render(&h.toks))
                    .filter(|t| seen.insert(t.clone()))
                    .take(n)
                    .collect()
            }
            DecodingMethod::TopK | DecodingMethod::TopP => {
                let seed = config.seed.ok_or("sampling requires a seed")?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(source));
                (0..n).map(|_| self.render(&self.sample(&src, config, &mut rng))).collect()
            }
        };
        if texts.is_empty() {
            return Err("decoder produced no candidates".into());
        }
        // Tiny vocabularies can run out of distinct hypotheses.
        Ok((0..n).map(|i| texts[i % texts.len()].clone()).collect())
    }
}
