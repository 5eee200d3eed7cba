use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::ngram::ngram_counts;
use super::tokenize::tokenize;

pub const CIDER_MAX_ORDER: usize = 4;
/// CIDEr-D convention: the averaged cosine is reported on a 0..10 scale.
pub const CIDER_SCALE: f64 = 10.0;

/// Document frequencies over a reference corpus. Each example's reference
/// set counts as one document. Built once, then read-only.
#[derive(Debug, Clone)]
pub struct CiderIdf {
    df: HashMap<Vec<String>, usize>,
    num_docs: usize,
}

impl CiderIdf {
    pub fn new<'a, I, R>(reference_sets: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = &'a str>,
    {
        let mut df: HashMap<Vec<String>, usize> = HashMap::new();
        let mut num_docs = 0;
        for refs in reference_sets {
            num_docs += 1;
            let mut seen: std::collections::HashSet<Vec<String>> = Default::default();
            for r in refs {
                let toks = tokenize(r);
                for n in 1..=CIDER_MAX_ORDER {
                    for g in ngram_counts(&toks, n).into_keys() {
                        seen.insert(g.to_vec());
                    }
                }
            }
            for g in seen {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        if num_docs == 0 {
            return Err(Error::Validation("CIDEr needs a nonempty reference corpus".into()));
        }
        Ok(CiderIdf { df, num_docs })
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    fn idf<F: Scalar>(&self, gram: &[String]) -> F {
        let df = self.df.get(gram).copied().unwrap_or(0).max(1);
        (F::of_usize(self.num_docs) / F::of_usize(df)).ln()
    }

    fn vector<F: Scalar>(&self, tokens: &[String], n: usize) -> BTreeMap<Vec<String>, F> {
        ngram_counts(tokens, n)
            .into_iter()
            .map(|(g, c)| (g.to_vec(), F::of_usize(c) * self.idf::<F>(g)))
            .collect()
    }

    /// CIDEr of one candidate against its references: TF-IDF n-gram cosine,
    /// averaged over references and orders 1..=4, times [`CIDER_SCALE`].
    pub fn score<F: Scalar>(&self, candidate: &str, references: &[&str]) -> Result<F> {
        if references.is_empty() {
            return Err(Error::Validation("CIDEr needs at least one reference".into()));
        }
        let cand = tokenize(candidate);
        let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
        let mut total = F::zero();
        for n in 1..=CIDER_MAX_ORDER {
            let vc = self.vector::<F>(&cand, n);
            let nc = norm(&vc);
            let mut per_ref = F::zero();
            for r in &refs {
                let vr = self.vector::<F>(r, n);
                let nr = norm(&vr);
                if nc > F::zero() && nr > F::zero() {
                    let dot: F = vc
                        .iter()
                        .map(|(g, &a)| vr.get(g).map_or(F::zero(), |&b| a * b))
                        .sum();
                    per_ref = per_ref + dot / (nc * nr);
                }
            }
            total = total + per_ref / F::of_usize(refs.len());
        }
        Ok(F::of(CIDER_SCALE) * total / F::of_usize(CIDER_MAX_ORDER))
    }
}

fn norm<F: Scalar>(v: &BTreeMap<Vec<String>, F>) -> F {
    v.values().map(|&x| x * x).sum::<F>().sqrt()
}

/// Corpus-level CIDEr: the IDF table comes from the references of `items`.
pub fn cider<F: Scalar>(items: &[(&str, Vec<&str>)]) -> Result<Vec<F>> {
    if items.is_empty() {
        return Err(Error::Validation("CIDEr needs a nonempty corpus".into()));
    }
    let idf = CiderIdf::new(items.iter().map(|(_, refs)| refs.iter().copied()))?;
    items.iter().map(|(c, refs)| idf.score(c, refs)).collect()
}
