use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::ngram::ngram_counts;
use super::tokenize::tokenize;

/// Clipped matches and candidate n-gram totals for orders `1..=max_order`.
fn clipped_stats(cand: &[String], refs: &[Vec<String>], max_order: usize) -> Vec<(usize, usize)> {
    (1..=max_order)
        .map(|n| {
            let c = ngram_counts(cand, n);
            let mut max_ref: HashMap<&[String], usize> = HashMap::new();
            for r in refs {
                for (g, cnt) in ngram_counts(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(cnt);
                }
            }
            let matches = c
                .iter()
                .map(|(g, &cc)| max_ref.get(g).map_or(0, |&rc| cc.min(rc)))
                .sum();
            (matches, cand.len().saturating_sub(n - 1))
        })
        .collect()
}

/// Reference length closest to `cand_len`; ties go to the shorter one.
fn closest_ref_len(cand_len: usize, refs: &[Vec<String>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(cand_len), r))
        .unwrap_or(0)
}

fn brevity_penalty<F: Scalar>(cand_len: usize, ref_len: usize) -> F {
    if cand_len == 0 {
        F::zero()
    } else if cand_len > ref_len {
        F::one()
    } else {
        (F::one() - F::of_usize(ref_len) / F::of_usize(cand_len)).exp()
    }
}

pub(crate) fn bleu_tokens<F: Scalar>(cand: &[String], refs: &[Vec<String>], max_order: usize) -> F {
    if cand.is_empty() {
        return F::zero();
    }
    let stats = clipped_stats(cand, refs, max_order);
    let mut log_sum = F::zero();
    for (i, &(m, t)) in stats.iter().enumerate() {
        let p = if i == 0 {
            if m == 0 {
                return F::zero();
            }
            F::of_usize(m) / F::of_usize(t)
        } else if m == 0 {
            // add-one on zero counts, orders >= 2
            F::one() / F::of_usize(t + 1)
        } else {
            F::of_usize(m) / F::of_usize(t)
        };
        log_sum = log_sum + p.ln();
    }
    let bp = brevity_penalty::<F>(cand.len(), closest_ref_len(cand.len(), refs));
    bp * (log_sum / F::of_usize(max_order)).exp()
}

/// Smoothed sentence BLEU: geometric mean of clipped precisions for orders
/// `1..=max_order` times the brevity penalty. Zero higher-order match counts
/// are replaced by `1 / (total + 1)`; a zero unigram precision yields 0.
pub fn bleu<F: Scalar>(candidate: &str, references: &[&str], max_order: usize) -> Result<F> {
    if references.is_empty() {
        return Err(Error::Validation("bleu needs at least one reference".into()));
    }
    if max_order == 0 {
        return Err(Error::Validation("bleu max_order must be >= 1".into()));
    }
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
    Ok(bleu_tokens(&tokenize(candidate), &refs, max_order))
}

/// Unsmoothed corpus BLEU-`max_order` over (candidate, references) pairs.
pub fn corpus_bleu<F: Scalar>(pairs: &[(&str, Vec<&str>)], max_order: usize) -> Result<F> {
    if pairs.is_empty() {
        return Err(Error::Validation("corpus_bleu needs at least one pair".into()));
    }
    let mut matches = vec![0usize; max_order];
    let mut totals = vec![0usize; max_order];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);
    for (cand, refs) in pairs {
        if refs.is_empty() {
            return Err(Error::Validation("bleu needs at least one reference".into()));
        }
        let c = tokenize(cand);
        let r: Vec<Vec<String>> = refs.iter().map(|s| tokenize(s)).collect();
        for (i, (m, t)) in clipped_stats(&c, &r, max_order).into_iter().enumerate() {
            matches[i] += m;
            totals[i] += t;
        }
        cand_len += c.len();
        ref_len += closest_ref_len(c.len(), &r);
    }
    if matches.iter().any(|&m| m == 0) {
        return Ok(F::zero());
    }
    let log_sum: F = matches
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| (F::of_usize(m) / F::of_usize(t)).ln())
        .sum();
    Ok(brevity_penalty::<F>(cand_len, ref_len) * (log_sum / F::of_usize(max_order)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_disjoint() {
        let s = "the quick brown fox jumps";
        assert!((bleu::<f64>(s, &[s], 4).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(bleu::<f64>("a b c d", &["e f g h"], 4).unwrap(), 0.0);
    }

    #[test]
    fn empty_references_rejected() {
        assert!(bleu::<f64>("a", &[], 4).is_err());
    }

    #[test]
    fn hand_counted_two_token_case() {
        // cand "a b", ref "a c": p1 = 1/2, p2 = add-one 1/(1+1), p3, p4 = 1/(0+1)
        // BLEU = (1/2 * 1/2 * 1 * 1)^(1/4) * BP(=1)
        let got = bleu::<f64>("a b", &["a c"], 4).unwrap();
        assert!((got - 0.25f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn brevity_penalty_applies() {
        // cand "a b" vs ref "a b c d": p1 = p2 = 1, p3 = p4 = 1; BP = exp(1 - 4/2)
        let got = bleu::<f64>("a b", &["a b c d"], 4).unwrap();
        assert!((got - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn corpus_identity() {
        let pairs = vec![("a b c d e", vec!["a b c d e"]), ("x y z w", vec!["x y z w"])];
        assert!((corpus_bleu::<f64>(&pairs, 4).unwrap() - 1.0).abs() < 1e-15);
    }
}
