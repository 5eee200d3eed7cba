use crate::scalar::Scalar;

use super::ngram::{clipped_overlap, ngram_counts};
use super::tokenize::tokenize;

fn f1<F: Scalar>(overlap: usize, cand_total: usize, ref_total: usize) -> F {
    if overlap == 0 || cand_total == 0 || ref_total == 0 {
        return F::zero();
    }
    let p = F::of_usize(overlap) / F::of_usize(cand_total);
    let r = F::of_usize(overlap) / F::of_usize(ref_total);
    F::of(2.0) * p * r / (p + r)
}

pub(crate) fn rouge_n_tokens<F: Scalar>(cand: &[String], reference: &[String], n: usize) -> F {
    let c = ngram_counts(cand, n);
    let r = ngram_counts(reference, n);
    let ct = cand.len().saturating_sub(n - 1);
    let rt = reference.len().saturating_sub(n - 1);
    f1(clipped_overlap(&c, &r), ct, rt)
}

/// Sentence-level ROUGE-N F1 for `n` in {1, 2}.
pub fn rouge_n<F: Scalar>(candidate: &str, reference: &str, n: usize) -> F {
    assert!(n == 1 || n == 2, "rouge_n supports n = 1 or 2, got {n}");
    rouge_n_tokens(&tokenize(candidate), &tokenize(reference), n)
}

/// Recall half of ROUGE-N, exposed for monotonicity checks.
pub fn rouge_n_recall<F: Scalar>(candidate: &str, reference: &str, n: usize) -> F {
    let (c, r) = (tokenize(candidate), tokenize(reference));
    let rt = r.len().saturating_sub(n - 1);
    if rt == 0 {
        return F::zero();
    }
    let overlap = clipped_overlap(&ngram_counts(&c, n), &ngram_counts(&r, n));
    F::of_usize(overlap) / F::of_usize(rt)
}

pub(crate) fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub(crate) fn rouge_l_tokens<F: Scalar>(cand: &[String], reference: &[String]) -> F {
    f1(lcs_len(cand, reference), cand.len(), reference.len())
}

/// Sentence-level ROUGE-L F1 over the longest common subsequence.
pub fn rouge_l<F: Scalar>(candidate: &str, reference: &str) -> F {
    rouge_l_tokens(&tokenize(candidate), &tokenize(reference))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        assert_eq!(rouge_n::<f64>("the cat sat", "the cat sat", 1), 1.0);
        assert_eq!(rouge_n::<f64>("", "the cat", 1), 0.0);
        assert_eq!(rouge_n::<f64>("the cat", "the dog", 1), 0.5);
        assert_eq!(rouge_n::<f64>("the cat", "the dog", 2), 0.0);
        assert_eq!(rouge_l::<f64>("a b c d", "a b c d"), 1.0);
        assert_eq!(rouge_l::<f64>("a b", "c d"), 0.0);
        assert_eq!(rouge_l::<f64>("a b c d", "a c b d"), 0.75);
    }

    #[test]
    fn single_token_has_no_bigrams() {
        assert_eq!(rouge_n::<f64>("a", "a", 2), 0.0);
    }

    #[test]
    fn works_in_f32() {
        assert!((rouge_n::<f32>("the cat", "the dog", 1) - 0.5).abs() < 1e-7);
    }
}
