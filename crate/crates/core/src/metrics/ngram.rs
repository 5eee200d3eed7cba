use std::collections::HashMap;

pub(crate) type NgramCounts<'a> = HashMap<&'a [String], usize>;

pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> NgramCounts<'_> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Σ min(count_a, count_b) over shared n-grams.
pub(crate) fn clipped_overlap(a: &NgramCounts<'_>, b: &NgramCounts<'_>) -> usize {
    a.iter()
        .map(|(g, &ca)| b.get(g).map_or(0, |&cb| ca.min(cb)))
        .sum()
}
