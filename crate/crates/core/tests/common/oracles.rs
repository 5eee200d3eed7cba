//! Brute-force metric implementations written independently of the library.

use pairrank::metrics::{tokenize, CIDER_SCALE};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-9;
const WORDS: [&str; 8] = ["a", "b", "c", "d", "The", "cat", "x,", "y."];

fn grams(t: &[String], n: usize) -> Vec<Vec<String>> {
    if t.len() < n {
        return vec![];
    }
    (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect()
}

fn count(list: &[Vec<String>], g: &[String]) -> usize {
    list.iter().filter(|x| x.as_slice() == g).count()
}

fn distinct(list: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = Vec::new();
    for g in list {
        if !out.contains(g) {
            out.push(g.clone());
        }
    }
    out
}

/// Overlap by removing matched grams one at a time.
fn multiset_overlap(c: &[Vec<String>], r: &[Vec<String>]) -> usize {
    let mut pool = r.to_vec();
    let mut hits = 0;
    for g in c {
        if let Some(i) = pool.iter().position(|x| x == g) {
            pool.remove(i);
            hits += 1;
        }
    }
    hits
}

fn f1(o: usize, c: usize, r: usize) -> f64 {
    if o == 0 || c == 0 || r == 0 {
        return 0.0;
    }
    let (p, rc) = (o as f64 / c as f64, o as f64 / r as f64);
    2.0 * p * rc / (p + rc)
}

pub fn brute_rouge_n(c: &str, r: &str, n: usize) -> f64 {
    let (gc, gr) = (grams(&tokenize(c), n), grams(&tokenize(r), n));
    f1(multiset_overlap(&gc, &gr), gc.len(), gr.len())
}

fn is_subsequence(s: &[&String], of: &[String]) -> bool {
    let mut it = of.iter();
    s.iter().all(|x| it.any(|y| y == *x))
}

/// LCS by enumerating every subset of the candidate.
pub fn brute_rouge_l(c: &str, r: &str) -> f64 {
    let (tc, tr) = (tokenize(c), tokenize(r));
    let mut best = 0;
    for mask in 0u32..(1 << tc.len()) {
        let sub: Vec<&String> = (0..tc.len()).filter(|i| mask >> i & 1 == 1).map(|i| &tc[i]).collect();
        if sub.len() > best && is_subsequence(&sub, &tr) {
            best = sub.len();
        }
    }
    f1(best, tc.len(), tr.len())
}

fn clipped(c: &[String], refs: &[Vec<String>], n: usize) -> (usize, usize) {
    let gc = grams(c, n);
    let m = distinct(&gc)
        .iter()
        .map(|g| {
            let max_ref = refs.iter().map(|r| count(&grams(r, n), g)).max().unwrap_or(0);
            count(&gc, g).min(max_ref)
        })
        .sum();
    (m, gc.len())
}

fn closest(c: usize, refs: &[Vec<String>]) -> usize {
    let mut lens: Vec<usize> = refs.iter().map(Vec::len).collect();
    lens.sort();
    let mut best = lens[0];
    for &l in &lens {
        if l.abs_diff(c) < best.abs_diff(c) {
            best = l;
        }
    }
    best
}

fn bp(c: usize, r: usize) -> f64 {
    if c == 0 {
        0.0
    } else if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    }
}

pub fn brute_bleu(c: &str, refs: &[&str]) -> f64 {
    let tc = tokenize(c);
    let tr: Vec<Vec<String>> = refs.iter().map(|r| tokenize(r)).collect();
    if tc.is_empty() {
        return 0.0;
    }
    let mut logp = 0.0;
    for n in 1..=4 {
        let (m, t) = clipped(&tc, &tr, n);
        let p = match (n, m) {
            (1, 0) => return 0.0,
            (_, 0) => 1.0 / (t + 1) as f64,
            _ => m as f64 / t as f64,
        };
        logp += p.ln() / 4.0;
    }
    bp(tc.len(), closest(tc.len(), &tr)) * logp.exp()
}

pub fn brute_corpus_bleu(items: &[(String, Vec<String>)]) -> f64 {
    let mut m = [0usize; 4];
    let mut t = [0usize; 4];
    let (mut cl, mut rl) = (0, 0);
    for (c, refs) in items {
        let tc = tokenize(c);
        let tr: Vec<Vec<String>> = refs.iter().map(|r| tokenize(r)).collect();
        for n in 1..=4 {
            let (a, b) = clipped(&tc, &tr, n);
            m[n - 1] += a;
            t[n - 1] += b;
        }
        cl += tc.len();
        rl += closest(tc.len(), &tr);
    }
    if m.contains(&0) {
        return 0.0;
    }
    let logp: f64 = (0..4).map(|i| (m[i] as f64 / t[i] as f64).ln() / 4.0).sum();
    bp(cl, rl) * logp.exp()
}

/// CIDEr over explicit vectors indexed by the list of every n-gram in the corpus.
pub fn brute_cider(items: &[(String, Vec<String>)]) -> Vec<f64> {
    let toks: Vec<(Vec<String>, Vec<Vec<String>>)> = items
        .iter()
        .map(|(c, rs)| (tokenize(c), rs.iter().map(|r| tokenize(r)).collect()))
        .collect();
    let n_docs = items.len() as f64;
    toks.iter()
        .map(|(c, refs)| {
            let mut total = 0.0;
            for n in 1..=4 {
                let mut axis: Vec<Vec<String>> = grams(c, n);
                for r in refs {
                    axis.extend(grams(r, n));
                }
                let axis = distinct(&axis);
                let idf: Vec<f64> = axis
                    .iter()
                    .map(|g| {
                        let df = toks
                            .iter()
                            .filter(|(_, rs)| rs.iter().any(|r| count(&grams(r, n), g) > 0))
                            .count()
                            .max(1);
                        (n_docs / df as f64).ln()
                    })
                    .collect();
                let vec_of = |t: &[String]| -> Vec<f64> {
                    let gs = grams(t, n);
                    axis.iter().zip(&idf).map(|(g, w)| count(&gs, g) as f64 * w).collect()
                };
                let vc = vec_of(c);
                let mut sum = 0.0;
                for r in refs {
                    let vr = vec_of(r);
                    let dot: f64 = vc.iter().zip(&vr).map(|(a, b)| a * b).sum();
                    let na = vc.iter().map(|a| a * a).sum::<f64>().sqrt();
                    let nb = vr.iter().map(|b| b * b).sum::<f64>().sqrt();
                    if na > 0.0 && nb > 0.0 {
                        sum += dot / (na * nb);
                    }
                }
                total += sum / refs.len() as f64;
            }
            CIDER_SCALE * total / 4.0
        })
        .collect()
}

pub fn sentence(rng: &mut ChaCha8Rng, max: usize) -> String {
    let n = rng.gen_range(0..=max);
    (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

pub fn corpus(rng: &mut ChaCha8Rng) -> Vec<(String, Vec<String>)> {
    (0..10)
        .map(|_| {
            let refs = (0..rng.gen_range(1..=3)).map(|_| sentence(rng, 9)).collect();
            (sentence(rng, 9), refs)
        })
        .collect()
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

