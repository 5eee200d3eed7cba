mod common;

use common::oracles::*;
use pairrank::metrics::{bleu, cider, corpus_bleu, rouge_l, rouge_n, CIDER_SCALE};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn fifty_random_corpora_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 0..50 {
        let items = corpus(&mut rng);
        let borrowed: Vec<(&str, Vec<&str>)> =
            items.iter().map(|(c, r)| (c.as_str(), r.iter().map(String::as_str).collect())).collect();
        for (c, refs) in &borrowed {
            let r0 = refs[0];
            assert!(close(rouge_n::<f64>(c, r0, 1), brute_rouge_n(c, r0, 1)), "corpus {k}: rouge1");
            assert!(close(rouge_n::<f64>(c, r0, 2), brute_rouge_n(c, r0, 2)), "corpus {k}: rouge2");
            assert!(close(rouge_l::<f64>(c, r0), brute_rouge_l(c, r0)), "corpus {k}: rougeL");
            assert!(close(bleu::<f64>(c, refs, 4).unwrap(), brute_bleu(c, refs)), "corpus {k}: bleu {c:?} {refs:?}");
        }
        assert!(close(corpus_bleu::<f64>(&borrowed, 4).unwrap(), brute_corpus_bleu(&items)), "corpus {k}: corpus bleu");
        let ours = cider::<f64>(&borrowed).unwrap();
        for (a, b) in ours.iter().zip(brute_cider(&items)) {
            assert!(close(*a, b), "corpus {k}: cider {a} vs {b}");
        }
    }
}

#[test]
fn oracles_agree_on_hand_counted_cases() {
    assert_eq!(brute_rouge_n("the cat", "the dog", 1), 0.5);
    assert_eq!(brute_rouge_l("a b c d", "a c b d"), 0.75);
    assert!((brute_bleu("a b", &["a c"]) - 0.25f64.powf(0.25)).abs() < 1e-15);
    assert!((brute_bleu("a b", &["a b c d"]) - (-1.0f64).exp()).abs() < 1e-15);
    assert!((brute_bleu("a b c d", &["a b c d"]) - 1.0).abs() < 1e-15);
    let items = vec![
        ("red apple on table".to_string(), vec!["red apple on table".to_string()]),
        ("blue sky".to_string(), vec!["blue sky over sea".to_string()]),
    ];
    assert!((brute_cider(&items)[0] - CIDER_SCALE).abs() < 1e-12);
}
