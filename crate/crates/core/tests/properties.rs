mod common;

use common::{example, pool_with};
use pairrank::baselines::{simcls_loss, summareranker_loss};
use pairrank::metrics::{bleu, cider, oracle_select, rouge_l, rouge_n, rouge_n_recall, MetricId, CIDER_SCALE};
use pairrank::pair_encoder::ScoreVector;
use pairrank::pair_trainer::{pair_loss, select_training_pairs, LossForm};
use pairrank::store::{make_half_split, merge_pools, read_pools, write_pools, CandidateRecord, Example, ScoredPool};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "the", "Cat", ",", "dog."]), 0..12)
        .prop_map(|w| w.join(" "))
}

fn scored_pool() -> impl Strategy<Value = ScoredPool> {
    (1usize..20, any::<u64>()).prop_flat_map(|(m, seed)| {
        prop::collection::vec(prop::collection::vec(0.0f64..1.0, m), MetricId::ALL.len())
            .prop_map(move |s| pool_with(&format!("p{seed}"), &MetricId::ALL, &s, "beam"))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pool_files_round_trip(pools in prop::collection::vec(scored_pool(), 0..5)) {
        let f = tempfile::NamedTempFile::new().unwrap();
        write_pools(f.path(), &pools).unwrap();
        prop_assert_eq!(read_pools(f.path()).unwrap(), pools);
    }

    #[test]
    fn half_split_partitions(n in 2usize..60, seed in any::<u64>()) {
        let ex: Vec<Example> = (0..n).map(|i| example(&i.to_string())).collect();
        let plan = make_half_split(&ex, seed).unwrap();
        prop_assert!(plan.half_a.len().abs_diff(plan.half_b.len()) <= 1);
        let mut all: Vec<String> = plan.half_a.iter().chain(&plan.half_b).cloned().collect();
        all.sort();
        let mut ids: Vec<String> = ex.iter().map(|e| e.id.clone()).collect();
        ids.sort();
        prop_assert_eq!(all, ids);
    }

    #[test]
    fn merged_length_is_sum(sizes in prop::collection::vec(1usize..10, 1..4)) {
        let ex = example("e");
        let parts: Vec<ScoredPool> = sizes
            .iter()
            .map(|&k| ScoredPool::new(&ex, (0..k).map(|i| CandidateRecord::unscored(format!("{i}"), "m")).collect()))
            .collect();
        prop_assert_eq!(merge_pools(&parts).unwrap().len(), sizes.iter().sum::<usize>());
    }

    #[test]
    fn metric_values_are_finite_and_in_range(c in ".*", r in ".*", c2 in text(), r2 in text()) {
        for (c, r) in [(c.as_str(), r.as_str()), (c2.as_str(), r2.as_str())] {
            for v in [rouge_n::<f64>(c, r, 1), rouge_n::<f64>(c, r, 2), rouge_l::<f64>(c, r), bleu::<f64>(c, &[r], 4).unwrap()] {
                prop_assert!(v.is_finite() && (0.0..=1.0 + 1e-12).contains(&v));
            }
            let v = cider::<f64>(&[(c, vec![r]), ("x", vec!["y"])]).unwrap()[0];
            prop_assert!(v.is_finite() && (0.0..=CIDER_SCALE + 1e-9).contains(&v));
        }
    }

    #[test]
    fn rouge1_recall_never_grows_when_tokens_are_removed(c in text(), r in text(), cut in any::<prop::sample::Index>()) {
        let words: Vec<&str> = c.split_whitespace().collect();
        prop_assume!(!words.is_empty());
        let i = cut.index(words.len());
        let shorter: Vec<&str> = words.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, w)| *w).collect();
        let full = rouge_n_recall::<f64>(&c, &r, 1);
        prop_assert!(rouge_n_recall::<f64>(&shorter.join(" "), &r, 1) <= full + 1e-15);
    }

    #[test]
    fn identity_is_maximal(words in prop::collection::vec(prop::sample::select(vec!["p", "q", "r", "s", "t"]), 4..12)) {
        let t = words.join(" ");
        prop_assert!((rouge_n::<f64>(&t, &t, 1) - 1.0).abs() < 1e-12);
        prop_assert!((rouge_n::<f64>(&t, &t, 2) - 1.0).abs() < 1e-12);
        prop_assert!((rouge_l::<f64>(&t, &t) - 1.0).abs() < 1e-12);
        prop_assert!((bleu::<f64>(&t, &[&t], 4).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_dominates_first_candidate(pool in scored_pool()) {
        for m in MetricId::ALL {
            let s = pool.metric_scores(m).unwrap();
            let o = oracle_select(&pool, m).unwrap();
            prop_assert!(s[o] >= s[0]);
            prop_assert!(s.iter().all(|&x| x <= s[o]));
            prop_assert!(s[..o].iter().all(|&x| x < s[o]));
        }
    }

    #[test]
    fn pair_labels_complement_and_loss_is_swap_invariant(
        pool in scored_pool(),
        seed in any::<u64>(),
        sa in prop::collection::vec(-8.0f64..8.0, 5),
        sb in prop::collection::vec(-8.0f64..8.0, 5),
    ) {
        prop_assume!(pool.len() >= 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = select_training_pairs(&pool, &MetricId::ALL, 1, &mut rng).unwrap().remove(0);
        for (a, b) in pair.labels.iter().zip(pair.labels_b()) {
            prop_assert!(*a != b);
        }
        let (va, vb) = (ScoreVector(sa), ScoreVector(sb));
        let l = pair_loss(&va, &vb, &pair.labels, LossForm::Symmetric).unwrap().loss;
        let swapped = pair.swapped();
        let l2 = pair_loss(&vb, &va, &swapped.labels, LossForm::Symmetric).unwrap().loss;
        prop_assert!(l > 0.0 && l.is_finite());
        prop_assert!((l - l2).abs() < 1e-12);
    }

    #[test]
    fn baseline_losses_are_non_negative(
        scores in prop::collection::vec(-1.0f64..1.0, 1..8),
        reference in -1.0f64..1.0,
        probs in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..8),
    ) {
        let quality: Vec<f64> = (0..scores.len()).rev().map(|x| x as f64).collect();
        let r = simcls_loss(&scores, &quality, reference, 0.01).unwrap();
        prop_assert!(r.loss >= 0.0);
        let best = vec![0, probs.len() - 1];
        let (l, _) = summareranker_loss(&probs, &best).unwrap();
        prop_assert!(l >= 0.0 && l.is_finite());
    }
}
