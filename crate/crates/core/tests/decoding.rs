use std::collections::HashSet;

use pairrank::decoding::{build_training_pools, generate_pools, DecodingConfig, DecodingMethod, LexicalConfig, LexicalGenerator};
use pairrank::store::{make_half_split, Example, Half};
use pairrank::synthetic::SyntheticTask;

#[test]
fn cross_half_generators_never_see_their_examples() {
    let s = SyntheticTask {
        num_train: 40,
        num_val: 0,
        num_test: 0,
        seed: 1,
        ..Default::default()
    }
    .generate();
    let plan = make_half_split(&s.train, 3).unwrap();
    let configs = DecodingConfig::all_methods(8);
    let (pools, prov) = build_training_pools(
        |half, members: &[Example]| {
            let ids: HashSet<&str> = members.iter().map(|e| e.id.as_str()).collect();
            let expected: HashSet<&str> = plan.half(half).iter().map(String::as_str).collect();
            assert_eq!(ids, expected);
            LexicalGenerator::train(members, LexicalConfig::default())
        },
        &s.train,
        &plan,
        &configs,
    )
    .unwrap();
    assert_eq!(pools.len(), 40);
    for (pool, p) in pools.iter().zip(&prov) {
        assert_eq!(pool.example_id, p.example_id);
        assert_eq!(pool.len(), 60);
        assert!(!plan.half(p.generator_half).contains(&p.example_id));
        for m in DecodingMethod::ALL {
            assert_eq!(pool.candidates.iter().filter(|c| c.method == m.name()).count(), 15);
        }
    }
    assert!(prov.iter().any(|p| p.generator_half == Half::A) && prov.iter().any(|p| p.generator_half == Half::B));
}

#[test]
fn trained_generator_is_deterministic_across_runs() {
    let s = SyntheticTask {
        num_train: 30,
        num_test: 5,
        seed: 2,
        ..Default::default()
    }
    .generate();
    let g = LexicalGenerator::train(&s.train, LexicalConfig::default()).unwrap();
    let configs = DecodingConfig::all_methods(3);
    assert_eq!(generate_pools(&g, &s.test, &configs).unwrap(), generate_pools(&g, &s.test, &configs).unwrap());
}
