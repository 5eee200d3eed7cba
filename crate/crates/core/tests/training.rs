mod common;

use common::{synthetic_pools, tiny_arch, vocab_for};
use pairrank::baselines::{pointwise_gradient_check, train_pointwise, PoolSample};
use pairrank::checkpoint::RerankerKind;
use pairrank::decoding::DecodingConfig;
use pairrank::metrics::MetricId;
use pairrank::nn::OptimizerKind;
use pairrank::pair_encoder::ScoreVector;
use pairrank::pair_trainer::{gradient_check, pair_loss, select_training_pairs, train, LossForm, TrainConfig};
use pairrank::synthetic::SyntheticTask;
use pairrank::{PairReranker, PairRerankerF64, PointwiseReranker, PointwiseRerankerF64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const METRICS: [MetricId; 2] = [MetricId::Rouge1, MetricId::Bleu];

fn small_task(n: usize) -> SyntheticTask {
    SyntheticTask {
        num_train: n,
        num_val: 0,
        num_test: 10,
        seed: 5,
        ..Default::default()
    }
}

fn fast_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 8,
        max_learning_rate: 3e-3,
        optimizer: OptimizerKind::Adam,
        heldout_fraction: 0.1,
        seed: 9,
        ..Default::default()
    }
}

#[test]
fn zero_epochs_keep_initial_weights() {
    let (pools, _) = synthetic_pools(&small_task(20), &[DecodingConfig::beam(6)], &METRICS);
    let model = PairReranker::new(vocab_for(&pools), &tiny_arch(16), &METRICS, None, 1).unwrap();
    let out = train(model.clone(), &pools, &fast_config(0)).unwrap();
    assert_eq!(out.model.params, model.params);
    assert!(out.log.is_empty());
}

#[test]
fn seeded_training_is_reproducible_and_loss_falls() {
    let (pools, _) = synthetic_pools(&small_task(120), &[DecodingConfig::beam(8)], &METRICS);
    let run = || {
        let model = PairReranker::new(vocab_for(&pools), &tiny_arch(16), &METRICS, None, 2).unwrap();
        train(model, &pools, &fast_config(5)).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.epoch_losses, b.epoch_losses);
    assert_eq!(a.model.params, b.model.params);
    assert!(a.epoch_losses[4] < a.epoch_losses[0], "{:?}", a.epoch_losses);
}

#[test]
fn pair_loss_gradients_match_finite_differences() {
    let (pools, _) = synthetic_pools(&small_task(4), &[DecodingConfig::beam(6)], &METRICS);
    let model = PairRerankerF64::new(vocab_for(&pools), &tiny_arch(8), &METRICS, None, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let sample = select_training_pairs(&pools[0], &METRICS, 1, &mut rng).unwrap().remove(0);
    for form in [LossForm::Symmetric, LossForm::Printed] {
        let err = gradient_check(&model, &sample, form, 1e-4).unwrap();
        assert!(err < 1e-3, "{form:?}: {err}");
    }
    assert!(gradient_check(&model, &sample, LossForm::Symmetric, 0.0).is_err());
}

#[test]
fn saturated_correct_logits_have_vanishing_gradients() {
    let r = pair_loss(&ScoreVector(vec![40.0f64]), &ScoreVector(vec![-40.0]), &[true], LossForm::Symmetric).unwrap();
    assert!(r.loss < 1e-15);
    assert!(r.grad_a[0].abs() < 1e-15 && r.grad_b[0].abs() < 1e-15);
}

#[test]
fn baseline_gradients_match_finite_differences() {
    let (pools, _) = synthetic_pools(&small_task(4), &[DecodingConfig::beam(4)], &METRICS);
    let sample = PoolSample::from_pool(&pools[0], &METRICS).unwrap();
    for kind in [RerankerKind::SimCls, RerankerKind::SummaReranker] {
        let model = PointwiseRerankerF64::new(kind, vocab_for(&pools), &tiny_arch(8), &METRICS, None, 4).unwrap();
        let err = pointwise_gradient_check(&model, &sample, 0.01, 1e-5).unwrap();
        assert!(err < 1e-3, "{kind:?}: {err}");
    }
}

#[test]
fn baselines_train_and_round_trip_through_checkpoints() {
    let (pools, test) = synthetic_pools(&small_task(40), &[DecodingConfig::beam(6)], &METRICS);
    for kind in [RerankerKind::SimCls, RerankerKind::SummaReranker] {
        let model = PointwiseReranker::new(kind, vocab_for(&pools), &tiny_arch(16), &METRICS, None, 6).unwrap();
        let out = train_pointwise(model, &pools, &fast_config(2), 0.01, 0).unwrap();
        assert_eq!(out.epoch_losses.len(), 2);
        let ck = out.model.to_checkpoint();
        let back = PointwiseReranker::from_checkpoint(&ck).unwrap();
        assert_eq!(back.pool_scores(&test[0]).unwrap(), out.model.pool_scores(&test[0]).unwrap());
    }
}
