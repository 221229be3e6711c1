//! A minimal differentiable attentive classifier with hand-derived gradients,
//! supporting all five attention baselines, so training, gaze supervision,
//! and FGSM attacks run end to end at desk scale.

mod checkpoint;
mod gradcheck;
mod net;
mod synthetic;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use gradcheck::{gradcheck_audit, gradient_check, GradCheckReport, GroupCheck, DEFAULT_STEP};
pub use net::{
    backward, forward, loss, Conv2d, ForwardPass, FusionStage, Gradients, LossParts, ModelParams,
    PROBABILITY_FLOOR,
};
pub use synthetic::{
    generate_synthetic_task, SyntheticDataset, SyntheticSample, SyntheticTaskConfig, MAX_CLASSES,
};
pub use train::{
    forward_sample, mean_loss, trace_to_csv, train, train_from, EpochMetrics, OptimizerKind,
    TraceRow, TrainConfig, TrainOutcome, FEATURE_CHANNELS,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::{AttentionConfig, AttentionKind};
    use crate::tensor::{DensityMap, FeatureMap, ScalarMap};

    fn toy_params(seed: u64) -> ModelParams {
        ModelParams::init(1, 8, 4, seed).unwrap()
    }

    fn toy_image(seed: u64) -> FeatureMap {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        FeatureMap::new(10, 10, 1, (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_branch_weights_give_half_attention_under_sigmoid() {
        let mut params = toy_params(1);
        for w in params.attn_conv1.weights.iter_mut().chain(&mut params.attn_conv1.bias) {
            *w = 0.0;
        }
        for w in params.attn_conv2.weights.iter_mut().chain(&mut params.attn_conv2.bias) {
            *w = 0.0;
        }
        let cfg = AttentionConfig::new(AttentionKind::Sigmoid);
        let pass = forward(&params, &toy_image(2), &cfg, FusionStage::Early, None).unwrap();
        let a = pass.attention_map().unwrap();
        assert!(a.grid().values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn uniform_human_attention_equals_no_attention_logits() {
        let params = toy_params(3);
        let image = toy_image(4);
        let uniform = DensityMap::from_values(10, 10, vec![0.7; 100]).unwrap();
        let human = forward(
            &params,
            &image,
            &AttentionConfig::new(AttentionKind::Human),
            FusionStage::Early,
            Some(&uniform),
        )
        .unwrap();
        let plain = forward(
            &params,
            &image,
            &AttentionConfig::new(AttentionKind::ActivationPosthoc),
            FusionStage::Early,
            None,
        )
        .unwrap();
        for (a, b) in human.logits().iter().zip(plain.logits()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn class_probs_sum_to_one() {
        let params = toy_params(5);
        let cfg = AttentionConfig::new(AttentionKind::Softmax);
        for fusion in [FusionStage::Early, FusionStage::Late] {
            let pass = forward(&params, &toy_image(6), &cfg, fusion, None).unwrap();
            let total: f64 = pass.class_probs().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn human_baseline_requires_gaze() {
        let params = toy_params(7);
        let cfg = AttentionConfig::new(AttentionKind::Human);
        assert!(forward(&params, &toy_image(8), &cfg, FusionStage::Early, None).is_err());
    }

    #[test]
    fn loss_hand_cases() {
        let data = generate_synthetic_task(&SyntheticTaskConfig::new(4, 10, 3, 11)).unwrap();
        let params = toy_params(9);
        let config = TrainConfig::new(AttentionKind::Sigmoid);
        let pass = forward_sample(&params, &data.samples[0], &config).unwrap();
        let parts = loss(&pass, data.samples[0].label, &config.attention).unwrap();
        // zero-initialized classifier: uniform probabilities over 4 classes
        assert!((parts.cross_entropy - 4.0f64.ln()).abs() < 1e-12);
        assert_eq!(parts.kl, 0.0);
        assert_eq!(parts.total, parts.cross_entropy);
    }

    #[test]
    fn supervised_loss_includes_weighted_kl() {
        let data = generate_synthetic_task(&SyntheticTaskConfig::new(4, 10, 1, 13)).unwrap();
        let params = toy_params(10);
        let config = TrainConfig::new(AttentionKind::Supervised);
        let pass = forward_sample(&params, &data.samples[0], &config).unwrap();
        let parts = loss(&pass, data.samples[0].label, &config.attention).unwrap();
        assert!(parts.kl > 0.0);
        assert_eq!(parts.kl_weight, 0.01);
        assert!((parts.total - (parts.cross_entropy + 0.01 * parts.kl)).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let reports = gradcheck_audit(0, 2).unwrap();
        for report in &reports {
            for group in &report.groups {
                assert!(
                    group.max_rel_error < 1e-4,
                    "{} {} rel error {}",
                    report.kind,
                    group.group,
                    group.max_rel_error
                );
            }
        }
    }

    #[test]
    fn gradients_hold_on_non_square_grids() {
        use crate::gaze::FixationSet;
        use rand::{Rng, SeedableRng};
        let (h, w) = (5, 9); // odd width exercises the edge pooling windows
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        let image = FeatureMap::new(h, w, 2, (0..h * w * 2).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let density =
            DensityMap::from_values(h, w, (0..h * w).map(|_| rng.gen_range(0.1..1.0)).collect()).unwrap();
        let sample = SyntheticSample {
            id: "rect".into(),
            image,
            label: 2,
            gaze_density: density,
            gaze_fixations: FixationSet::new("rect", vec![(0, 0)], h, w).unwrap(),
            patch_origin: None,
        };
        let mut params = ModelParams::init(2, 8, 4, 33).unwrap();
        for v in &mut params.classifier_weights {
            *v = rng.gen_range(-1.0..1.0);
        }
        for kind in [AttentionKind::Supervised, AttentionKind::Softmax, AttentionKind::Human] {
            for fusion in [FusionStage::Early, FusionStage::Late] {
                let mut config = TrainConfig::new(kind);
                config.fusion = fusion;
                let report = gradient_check(&params, &sample, &config, DEFAULT_STEP).unwrap();
                for group in &report.groups {
                    assert!(
                        group.max_rel_error < 1e-4,
                        "{kind} {fusion:?} {}: rel error {}",
                        group.group,
                        group.max_rel_error
                    );
                }
            }
        }
    }

    #[test]
    fn frozen_params_stay_bit_identical_and_lambda_zero_kills_kl_gradient() {
        let data = generate_synthetic_task(&SyntheticTaskConfig::new(4, 10, 24, 17)).unwrap();
        let mut config = TrainConfig::new(AttentionKind::Supervised);
        config.steps = 10;
        config.batch_size = 8;
        let outcome = train(&data.samples, &config).unwrap();
        let fresh = ModelParams::init(data.in_channels, FEATURE_CHANNELS, data.num_classes, config.seed).unwrap();
        assert_eq!(outcome.params.feature_conv, fresh.feature_conv);
        assert_eq!(outcome.params.steps_trained, 10);

        // with zero supervision weight the KL gradient contribution vanishes
        let mut cfg_zero = TrainConfig::new(AttentionKind::Supervised);
        cfg_zero.attention.supervision_weight = 0.0;
        let params = toy_params(21);
        let sample = &data.samples[0];
        let pass_zero = forward_sample(&params, sample, &cfg_zero).unwrap();
        let g_zero = backward(&params, &pass_zero, sample.label, &cfg_zero.attention).unwrap();
        let cfg_sig = TrainConfig::new(AttentionKind::Sigmoid);
        let pass_sig = forward_sample(&params, sample, &cfg_sig).unwrap();
        let g_sig = backward(&params, &pass_sig, sample.label, &cfg_sig.attention).unwrap();
        assert_eq!(g_zero.attn1_w, g_sig.attn1_w);
        assert_eq!(g_zero.classifier_w, g_sig.classifier_w);
    }

    #[test]
    fn exploding_learning_rate_aborts_with_divergence() {
        use crate::error::Error;
        let data = generate_synthetic_task(&SyntheticTaskConfig::new(4, 10, 16, 29)).unwrap();
        let mut config = TrainConfig::new(AttentionKind::Sigmoid);
        config.optimizer = OptimizerKind::PlainGd;
        config.learning_rate = 1e300;
        config.steps = 5;
        assert!(matches!(
            train(&data.samples, &config),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn zero_learning_rate_leaves_params_unchanged() {
        let data = generate_synthetic_task(&SyntheticTaskConfig::new(4, 10, 16, 19)).unwrap();
        let mut config = TrainConfig::new(AttentionKind::Sigmoid);
        config.learning_rate = 0.0;
        config.steps = 5;
        let outcome = train(&data.samples, &config).unwrap();
        let fresh = ModelParams::init(data.in_channels, FEATURE_CHANNELS, data.num_classes, config.seed).unwrap();
        assert_eq!(outcome.params.attn_conv1, fresh.attn_conv1);
        assert_eq!(outcome.params.classifier_weights, fresh.classifier_weights);
        let first = outcome.trace.first().unwrap().total_loss;
        assert!(outcome.trace.iter().all(|r| (r.total_loss - first).abs() < 1e-9));
    }

    #[test]
    fn training_is_deterministic_given_seed() {
        let data = generate_synthetic_task(&SyntheticTaskConfig::new(4, 10, 32, 23)).unwrap();
        let mut config = TrainConfig::new(AttentionKind::Sigmoid);
        config.steps = 12;
        let a = train(&data.samples, &config).unwrap();
        let b = train(&data.samples, &config).unwrap();
        assert_eq!(a.params, b.params);
        let ta: Vec<f64> = a.trace.iter().map(|r| r.total_loss).collect();
        let tb: Vec<f64> = b.trace.iter().map(|r| r.total_loss).collect();
        assert_eq!(ta, tb);
    }

    #[test]
    fn short_training_reduces_loss() {
        let data = generate_synthetic_task(&SyntheticTaskConfig::new(4, 12, 96, 0)).unwrap();
        let mut config = TrainConfig::new(AttentionKind::Sigmoid);
        config.steps = 60;
        let outcome = train(&data.samples, &config).unwrap();
        assert!(
            outcome.final_loss < 0.5 * outcome.initial_loss,
            "final {} vs initial {}",
            outcome.final_loss,
            outcome.initial_loss
        );
    }

    #[test]
    fn trace_csv_layout() {
        let trace = vec![TraceRow {
            step: 0,
            total_loss: 1.5,
            ce_loss: 1.25,
            kl_loss: 25.0,
        }];
        assert_eq!(trace_to_csv(&trace), "step,total_loss,ce_loss,kl_loss\n0,1.5,1.25,25\n");
    }
}
