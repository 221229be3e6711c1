//! FGSM perturbation generation against the toy model and fooling-rate
//! evaluation of each attention baseline.
//!
//! The attack is untargeted, single-step FGSM at the true label:
//! x' = clamp(x + eps * sign(dL/dx)). The perturbation is guaranteed to stay
//! inside the max-norm ball exactly: when rounding makes a cell overshoot by
//! an ulp it is pulled back.

use crate::attention::AttentionKind;
use crate::error::{Error, Result};
use crate::model::{backward, forward, ModelParams, TrainConfig};
use crate::model::{forward_sample, SyntheticSample};
use crate::task::{accuracy, fooling_rate, LabelPair};
use crate::tensor::{DensityMap, FeatureMap};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackConfig {
    /// Max-norm budget in input intensity units.
    pub epsilon: f64,
    /// Valid input intensity range; perturbed images are clamped into it.
    pub clamp_range: (f64, f64),
}

impl AttackConfig {
    pub fn new(epsilon: f64, clamp_range: (f64, f64)) -> Result<Self> {
        let cfg = AttackConfig { epsilon, clamp_range };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig("attack epsilon must be finite and >= 0".into()));
        }
        if !(self.clamp_range.0 < self.clamp_range.1) {
            return Err(Error::InvalidConfig("clamp range must be nondegenerate".into()));
        }
        Ok(())
    }
}

/// One ulp toward `target`.
fn next_toward(value: f64, target: f64) -> f64 {
    if value == target || value.is_nan() {
        return value;
    }
    if value == 0.0 {
        return if target > 0.0 { f64::from_bits(1) } else { -f64::from_bits(1) };
    }
    let bits = value.to_bits();
    let next_bits = if (value < target) == (value > 0.0) {
        bits + 1
    } else {
        bits - 1
    };
    f64::from_bits(next_bits)
}

fn signum_strict(g: f64) -> f64 {
    if g > 0.0 {
        1.0
    } else if g < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Perturbed image x' = clamp(x + eps * sign(dL/dx)) with |x' - x| <= eps
/// holding exactly at every cell. sign(0) = 0; eps = 0 returns the input
/// bit-identically.
pub fn fgsm_perturb(
    params: &ModelParams,
    image: &FeatureMap,
    label: usize,
    gaze: Option<&DensityMap>,
    model_cfg: &TrainConfig,
    attack: &AttackConfig,
) -> Result<FeatureMap> {
    attack.validate()?;
    if attack.epsilon == 0.0 {
        return Ok(image.clone());
    }
    let pass = forward(params, image, &model_cfg.attention, model_cfg.fusion, gaze)?;
    let grads = backward(params, &pass, label, &model_cfg.attention)?;

    let (lo, hi) = attack.clamp_range;
    let eps = attack.epsilon;
    let mut perturbed = image.clone();
    for (v, &g) in perturbed.values_mut().iter_mut().zip(grads.input.values()) {
        let x = *v;
        let mut y = x + eps * signum_strict(g);
        while (y - x).abs() > eps {
            y = next_toward(y, x);
        }
        *v = y.clamp(lo, hi);
    }
    Ok(perturbed)
}

pub fn fgsm_perturb_sample(
    params: &ModelParams,
    sample: &SyntheticSample,
    model_cfg: &TrainConfig,
    attack: &AttackConfig,
) -> Result<FeatureMap> {
    fgsm_perturb(
        params,
        &sample.image,
        sample.label,
        Some(&sample.gaze_density),
        model_cfg,
        attack,
    )
}

/// Robustness scores for one baseline.
#[derive(Debug, Clone)]
pub struct RobustnessRow {
    pub kind: AttentionKind,
    pub clean_accuracy: f64,
    pub fooling_rate: f64,
    pub pairs: Vec<LabelPair>,
}

/// Attack every test item for every trained baseline and report clean
/// accuracy plus the fooling rate. Untrained parameters are refused.
pub fn evaluate_robustness(
    models: &[(TrainConfig, ModelParams)],
    test_set: &[SyntheticSample],
    attack: &AttackConfig,
) -> Result<Vec<RobustnessRow>> {
    attack.validate()?;
    if test_set.is_empty() {
        return Err(Error::InvalidValue("robustness evaluation needs a nonempty test set".into()));
    }
    let mut rows = Vec::with_capacity(models.len());
    for (cfg, params) in models {
        if params.steps_trained == 0 {
            return Err(Error::UntrainedModel);
        }
        let mut pairs = Vec::with_capacity(test_set.len());
        let mut clean_pairs = Vec::with_capacity(test_set.len());
        for sample in test_set {
            let clean_pass = forward_sample(params, sample, cfg)?;
            let clean_label = clean_pass.predicted_label();
            let perturbed_image = fgsm_perturb_sample(params, sample, cfg, attack)?;
            let perturbed_pass = forward(
                params,
                &perturbed_image,
                &cfg.attention,
                cfg.fusion,
                Some(&sample.gaze_density),
            )?;
            clean_pairs.push((clean_label, sample.label));
            pairs.push(LabelPair {
                item_id: sample.id.clone(),
                clean_label,
                perturbed_label: Some(perturbed_pass.predicted_label()),
            });
        }
        rows.push(RobustnessRow {
            kind: cfg.attention.kind,
            clean_accuracy: accuracy(&clean_pairs)?,
            fooling_rate: fooling_rate(&pairs)?,
            pairs,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        generate_synthetic_task, loss, train, FusionStage, SyntheticTaskConfig,
    };

    fn setup() -> (Vec<SyntheticSample>, TrainConfig, ModelParams) {
        let data = generate_synthetic_task(&SyntheticTaskConfig::new(4, 10, 40, 5)).unwrap();
        let mut cfg = TrainConfig::new(AttentionKind::Sigmoid);
        cfg.steps = 30;
        cfg.batch_size = 16;
        let outcome = train(&data.samples, &cfg).unwrap();
        (data.samples, cfg, outcome.params)
    }

    #[test]
    fn zero_epsilon_returns_input_bit_identical() {
        let (samples, cfg, params) = setup();
        let attack = AttackConfig::new(0.0, (-3.0, 3.0)).unwrap();
        let x = fgsm_perturb_sample(&params, &samples[0], &cfg, &attack).unwrap();
        assert_eq!(x.values(), samples[0].image.values());
    }

    #[test]
    fn perturbation_max_norm_never_exceeds_epsilon() {
        let (samples, cfg, params) = setup();
        for eps in [1e-4, 0.01, 0.1, 0.37] {
            let attack = AttackConfig::new(eps, (-3.0, 3.0)).unwrap();
            for sample in samples.iter().take(10) {
                let x = fgsm_perturb_sample(&params, sample, &cfg, &attack).unwrap();
                for (a, b) in x.values().iter().zip(sample.image.values()) {
                    assert!((a - b).abs() <= eps, "|{a} - {b}| > {eps}");
                }
                // deterministic given (params, image, label, eps)
                let again = fgsm_perturb_sample(&params, sample, &cfg, &attack).unwrap();
                assert_eq!(x.values(), again.values());
            }
        }
    }

    #[test]
    fn perturbation_hits_epsilon_on_dyadic_inputs() {
        // dyadic intensities and epsilon make x + eps exact, so unclamped
        // cells with nonzero gradient move by exactly eps
        let (samples, cfg, params) = setup();
        let mut sample = samples[0].clone();
        for v in sample.image.values_mut() {
            *v = (*v * 256.0).round() / 256.0;
        }
        let eps = 1.0 / 512.0;
        let attack = AttackConfig::new(eps, (-3.0, 3.0)).unwrap();
        let pass = forward_sample(&params, &sample, &cfg).unwrap();
        let grads = backward(&params, &pass, sample.label, &cfg.attention).unwrap();
        let x = fgsm_perturb_sample(&params, &sample, &cfg, &attack).unwrap();
        let (lo, hi) = attack.clamp_range;
        for ((a, b), &g) in x.values().iter().zip(sample.image.values()).zip(grads.input.values()) {
            if g != 0.0 && *b - eps > lo && *b + eps < hi {
                assert_eq!((a - b).abs(), eps);
            }
        }
    }

    #[test]
    fn first_order_ascent_check() {
        let (samples, cfg, params) = setup();
        let attack = AttackConfig::new(1e-4, (-3.0, 3.0)).unwrap();
        let mut checked = 0usize;
        for sample in samples.iter().take(15) {
            let pass = forward_sample(&params, sample, &cfg).unwrap();
            let grads = backward(&params, &pass, sample.label, &cfg.attention).unwrap();
            let grad_l1: f64 = grads.input.values().iter().map(|g| g.abs()).sum();
            if grad_l1 < 1e-6 {
                continue;
            }
            let before = loss(&pass, sample.label, &cfg.attention).unwrap().total;
            let x = fgsm_perturb_sample(&params, sample, &cfg, &attack).unwrap();
            let after_pass =
                forward(&params, &x, &cfg.attention, cfg.fusion, Some(&sample.gaze_density)).unwrap();
            let after = loss(&after_pass, sample.label, &cfg.attention).unwrap().total;
            assert!(after >= before - 1e-9, "loss fell from {before} to {after}");
            checked += 1;
        }
        assert!(checked > 0, "no nonzero-gradient fixtures found");
    }

    #[test]
    fn one_cell_logistic_instance_matches_hand_computation() {
        // 1x1 input, 1 feature channel, 2 classes: the model reduces to
        // logits = (w2a, w2b) * relu(w1 * x + b1), a logistic pair whose
        // input gradient sign is sign((p0 - 1) * w1 * (w2a - w2b)) at label 0
        let mut params = ModelParams::init(1, 1, 2, 0).unwrap();
        params.feature_conv.weights = vec![0.0; 9];
        params.feature_conv.weights[4] = 2.0; // center tap
        params.feature_conv.bias = vec![0.5];
        params.classifier_weights = vec![1.5, -0.5];
        params.classifier_bias = vec![0.0, 0.0];

        let image = FeatureMap::new(1, 1, 1, vec![0.8]).unwrap();
        let mut cfg = TrainConfig::new(AttentionKind::ActivationPosthoc);
        cfg.fusion = FusionStage::Early;

        // hand evaluation: z = 2*0.8 + 0.5 = 2.1; logits = (3.15, -1.05);
        // p0 = 1/(1+exp(-4.2)); dL/dx at label 0 = (p0-1)*(w2a-w2b)*w1 < 0
        let pass = forward(&params, &image, &cfg.attention, cfg.fusion, None).unwrap();
        let grads = backward(&params, &pass, 0, &cfg.attention).unwrap();
        let p0 = 1.0 / (1.0 + (-4.2f64).exp());
        let hand = (p0 - 1.0) * (1.5 - (-0.5)) * 2.0;
        assert!((grads.input.values()[0] - hand).abs() < 1e-12);

        // gradient is negative, so FGSM moves the input down by eps
        params.steps_trained = 1;
        let attack = AttackConfig::new(0.25, (-3.0, 3.0)).unwrap();
        let x = fgsm_perturb(&params, &image, 0, None, &cfg, &attack).unwrap();
        assert_eq!(x.values()[0], 0.8 - 0.25);
    }

    #[test]
    fn robustness_refuses_untrained_and_zero_eps_never_fools() {
        let data = generate_synthetic_task(&SyntheticTaskConfig::new(4, 10, 24, 6)).unwrap();
        let cfg = TrainConfig::new(AttentionKind::Sigmoid);
        let untrained = ModelParams::init(1, 8, 4, 0).unwrap();
        let attack = AttackConfig::new(0.1, (-3.0, 3.0)).unwrap();
        assert!(matches!(
            evaluate_robustness(&[(cfg, untrained)], &data.samples, &attack),
            Err(Error::UntrainedModel)
        ));

        let mut cfg = TrainConfig::new(AttentionKind::Sigmoid);
        cfg.steps = 15;
        cfg.batch_size = 12;
        let outcome = train(&data.samples, &cfg).unwrap();
        let zero = AttackConfig::new(0.0, (-3.0, 3.0)).unwrap();
        let rows = evaluate_robustness(&[(cfg, outcome.params)], &data.samples, &zero).unwrap();
        assert_eq!(rows[0].fooling_rate, 0.0);
        assert_eq!(rows[0].pairs.len(), data.samples.len());
    }

    #[test]
    fn fooling_rate_matches_reclassification_recount() {
        let data = generate_synthetic_task(&SyntheticTaskConfig::new(4, 10, 32, 8)).unwrap();
        let mut cfg = TrainConfig::new(AttentionKind::Sigmoid);
        cfg.steps = 20;
        cfg.batch_size = 16;
        let outcome = train(&data.samples, &cfg).unwrap();
        let attack = AttackConfig::new(0.3, (-3.0, 3.0)).unwrap();
        let rows = evaluate_robustness(&[(cfg, outcome.params.clone())], &data.samples, &attack).unwrap();

        // independent recount: perturb and classify again, sample by sample
        let mut changed = 0usize;
        for sample in &data.samples {
            let clean = forward_sample(&outcome.params, sample, &cfg).unwrap().predicted_label();
            let x = fgsm_perturb_sample(&outcome.params, sample, &cfg, &attack).unwrap();
            let adv = forward(&outcome.params, &x, &cfg.attention, cfg.fusion, Some(&sample.gaze_density))
                .unwrap()
                .predicted_label();
            if clean != adv {
                changed += 1;
            }
        }
        assert_eq!(rows[0].fooling_rate, changed as f64 / data.samples.len() as f64);
    }
}
