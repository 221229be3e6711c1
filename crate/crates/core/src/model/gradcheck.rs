//! Central-finite-difference audit of the analytic gradients, over every
//! parameter group and the input image, for each attention baseline.

use crate::attention::AttentionKind;
use crate::error::Result;
use crate::model::net::{backward, forward, loss, ModelParams};
use crate::model::synthetic::{generate_synthetic_task, SyntheticSample, SyntheticTaskConfig};
use crate::model::train::{forward_sample, TrainConfig, FEATURE_CHANNELS};

pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GroupCheck {
    pub group: &'static str,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub kind: AttentionKind,
    pub groups: Vec<GroupCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn loss_at(params: &ModelParams, sample: &SyntheticSample, config: &TrainConfig) -> Result<f64> {
    let pass = forward_sample(params, sample, config)?;
    Ok(loss(&pass, sample.label, &config.attention)?.total)
}

/// Check one sample against central differences with step `h`. Each group's
/// entry is the worst relative error over its scalars.
pub fn gradient_check(
    params: &ModelParams,
    sample: &SyntheticSample,
    config: &TrainConfig,
    h: f64,
) -> Result<GradCheckReport> {
    let pass = forward(
        params,
        &sample.image,
        &config.attention,
        config.fusion,
        Some(&sample.gaze_density),
    )?;
    let analytic = backward(params, &pass, sample.label, &config.attention)?;

    let mut groups = Vec::new();
    // parameter groups, each probed by perturbing one scalar at a time
    let accessors: Vec<(&'static str, &[f64], fn(&mut ModelParams) -> &mut Vec<f64>)> = vec![
        ("feature_conv_w", &analytic.feature_conv_w, |p| &mut p.feature_conv.weights),
        ("feature_conv_b", &analytic.feature_conv_b, |p| &mut p.feature_conv.bias),
        ("attn_conv1_w", &analytic.attn1_w, |p| &mut p.attn_conv1.weights),
        ("attn_conv1_b", &analytic.attn1_b, |p| &mut p.attn_conv1.bias),
        ("attn_conv2_w", &analytic.attn2_w, |p| &mut p.attn_conv2.weights),
        ("attn_conv2_b", &analytic.attn2_b, |p| &mut p.attn_conv2.bias),
        ("classifier_w", &analytic.classifier_w, |p| &mut p.classifier_weights),
        ("classifier_b", &analytic.classifier_b, |p| &mut p.classifier_bias),
    ];

    for (name, analytic_grad, access) in accessors {
        let mut worst = 0.0f64;
        for i in 0..analytic_grad.len() {
            let mut plus = params.clone();
            access(&mut plus)[i] += h;
            let mut minus = params.clone();
            access(&mut minus)[i] -= h;
            let numeric = (loss_at(&plus, sample, config)? - loss_at(&minus, sample, config)?) / (2.0 * h);
            worst = worst.max(rel_error(analytic_grad[i], numeric));
        }
        groups.push(GroupCheck {
            group: name,
            max_rel_error: worst,
        });
    }

    // input image
    let mut worst = 0.0f64;
    for i in 0..sample.image.values().len() {
        let mut plus = sample.clone();
        plus.image.values_mut()[i] += h;
        let mut minus = sample.clone();
        minus.image.values_mut()[i] -= h;
        let numeric = (loss_at(params, &plus, config)? - loss_at(params, &minus, config)?) / (2.0 * h);
        worst = worst.max(rel_error(analytic.input.values()[i], numeric));
    }
    groups.push(GroupCheck {
        group: "input",
        max_rel_error: worst,
    });

    Ok(GradCheckReport {
        kind: config.attention.kind,
        groups,
    })
}

/// Run the audit: `num_samples` seeded samples through every baseline,
/// reporting each baseline's worst per-group error.
///
/// The classifier is randomized (training initializes it at zero, which
/// would zero out every upstream gradient and make the audit vacuous).
pub fn gradcheck_audit(seed: u64, num_samples: usize) -> Result<Vec<GradCheckReport>> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    let data = generate_synthetic_task(&SyntheticTaskConfig::new(4, 10, num_samples, seed))?;
    let mut reports = Vec::new();
    for kind in AttentionKind::ALL {
        let mut config = TrainConfig::new(kind);
        config.seed = seed;
        let mut params =
            ModelParams::init(data.in_channels, FEATURE_CHANNELS, data.num_classes, seed ^ 0xabcd)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let weight_dist = Normal::new(0.0, 0.7).expect("valid std");
        let bias_dist = Normal::new(0.0, 0.2).expect("valid std");
        for w in &mut params.classifier_weights {
            *w = weight_dist.sample(&mut rng);
        }
        for b in &mut params.classifier_bias {
            *b = bias_dist.sample(&mut rng);
        }
        let mut merged: Option<GradCheckReport> = None;
        for sample in &data.samples {
            let report = gradient_check(&params, sample, &config, DEFAULT_STEP)?;
            merged = Some(match merged {
                None => report,
                Some(mut acc) => {
                    for (g, r) in acc.groups.iter_mut().zip(&report.groups) {
                        g.max_rel_error = g.max_rel_error.max(r.max_rel_error);
                    }
                    acc
                }
            });
        }
        reports.push(merged.expect("num_samples >= 1"));
    }
    Ok(reports)
}
