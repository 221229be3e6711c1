//! Seeded minibatch training of the toy classifier. The feature conv stays
//! frozen; only the attention branch and the classifier are updated.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{AttentionConfig, AttentionKind};
use crate::error::{Error, Result};
use crate::model::net::{backward, forward, loss, ForwardPass, FusionStage, Gradients, ModelParams};
use crate::model::synthetic::SyntheticSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptimizerKind {
    PlainGd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub fn adam_default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub attention: AttentionConfig,
    pub fusion: FusionStage,
    pub learning_rate: f64,
    /// Step-size multiplier for the attention branch. The branch has far more
    /// effective leverage per optimizer step than the classifier, so it runs
    /// slower; 1.0 ties the two together.
    pub attention_lr_scale: f64,
    pub optimizer: OptimizerKind,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(kind: AttentionKind) -> Self {
        TrainConfig {
            attention: AttentionConfig::new(kind),
            fusion: FusionStage::Early,
            learning_rate: 0.4,
            attention_lr_scale: 0.05,
            optimizer: OptimizerKind::adam_default(),
            steps: 200,
            batch_size: 64,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.attention.validate()?;
        // learning_rate == 0 is permitted: it must leave parameters unchanged
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be finite and >= 0".into()));
        }
        if !(self.attention_lr_scale >= 0.0 && self.attention_lr_scale.is_finite()) {
            return Err(Error::InvalidConfig("attention lr scale must be finite and >= 0".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Adam first/second moment state for one parameter group.
#[derive(Debug, Clone)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Moments {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

struct Optimizer {
    kind: OptimizerKind,
    /// Per-group step sizes, aligned with the group order passed to `apply`.
    group_rates: Vec<f64>,
    step: u64,
    moments: Vec<Moments>,
}

impl Optimizer {
    fn new(kind: OptimizerKind, group_rates: Vec<f64>, group_sizes: &[usize]) -> Self {
        debug_assert_eq!(group_rates.len(), group_sizes.len());
        Optimizer {
            kind,
            group_rates,
            step: 0,
            moments: group_sizes.iter().map(|&n| Moments::new(n)).collect(),
        }
    }

    fn apply(&mut self, groups: &mut [(&mut [f64], &[f64])]) {
        self.step += 1;
        match self.kind {
            OptimizerKind::PlainGd => {
                for ((params, grads), &rate) in groups.iter_mut().zip(&self.group_rates) {
                    for (p, &g) in params.iter_mut().zip(grads.iter()) {
                        *p -= rate * g;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, epsilon } => {
                let t = self.step as f64;
                let bc1 = 1.0 - beta1.powf(t);
                let bc2 = 1.0 - beta2.powf(t);
                for (((params, grads), state), &rate) in
                    groups.iter_mut().zip(&mut self.moments).zip(&self.group_rates)
                {
                    for i in 0..params.len() {
                        let g = grads[i];
                        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
                        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
                        let m_hat = state.m[i] / bc1;
                        let v_hat = state.v[i] / bc2;
                        params[i] -= rate * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
    }
}

/// One recorded training step (batch-mean losses).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub total_loss: f64,
    pub ce_loss: f64,
    pub kl_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub trace: Vec<TraceRow>,
    pub epoch_metrics: Vec<EpochMetrics>,
    /// Mean loss over the full training set before the first step.
    pub initial_loss: f64,
    /// Mean loss over the full training set after the last step.
    pub final_loss: f64,
}

/// Render the loss trace in the interchange CSV layout.
pub fn trace_to_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("step,total_loss,ce_loss,kl_loss\n");
    for row in trace {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.step, row.total_loss, row.ce_loss, row.kl_loss
        ));
    }
    out
}

pub fn forward_sample(
    params: &ModelParams,
    sample: &SyntheticSample,
    config: &TrainConfig,
) -> Result<ForwardPass> {
    forward(
        params,
        &sample.image,
        &config.attention,
        config.fusion,
        Some(&sample.gaze_density),
    )
}

/// Mean loss over a dataset with fixed parameters.
pub fn mean_loss(params: &ModelParams, dataset: &[SyntheticSample], config: &TrainConfig) -> Result<f64> {
    let mut total = 0.0;
    for sample in dataset {
        let pass = forward_sample(params, sample, config)?;
        total += loss(&pass, sample.label, &config.attention)?.total;
    }
    Ok(total / dataset.len() as f64)
}

fn dataset_accuracy(params: &ModelParams, dataset: &[SyntheticSample], config: &TrainConfig) -> Result<f64> {
    let mut correct = 0usize;
    for sample in dataset {
        let pass = forward_sample(params, sample, config)?;
        if pass.predicted_label() == sample.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

/// Number of feature channels D of the toy model.
pub const FEATURE_CHANNELS: usize = 8;

/// Train a fresh model on the dataset. Fully deterministic given
/// (seed, config, dataset): the parameter init, the batch order, and every
/// floating-point reduction are fixed.
pub fn train(dataset: &[SyntheticSample], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidValue("training dataset is empty".into()));
    }
    let in_channels = dataset[0].image.channels();
    let num_classes = dataset.iter().map(|s| s.label).max().unwrap() + 1;
    let mut params = ModelParams::init(in_channels, FEATURE_CHANNELS, num_classes.max(2), config.seed)?;
    let initial_loss = mean_loss(&params, dataset, config)?;
    let (trace, epoch_metrics) = train_from(&mut params, dataset, config)?;
    let final_loss = mean_loss(&params, dataset, config)?;
    Ok(TrainOutcome {
        params,
        trace,
        epoch_metrics,
        initial_loss,
        final_loss,
    })
}

/// Run the training steps in place, returning the loss trace and per-epoch
/// metrics. The frozen feature conv is bit-identical before and after.
pub fn train_from(
    params: &mut ModelParams,
    dataset: &[SyntheticSample],
    config: &TrainConfig,
) -> Result<(Vec<TraceRow>, Vec<EpochMetrics>)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidValue("training dataset is empty".into()));
    }
    let group_sizes = [
        params.attn_conv1.weights.len(),
        params.attn_conv1.bias.len(),
        params.attn_conv2.weights.len(),
        params.attn_conv2.bias.len(),
        params.classifier_weights.len(),
        params.classifier_bias.len(),
    ];
    let branch_rate = config.learning_rate * config.attention_lr_scale;
    let group_rates = vec![
        branch_rate,
        branch_rate,
        branch_rate,
        branch_rate,
        config.learning_rate,
        config.learning_rate,
    ];
    let mut optimizer = Optimizer::new(config.optimizer, group_rates, &group_sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1));

    let mut trace = Vec::with_capacity(config.steps);
    let mut epoch_metrics = Vec::new();
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    let mut step = 0usize;
    let mut epoch = 0usize;

    'training: loop {
        indices.shuffle(&mut rng);
        for batch in indices.chunks(config.batch_size) {
            if step >= config.steps {
                break 'training;
            }
            let mut grads: Option<Gradients> = None;
            let mut total = 0.0;
            let mut ce = 0.0;
            let mut kl = 0.0;
            for &i in batch {
                let sample = &dataset[i];
                let pass = forward_sample(params, sample, config)?;
                let parts = loss(&pass, sample.label, &config.attention)?;
                if !parts.total.is_finite() {
                    return Err(Error::Divergence { step });
                }
                total += parts.total;
                ce += parts.cross_entropy;
                kl += parts.kl;
                let g = backward(params, &pass, sample.label, &config.attention)?;
                match &mut grads {
                    Some(acc) => acc.accumulate(&g),
                    None => grads = Some(g),
                }
            }
            let n = batch.len() as f64;
            let mut grads = grads.expect("batch is nonempty");
            grads.scale(1.0 / n);

            // frozen feature conv: gradients computed, never applied
            optimizer.apply(&mut [
                (&mut params.attn_conv1.weights, &grads.attn1_w),
                (&mut params.attn_conv1.bias, &grads.attn1_b),
                (&mut params.attn_conv2.weights, &grads.attn2_w),
                (&mut params.attn_conv2.bias, &grads.attn2_b),
                (&mut params.classifier_weights, &grads.classifier_w),
                (&mut params.classifier_bias, &grads.classifier_b),
            ]);
            if params.validate().is_err() {
                return Err(Error::Divergence { step });
            }
            params.steps_trained += 1;

            trace.push(TraceRow {
                step,
                total_loss: total / n,
                ce_loss: ce / n,
                kl_loss: kl / n,
            });
            step += 1;
        }
        epoch_metrics.push(EpochMetrics {
            epoch,
            train_accuracy: dataset_accuracy(params, dataset, config)?,
        });
        epoch += 1;
    }
    Ok((trace, epoch_metrics))
}

