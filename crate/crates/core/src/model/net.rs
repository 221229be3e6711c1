//! Forward and backward passes of the toy attentive classifier.
//!
//! Pipeline: frozen 3x3 feature conv + ReLU -> (early attention) -> 2x2
//! average pooling -> (late attention) -> spatial mean pooling -> linear
//! classifier -> softmax. The attention branch is Conv(3x3, D/2) -> ReLU ->
//! Conv(1x1, 1) followed by a sigmoid or spatial softmax, matching the
//! baselines in [`crate::attention`]. All gradients are derived by hand,
//! including the gradient with respect to the input image, which the FGSM
//! attack consumes.

use serde::{Deserialize, Serialize};

use crate::attention::{
    activation_attention, distribution_shift, human_attention, normalize_to_unit,
    normalize_with_shift, sigmoid_attention, softmax_attention, AttentionConfig, AttentionKind,
};
use crate::error::{Error, Result};
use crate::tensor::{AttentionMap, DensityMap, FeatureMap, Grid, SignificanceMap};

pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Where the attention module sits in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FusionStage {
    /// Attention applied to the feature map right after the feature conv.
    Early,
    /// Attention applied after the 2x2 average-pooling stage.
    Late,
}

impl FusionStage {
    pub fn name(&self) -> &'static str {
        match self {
            FusionStage::Early => "early",
            FusionStage::Late => "late",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "early" => Ok(FusionStage::Early),
            "late" => Ok(FusionStage::Late),
            other => Err(Error::InvalidConfig(format!(
                "unknown fusion stage {other:?}; expected early or late"
            ))),
        }
    }
}

/// A plain 2-D convolution with square odd kernel and zero padding that
/// preserves spatial dims.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Conv2d {
            in_channels,
            out_channels,
            kernel,
            weights: vec![0.0; out_channels * in_channels * kernel * kernel],
            bias: vec![0.0; out_channels],
        }
    }

    #[inline]
    fn widx(&self, o: usize, i: usize, kr: usize, kc: usize) -> usize {
        ((o * self.in_channels + i) * self.kernel + kr) * self.kernel + kc
    }

    pub fn forward(&self, x: &FeatureMap) -> FeatureMap {
        debug_assert_eq!(x.channels(), self.in_channels);
        let (h, w) = x.spatial_dims();
        let pad = self.kernel / 2;
        let mut out = FeatureMap::zeros(h, w, self.out_channels);
        for r in 0..h {
            for c in 0..w {
                for o in 0..self.out_channels {
                    let mut acc = self.bias[o];
                    for kr in 0..self.kernel {
                        let rr = r + kr;
                        if rr < pad || rr - pad >= h {
                            continue;
                        }
                        for kc in 0..self.kernel {
                            let cc = c + kc;
                            if cc < pad || cc - pad >= w {
                                continue;
                            }
                            for i in 0..self.in_channels {
                                acc += self.weights[self.widx(o, i, kr, kc)]
                                    * x.at(rr - pad, cc - pad, i);
                            }
                        }
                    }
                    out.set(r, c, o, acc);
                }
            }
        }
        out
    }

    /// Returns (grad_weights, grad_bias, grad_input).
    pub fn backward(&self, x: &FeatureMap, grad_out: &FeatureMap) -> (Vec<f64>, Vec<f64>, FeatureMap) {
        let (h, w) = x.spatial_dims();
        let pad = self.kernel / 2;
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = vec![0.0; self.bias.len()];
        let mut gx = FeatureMap::zeros(h, w, self.in_channels);
        for r in 0..h {
            for c in 0..w {
                for o in 0..self.out_channels {
                    let g = grad_out.at(r, c, o);
                    if g == 0.0 {
                        continue;
                    }
                    gb[o] += g;
                    for kr in 0..self.kernel {
                        let rr = r + kr;
                        if rr < pad || rr - pad >= h {
                            continue;
                        }
                        for kc in 0..self.kernel {
                            let cc = c + kc;
                            if cc < pad || cc - pad >= w {
                                continue;
                            }
                            for i in 0..self.in_channels {
                                let xi = x.at(rr - pad, cc - pad, i);
                                gw[self.widx(o, i, kr, kc)] += g * xi;
                                let gxi = gx.at(rr - pad, cc - pad, i)
                                    + g * self.weights[self.widx(o, i, kr, kc)];
                                gx.set(rr - pad, cc - pad, i, gxi);
                            }
                        }
                    }
                }
            }
        }
        (gw, gb, gx)
    }
}

fn relu(x: &FeatureMap) -> FeatureMap {
    let mut out = x.clone();
    for v in out.values_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

fn relu_backward(pre: &FeatureMap, grad: &FeatureMap) -> FeatureMap {
    let mut out = grad.clone();
    for (g, &p) in out.values_mut().iter_mut().zip(pre.values()) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
    out
}

fn avgpool2(x: &FeatureMap) -> FeatureMap {
    let (h, w) = x.spatial_dims();
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = FeatureMap::zeros(oh, ow, x.channels());
    for r in 0..oh {
        for c in 0..ow {
            let rows = (2 * r)..(2 * r + 2).min(h);
            let cols = (2 * c)..(2 * c + 2).min(w);
            let count = (rows.len() * cols.len()) as f64;
            for d in 0..x.channels() {
                let mut acc = 0.0;
                for rr in rows.clone() {
                    for cc in cols.clone() {
                        acc += x.at(rr, cc, d);
                    }
                }
                out.set(r, c, d, acc / count);
            }
        }
    }
    out
}

fn avgpool2_backward(input_dims: (usize, usize, usize), grad_out: &FeatureMap) -> FeatureMap {
    let (h, w, channels) = input_dims;
    let mut gx = FeatureMap::zeros(h, w, channels);
    for r in 0..grad_out.height() {
        for c in 0..grad_out.width() {
            let rows = (2 * r)..(2 * r + 2).min(h);
            let cols = (2 * c)..(2 * c + 2).min(w);
            let count = (rows.len() * cols.len()) as f64;
            for d in 0..channels {
                let g = grad_out.at(r, c, d) / count;
                for rr in rows.clone() {
                    for cc in cols.clone() {
                        gx.set(rr, cc, d, gx.at(rr, cc, d) + g);
                    }
                }
            }
        }
    }
    gx
}

/// All model parameters. The feature conv is frozen: its gradient is computed
/// (the input gradient flows through it) but updates never touch it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub feature_conv: Conv2d,
    pub attn_conv1: Conv2d,
    pub attn_conv2: Conv2d,
    /// D x num_classes, row-major by (feature, class).
    pub classifier_weights: Vec<f64>,
    pub classifier_bias: Vec<f64>,
    pub in_channels: usize,
    pub feature_channels: usize,
    pub num_classes: usize,
    pub steps_trained: u64,
}

impl ModelParams {
    pub fn init(in_channels: usize, feature_channels: usize, num_classes: usize, seed: u64) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidConfig("need at least 2 classes".into()));
        }
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let hidden = (feature_channels / 2).max(1);

        let mut feature_conv = Conv2d::zeros(in_channels, feature_channels, 3);
        let std_f = (2.0 / (9.0 * in_channels as f64)).sqrt();
        let dist_f = Normal::new(0.0, std_f).expect("valid std");
        for w in &mut feature_conv.weights {
            *w = dist_f.sample(&mut rng);
        }
        let bias_dist = Normal::new(0.0, 0.05).expect("valid std");
        for b in &mut feature_conv.bias {
            *b = bias_dist.sample(&mut rng);
        }

        let mut attn_conv1 = Conv2d::zeros(feature_channels, hidden, 3);
        let std_1 = (2.0 / (9.0 * feature_channels as f64)).sqrt();
        let dist_1 = Normal::new(0.0, std_1).expect("valid std");
        for w in &mut attn_conv1.weights {
            *w = dist_1.sample(&mut rng);
        }

        let mut attn_conv2 = Conv2d::zeros(hidden, 1, 1);
        let dist_2 = Normal::new(0.0, (1.0 / hidden as f64).sqrt()).expect("valid std");
        for w in &mut attn_conv2.weights {
            *w = dist_2.sample(&mut rng);
        }
        // open-gate init: start sigmoid attention near 0.8 so early noise in
        // the classifier cannot push the gates into the zero-attention
        // absorbing state
        attn_conv2.bias[0] = 1.5;

        Ok(ModelParams {
            feature_conv,
            attn_conv1,
            attn_conv2,
            classifier_weights: vec![0.0; feature_channels * num_classes],
            classifier_bias: vec![0.0; num_classes],
            in_channels,
            feature_channels,
            num_classes,
            steps_trained: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = self
            .feature_conv
            .weights
            .iter()
            .chain(&self.feature_conv.bias)
            .chain(&self.attn_conv1.weights)
            .chain(&self.attn_conv1.bias)
            .chain(&self.attn_conv2.weights)
            .chain(&self.attn_conv2.bias)
            .chain(&self.classifier_weights)
            .chain(&self.classifier_bias)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidValue("model parameters contain non-finite values".into()));
        }
        Ok(())
    }
}

/// One attention stage's cached forward values.
#[derive(Debug, Clone)]
pub(crate) struct AttnStage {
    pub input: FeatureMap,
    pub h1pre: Option<FeatureMap>,
    pub h1: Option<FeatureMap>,
    pub attention: Grid,
    /// Whether gradients flow through the attention branch.
    pub learned: bool,
}

/// Cached intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub(crate) input: FeatureMap,
    pub(crate) zpre: FeatureMap,
    pub(crate) z: FeatureMap,
    pub(crate) stage: Option<AttnStage>,
    pub(crate) fusion: FusionStage,
    pub(crate) g_early: FeatureMap,
    pub(crate) h_final: FeatureMap,
    pub(crate) pooled: Vec<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
    /// Gaze density resampled to the attention-stage dims (supervised/human).
    pub(crate) gaze_at_stage: Option<Grid>,
    /// Post-hoc analysis map for the activation baseline.
    posthoc: Option<AttentionMap>,
}

impl ForwardPass {
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn class_probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn predicted_label(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn feature_map(&self) -> &FeatureMap {
        &self.z
    }

    /// The attention map used by the pass, or the post-hoc activation map for
    /// the activation baseline.
    pub fn attention_map(&self) -> Option<AttentionMap> {
        if let Some(stage) = &self.stage {
            AttentionMap::new(stage.attention.clone()).ok()
        } else {
            self.posthoc.clone()
        }
    }
}

fn softmax_vec(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn attention_branch(params: &ModelParams, input: &FeatureMap, kind: AttentionKind) -> (FeatureMap, FeatureMap, Grid) {
    let h1pre = params.attn_conv1.forward(input);
    let h1 = relu(&h1pre);
    let ypre = params.attn_conv2.forward(&h1);
    let y = SignificanceMap::new(ypre.channel(0)).expect("finite branch output");
    let a = match kind {
        AttentionKind::Softmax => softmax_attention(&y),
        _ => sigmoid_attention(&y),
    };
    (h1pre, h1, a.into_grid())
}

fn apply_attention_grid(x: &FeatureMap, a: &Grid) -> FeatureMap {
    let mut g = x.clone();
    for r in 0..x.height() {
        for c in 0..x.width() {
            let w = a.at(r, c);
            for d in 0..x.channels() {
                g.set(r, c, d, w * x.at(r, c, d));
            }
        }
    }
    g
}

/// Run the model on one image. `gaze` is required for the human baseline (it
/// becomes the attention map) and the supervised baseline (it is the KL
/// target); it is ignored otherwise.
pub fn forward(
    params: &ModelParams,
    image: &FeatureMap,
    cfg: &AttentionConfig,
    fusion: FusionStage,
    gaze: Option<&DensityMap>,
) -> Result<ForwardPass> {
    cfg.validate()?;
    if image.channels() != params.in_channels {
        return Err(Error::shape(
            "model forward",
            format!("{} input channels", params.in_channels),
            format!("{}", image.channels()),
        ));
    }
    if cfg.kind.needs_gaze() && gaze.is_none() {
        return Err(Error::InvalidConfig(format!(
            "the {} baseline requires a gaze density at evaluation time",
            cfg.kind
        )));
    }

    let zpre = params.feature_conv.forward(image);
    let z = relu(&zpre);

    let build_stage = |input: &FeatureMap| -> Result<Option<AttnStage>> {
        match cfg.kind {
            AttentionKind::ActivationPosthoc => Ok(None),
            AttentionKind::Human => {
                let (h, w) = input.spatial_dims();
                let human = human_attention(gaze.expect("checked above"), h, w)?;
                Ok(Some(AttnStage {
                    input: input.clone(),
                    h1pre: None,
                    h1: None,
                    attention: human.map.into_grid(),
                    learned: false,
                }))
            }
            _ => {
                let (h1pre, h1, attention) = attention_branch(params, input, cfg.kind);
                Ok(Some(AttnStage {
                    input: input.clone(),
                    h1pre: Some(h1pre),
                    h1: Some(h1),
                    attention,
                    learned: true,
                }))
            }
        }
    };

    let (stage_early, g_early) = match fusion {
        FusionStage::Early => {
            let stage = build_stage(&z)?;
            let g = match &stage {
                Some(s) => apply_attention_grid(&z, &s.attention),
                None => z.clone(),
            };
            (stage, g)
        }
        FusionStage::Late => (None, z.clone()),
    };

    let pooled_stage = avgpool2(&g_early);

    let (stage_late, h_final) = match fusion {
        FusionStage::Late => {
            let stage = build_stage(&pooled_stage)?;
            let h = match &stage {
                Some(s) => apply_attention_grid(&pooled_stage, &s.attention),
                None => pooled_stage.clone(),
            };
            (stage, h)
        }
        FusionStage::Early => (None, pooled_stage.clone()),
    };

    let stage = match fusion {
        FusionStage::Early => stage_early,
        FusionStage::Late => stage_late,
    };

    // spatial mean pooling per channel
    let (fh, fw) = h_final.spatial_dims();
    let cells = (fh * fw) as f64;
    let mut pooled = vec![0.0; params.feature_channels];
    for r in 0..fh {
        for c in 0..fw {
            for (d, p) in pooled.iter_mut().enumerate() {
                *p += h_final.at(r, c, d);
            }
        }
    }
    for p in &mut pooled {
        *p /= cells;
    }

    let mut logits = vec![0.0; params.num_classes];
    for (k, logit) in logits.iter_mut().enumerate() {
        let mut acc = params.classifier_bias[k];
        for (d, &p) in pooled.iter().enumerate() {
            acc += p * params.classifier_weights[d * params.num_classes + k];
        }
        *logit = acc;
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue("forward produced non-finite logits".into()));
    }
    let probs = softmax_vec(&logits);

    let gaze_at_stage = match (cfg.kind, gaze) {
        (AttentionKind::Supervised, Some(d)) | (AttentionKind::Human, Some(d)) => {
            let dims = stage.as_ref().map(|s| (s.attention.height(), s.attention.width()));
            match dims {
                Some((h, w)) => Some(d.resampled(h, w)?.into_grid()),
                None => None,
            }
        }
        _ => None,
    };

    let posthoc = if cfg.kind == AttentionKind::ActivationPosthoc {
        let source = match fusion {
            FusionStage::Early => &z,
            FusionStage::Late => &pooled_stage,
        };
        let raw = activation_attention(source, cfg.activation_exponent)?;
        Some(normalize_to_unit(&raw)?)
    } else {
        None
    };

    Ok(ForwardPass {
        input: image.clone(),
        zpre,
        z,
        stage,
        fusion,
        g_early,
        h_final,
        pooled,
        logits,
        probs,
        gaze_at_stage,
        posthoc,
    })
}

/// Loss terms for one sample: total = cross-entropy + weight * KL.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub cross_entropy: f64,
    pub kl: f64,
    pub kl_weight: f64,
}

/// KL(p || q) between the normalized gaze density p and attention map q,
/// with the same conditional epsilon shift used by
/// [`crate::attention::attention_kl_loss`].
fn kl_from_grids(attention: &Grid, gaze: &Grid, eps: f64) -> f64 {
    let shift = distribution_shift(attention.values(), gaze.values(), eps);
    let q = normalize_with_shift(attention.values(), shift);
    let p = normalize_with_shift(gaze.values(), shift);
    let mut kl = 0.0;
    for (pi, qi) in p.iter().zip(&q) {
        if *pi > 0.0 {
            kl += pi * (pi / qi).ln();
        }
    }
    kl.max(0.0)
}

pub fn loss(pass: &ForwardPass, label: usize, cfg: &AttentionConfig) -> Result<LossParts> {
    if label >= pass.probs.len() {
        return Err(Error::InvalidValue(format!(
            "label {label} out of range for {} classes",
            pass.probs.len()
        )));
    }
    let cross_entropy = -(pass.probs[label].max(PROBABILITY_FLOOR)).ln();
    let (kl, kl_weight) = if cfg.kind == AttentionKind::Supervised && cfg.supervision_weight > 0.0 {
        let stage = pass
            .stage
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("supervised baseline has no attention stage".into()))?;
        let gaze = pass
            .gaze_at_stage
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("supervised loss needs a gaze density".into()))?;
        (
            kl_from_grids(&stage.attention, gaze, cfg.epsilon_norm),
            cfg.supervision_weight,
        )
    } else {
        (0.0, 0.0)
    };
    Ok(LossParts {
        total: cross_entropy + kl_weight * kl,
        cross_entropy,
        kl,
        kl_weight,
    })
}

/// Gradients for every parameter group plus the input image. The feature-conv
/// gradients are computed (the input gradient needs them on its path) but the
/// optimizer never applies them.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub feature_conv_w: Vec<f64>,
    pub feature_conv_b: Vec<f64>,
    pub attn1_w: Vec<f64>,
    pub attn1_b: Vec<f64>,
    pub attn2_w: Vec<f64>,
    pub attn2_b: Vec<f64>,
    pub classifier_w: Vec<f64>,
    pub classifier_b: Vec<f64>,
    pub input: FeatureMap,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams, input_dims: (usize, usize)) -> Self {
        Gradients {
            feature_conv_w: vec![0.0; params.feature_conv.weights.len()],
            feature_conv_b: vec![0.0; params.feature_conv.bias.len()],
            attn1_w: vec![0.0; params.attn_conv1.weights.len()],
            attn1_b: vec![0.0; params.attn_conv1.bias.len()],
            attn2_w: vec![0.0; params.attn_conv2.weights.len()],
            attn2_b: vec![0.0; params.attn_conv2.bias.len()],
            classifier_w: vec![0.0; params.classifier_weights.len()],
            classifier_b: vec![0.0; params.classifier_bias.len()],
            input: FeatureMap::zeros(input_dims.0, input_dims.1, params.in_channels),
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        fn add(a: &mut [f64], b: &[f64]) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        add(&mut self.feature_conv_w, &other.feature_conv_w);
        add(&mut self.feature_conv_b, &other.feature_conv_b);
        add(&mut self.attn1_w, &other.attn1_w);
        add(&mut self.attn1_b, &other.attn1_b);
        add(&mut self.attn2_w, &other.attn2_w);
        add(&mut self.attn2_b, &other.attn2_b);
        add(&mut self.classifier_w, &other.classifier_w);
        add(&mut self.classifier_b, &other.classifier_b);
        add(self.input.values_mut(), other.input.values());
    }

    pub fn scale(&mut self, factor: f64) {
        for slice in [
            &mut self.feature_conv_w,
            &mut self.feature_conv_b,
            &mut self.attn1_w,
            &mut self.attn1_b,
            &mut self.attn2_w,
            &mut self.attn2_b,
            &mut self.classifier_w,
            &mut self.classifier_b,
        ] {
            for v in slice.iter_mut() {
                *v *= factor;
            }
        }
        for v in self.input.values_mut() {
            *v *= factor;
        }
    }
}

/// Exact analytic gradients of [`loss`] with respect to every parameter group
/// and the input image.
pub fn backward(
    params: &ModelParams,
    pass: &ForwardPass,
    label: usize,
    cfg: &AttentionConfig,
) -> Result<Gradients> {
    if label >= pass.probs.len() {
        return Err(Error::InvalidValue(format!(
            "label {label} out of range for {} classes",
            pass.probs.len()
        )));
    }
    let mut grads = Gradients::zeros_like(params, pass.input.spatial_dims());

    // d(cross-entropy)/d(logits) for softmax + negative log likelihood
    let mut dlogits = pass.probs.clone();
    dlogits[label] -= 1.0;

    // classifier
    let num_classes = params.num_classes;
    let mut dpooled = vec![0.0; params.feature_channels];
    for (d, dp) in dpooled.iter_mut().enumerate() {
        for (k, &dl) in dlogits.iter().enumerate() {
            grads.classifier_w[d * num_classes + k] += pass.pooled[d] * dl;
            *dp += params.classifier_weights[d * num_classes + k] * dl;
        }
    }
    grads.classifier_b.copy_from_slice(&dlogits);

    // spatial mean pooling
    let (fh, fw) = pass.h_final.spatial_dims();
    let cells = (fh * fw) as f64;
    let mut dh_final = FeatureMap::zeros(fh, fw, params.feature_channels);
    for r in 0..fh {
        for c in 0..fw {
            for (d, &dp) in dpooled.iter().enumerate() {
                dh_final.set(r, c, d, dp / cells);
            }
        }
    }

    // gradient of the attention-application stage: splits into the feature
    // path (dX += dG * A) and the map path (dA += sum_d dG * X)
    let stage_backward = |stage: &AttnStage, dglimpse: &FeatureMap, grads: &mut Gradients| -> FeatureMap {
        let x = &stage.input;
        let (h, w) = x.spatial_dims();
        let mut dx = FeatureMap::zeros(h, w, x.channels());
        let mut da = Grid::filled(h, w, 0.0);
        for r in 0..h {
            for c in 0..w {
                let a = stage.attention.at(r, c);
                let mut da_acc = 0.0;
                for d in 0..x.channels() {
                    let g = dglimpse.at(r, c, d);
                    dx.set(r, c, d, g * a);
                    da_acc += g * x.at(r, c, d);
                }
                da.set(r, c, da_acc);
            }
        }

        if !stage.learned {
            // human attention: the map is a constant of the parameters
            return dx;
        }

        // supervised baseline: add the KL term's gradient on the map
        if cfg.kind == AttentionKind::Supervised && cfg.supervision_weight > 0.0 {
            let gaze = pass.gaze_at_stage.as_ref().expect("supervised pass caches gaze");
            let shift = distribution_shift(stage.attention.values(), gaze.values(), cfg.epsilon_norm);
            let p = normalize_with_shift(gaze.values(), shift);
            let s_total: f64 = stage.attention.values().iter().map(|&v| v + shift).sum();
            for (i, (&a, &pi)) in stage.attention.values().iter().zip(&p).enumerate() {
                let dkl = 1.0 / s_total - pi / (a + shift);
                da.values_mut()[i] += cfg.supervision_weight * dkl;
            }
        }

        // activation backward: map gradient -> significance gradient
        let mut dy = Grid::filled(h, w, 0.0);
        match cfg.kind {
            AttentionKind::Softmax => {
                let dot: f64 = stage
                    .attention
                    .values()
                    .iter()
                    .zip(da.values())
                    .map(|(&a, &g)| a * g)
                    .sum();
                for (i, (&a, &g)) in stage.attention.values().iter().zip(da.values()).enumerate() {
                    dy.values_mut()[i] = a * (g - dot);
                }
            }
            _ => {
                for (i, (&a, &g)) in stage.attention.values().iter().zip(da.values()).enumerate() {
                    dy.values_mut()[i] = g * a * (1.0 - a);
                }
            }
        }

        // branch backward: conv2 (1x1) -> ReLU -> conv1 (3x3)
        let h1 = stage.h1.as_ref().expect("learned stage caches h1");
        let h1pre = stage.h1pre.as_ref().expect("learned stage caches h1pre");
        let dy_map = FeatureMap::new(h, w, 1, dy.values().to_vec()).expect("dims valid");
        let (gw2, gb2, dh1) = params.attn_conv2.backward(h1, &dy_map);
        let dh1pre = relu_backward(h1pre, &dh1);
        let (gw1, gb1, dx_branch) = params.attn_conv1.backward(x, &dh1pre);
        for (a, b) in grads.attn2_w.iter_mut().zip(&gw2) {
            *a += b;
        }
        for (a, b) in grads.attn2_b.iter_mut().zip(&gb2) {
            *a += b;
        }
        for (a, b) in grads.attn1_w.iter_mut().zip(&gw1) {
            *a += b;
        }
        for (a, b) in grads.attn1_b.iter_mut().zip(&gb1) {
            *a += b;
        }
        for (a, b) in dx.values_mut().iter_mut().zip(dx_branch.values()) {
            *a += b;
        }
        dx
    };

    // walk back through the late stage, the pooling, and the early stage
    let dpooled_stage = match (pass.fusion, &pass.stage) {
        (FusionStage::Late, Some(stage)) => stage_backward(stage, &dh_final, &mut grads),
        _ => dh_final,
    };

    let (gh, gw_) = pass.g_early.spatial_dims();
    let dg_early = avgpool2_backward((gh, gw_, params.feature_channels), &dpooled_stage);

    let dz = match (pass.fusion, &pass.stage) {
        (FusionStage::Early, Some(stage)) => stage_backward(stage, &dg_early, &mut grads),
        _ => dg_early,
    };

    let dzpre = relu_backward(&pass.zpre, &dz);
    let (gwf, gbf, dinput) = params.feature_conv.backward(&pass.input, &dzpre);
    grads.feature_conv_w = gwf;
    grads.feature_conv_b = gbf;
    grads.input = dinput;
    Ok(grads)
}
