//! Dual-implementation oracle for the model forward pass: an independent
//! straight-loop reference computes the logits from the raw parameter
//! vectors, and the production pass must agree to 1e-10.

use gazebench_core::attention::{AttentionConfig, AttentionKind};
use gazebench_core::model::{forward, FusionStage, ModelParams};
use gazebench_core::tensor::{DensityMap, FeatureMap};

/// Reference convolution: explicit zero padding, no shared helpers.
fn ref_conv(
    input: &[f64],
    h: usize,
    w: usize,
    in_ch: usize,
    out_ch: usize,
    k: usize,
    weights: &[f64],
    bias: &[f64],
) -> Vec<f64> {
    let pad = (k / 2) as isize;
    let mut out = vec![0.0; h * w * out_ch];
    for r in 0..h as isize {
        for c in 0..w as isize {
            for o in 0..out_ch {
                let mut acc = bias[o];
                for kr in 0..k as isize {
                    for kc in 0..k as isize {
                        let rr = r + kr - pad;
                        let cc = c + kc - pad;
                        if rr < 0 || rr >= h as isize || cc < 0 || cc >= w as isize {
                            continue;
                        }
                        for i in 0..in_ch {
                            let w_idx = ((o * in_ch + i) * k + kr as usize) * k + kc as usize;
                            let x_idx = ((rr as usize) * w + cc as usize) * in_ch + i;
                            acc += weights[w_idx] * input[x_idx];
                        }
                    }
                }
                out[((r as usize) * w + c as usize) * out_ch + o] = acc;
            }
        }
    }
    out
}

fn ref_relu(values: &mut [f64]) {
    for v in values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn ref_avgpool2(input: &[f64], h: usize, w: usize, ch: usize) -> (Vec<f64>, usize, usize) {
    let oh = (h + 1) / 2;
    let ow = (w + 1) / 2;
    let mut out = vec![0.0; oh * ow * ch];
    for r in 0..oh {
        for c in 0..ow {
            let r_end = (2 * r + 2).min(h);
            let c_end = (2 * c + 2).min(w);
            let count = ((r_end - 2 * r) * (c_end - 2 * c)) as f64;
            for d in 0..ch {
                let mut acc = 0.0;
                for rr in 2 * r..r_end {
                    for cc in 2 * c..c_end {
                        acc += input[(rr * w + cc) * ch + d];
                    }
                }
                out[(r * ow + c) * ch + d] = acc / count;
            }
        }
    }
    (out, oh, ow)
}

/// Attention branch + activation, straight from the parameter vectors.
fn ref_attention(
    params: &ModelParams,
    stage_in: &[f64],
    h: usize,
    w: usize,
    kind: AttentionKind,
    gaze: Option<&DensityMap>,
) -> Option<Vec<f64>> {
    match kind {
        AttentionKind::ActivationPosthoc => None,
        AttentionKind::Human => {
            let d = gaze.unwrap();
            let resampled = d.resampled(h, w).unwrap();
            let values = {
                use gazebench_core::tensor::ScalarMap;
                resampled.grid().values().to_vec()
            };
            let max = values.iter().copied().fold(0.0f64, f64::max);
            Some(if max == 0.0 {
                vec![0.0; values.len()]
            } else {
                values.iter().map(|&v| (v / max).min(1.0)).collect()
            })
        }
        _ => {
            let hid = params.attn_conv1.out_channels;
            let mut h1 = ref_conv(
                stage_in,
                h,
                w,
                params.feature_channels,
                hid,
                3,
                &params.attn_conv1.weights,
                &params.attn_conv1.bias,
            );
            ref_relu(&mut h1);
            let y = ref_conv(
                &h1,
                h,
                w,
                hid,
                1,
                1,
                &params.attn_conv2.weights,
                &params.attn_conv2.bias,
            );
            Some(match kind {
                AttentionKind::Softmax => {
                    let m = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = y.iter().map(|&v| (v - m).exp()).collect();
                    let total: f64 = exps.iter().sum();
                    exps.iter().map(|&e| e / total).collect()
                }
                _ => y.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect(),
            })
        }
    }
}

/// Reference logits for the full pipeline.
fn ref_logits(
    params: &ModelParams,
    image: &FeatureMap,
    kind: AttentionKind,
    fusion: FusionStage,
    gaze: Option<&DensityMap>,
) -> Vec<f64> {
    let (h, w) = (image.height(), image.width());
    let mut z = ref_conv(
        image.values(),
        h,
        w,
        params.in_channels,
        params.feature_channels,
        3,
        &params.feature_conv.weights,
        &params.feature_conv.bias,
    );
    ref_relu(&mut z);
    let ch = params.feature_channels;

    let apply = |x: &[f64], a: &[f64], cells: usize| -> Vec<f64> {
        let mut g = x.to_vec();
        for cell in 0..cells {
            for d in 0..ch {
                g[cell * ch + d] *= a[cell];
            }
        }
        g
    };

    let g_early = match fusion {
        FusionStage::Early => match ref_attention(params, &z, h, w, kind, gaze) {
            Some(a) => apply(&z, &a, h * w),
            None => z.clone(),
        },
        FusionStage::Late => z.clone(),
    };
    let (pooled_stage, ph, pw) = ref_avgpool2(&g_early, h, w, ch);
    let h_final = match fusion {
        FusionStage::Late => match ref_attention(params, &pooled_stage, ph, pw, kind, gaze) {
            Some(a) => apply(&pooled_stage, &a, ph * pw),
            None => pooled_stage.clone(),
        },
        FusionStage::Early => pooled_stage.clone(),
    };

    let cells = (ph * pw) as f64;
    let mut pooled = vec![0.0; ch];
    for cell in 0..ph * pw {
        for d in 0..ch {
            pooled[d] += h_final[cell * ch + d];
        }
    }
    for p in &mut pooled {
        *p /= cells;
    }

    (0..params.num_classes)
        .map(|k| {
            let mut acc = params.classifier_bias[k];
            for (d, &p) in pooled.iter().enumerate() {
                acc += p * params.classifier_weights[d * params.num_classes + k];
            }
            acc
        })
        .collect()
}

#[test]
fn forward_logits_match_straight_loop_reference() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);

    for (in_channels, grid) in [(1usize, 10usize), (2, 9), (3, 12)] {
        let mut params = ModelParams::init(in_channels, 8, 4, 0).unwrap();
        // non-degenerate classifier so the whole pipeline matters
        for v in &mut params.classifier_weights {
            *v = rng.gen_range(-1.0..1.0);
        }
        for v in &mut params.classifier_bias {
            *v = rng.gen_range(-0.2..0.2);
        }
        let image = FeatureMap::new(
            grid,
            grid,
            in_channels,
            (0..grid * grid * in_channels).map(|_| rng.gen_range(-1.5..1.5)).collect(),
        )
        .unwrap();
        let gaze_values: Vec<f64> = (0..grid * grid).map(|_| rng.gen_range(0.0..1.0)).collect();
        let gaze = DensityMap::from_values(grid, grid, gaze_values).unwrap();

        for kind in AttentionKind::ALL {
            for fusion in [FusionStage::Early, FusionStage::Late] {
                let cfg = AttentionConfig::new(kind);
                let pass = forward(&params, &image, &cfg, fusion, Some(&gaze)).unwrap();
                let expect = ref_logits(&params, &image, kind, fusion, Some(&gaze));
                for (got, want) in pass.logits().iter().zip(&expect) {
                    assert!(
                        (got - want).abs() < 1e-10,
                        "{kind} {fusion:?} logits diverge: {got} vs {want}"
                    );
                }
            }
        }
    }
}
