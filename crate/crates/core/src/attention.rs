//! The five attention baselines as deterministic kernels, plus the
//! gaze-supervision loss.
//!
//! Softmax and sigmoid attention turn a significance matrix into a map in
//! [0, 1]; activation attention derives a post-hoc map from feature
//! statistics; human attention injects a fixation density directly. The KL
//! loss scores a predicted map against a human density and is what the
//! supervised baseline minimizes alongside the task loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{AttentionMap, DensityMap, FeatureMap, Grid, ScalarMap, SignificanceMap};

/// Which of the five baselines an attention map comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttentionKind {
    /// Post-hoc map from channel statistics of a trained feature; no attention
    /// is applied during the forward pass.
    ActivationPosthoc,
    /// Learned map normalized with a spatial softmax (sums to 1).
    Softmax,
    /// Learned map squashed per cell with a sigmoid.
    Sigmoid,
    /// Sigmoid attention trained with an extra KL term toward human gaze.
    Supervised,
    /// The human fixation density replaces the learned map outright.
    Human,
}

impl AttentionKind {
    pub const ALL: [AttentionKind; 5] = [
        AttentionKind::ActivationPosthoc,
        AttentionKind::Softmax,
        AttentionKind::Sigmoid,
        AttentionKind::Supervised,
        AttentionKind::Human,
    ];

    /// Stable identifier used in reports, file names, and the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            AttentionKind::ActivationPosthoc => "activation",
            AttentionKind::Softmax => "softmax",
            AttentionKind::Sigmoid => "sigmoid",
            AttentionKind::Supervised => "supervised",
            AttentionKind::Human => "human",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "activation" => Ok(AttentionKind::ActivationPosthoc),
            "softmax" => Ok(AttentionKind::Softmax),
            "sigmoid" => Ok(AttentionKind::Sigmoid),
            "supervised" => Ok(AttentionKind::Supervised),
            "human" => Ok(AttentionKind::Human),
            other => Err(Error::InvalidConfig(format!(
                "unknown attention kind {other:?}; expected one of activation, softmax, sigmoid, supervised, human"
            ))),
        }
    }

    /// Baselines whose attention map has trainable parameters.
    pub fn has_learned_attention(&self) -> bool {
        matches!(
            self,
            AttentionKind::Softmax | AttentionKind::Sigmoid | AttentionKind::Supervised
        )
    }

    /// Baselines that need a gaze density at evaluation time.
    pub fn needs_gaze(&self) -> bool {
        matches!(self, AttentionKind::Supervised | AttentionKind::Human)
    }
}

impl std::fmt::Display for AttentionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-baseline knobs: the activation exponent, the supervision weight, and
/// the normalization epsilon shared by KL and IG computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionConfig {
    pub kind: AttentionKind,
    /// Exponent p of the channel statistic for activation attention.
    pub activation_exponent: f64,
    /// Weight of the KL supervision term (only the supervised baseline uses it).
    pub supervision_weight: f64,
    /// Epsilon applied before distribution normalization when a map contains zeros.
    pub epsilon_norm: f64,
}

impl AttentionConfig {
    pub fn new(kind: AttentionKind) -> Self {
        AttentionConfig {
            kind,
            activation_exponent: 2.0,
            supervision_weight: 0.01,
            epsilon_norm: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.activation_exponent <= 0.0 {
            return Err(Error::InvalidConfig("activation exponent must be > 0".into()));
        }
        if self.supervision_weight < 0.0 {
            return Err(Error::InvalidConfig("supervision weight must be >= 0".into()));
        }
        if self.epsilon_norm <= 0.0 {
            return Err(Error::InvalidConfig("epsilon_norm must be > 0".into()));
        }
        Ok(())
    }
}

/// Softmax over all spatial locations: A_i = exp(Y_i) / Σ_j exp(Y_j).
/// Stabilized by subtracting max(Y) before exponentiation.
pub fn softmax_attention(y: &SignificanceMap) -> AttentionMap {
    let g = y.grid();
    let m = g.max();
    let exps: Vec<f64> = g.values().iter().map(|&v| (v - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    let values: Vec<f64> = exps.iter().map(|&e| e / total).collect();
    AttentionMap::new(Grid::new(g.height(), g.width(), values).expect("dims valid"))
        .expect("softmax output lies in [0,1]")
}

/// Per-cell logistic squashing: A_i = 1 / (1 + exp(-Y_i)).
pub fn sigmoid_attention(y: &SignificanceMap) -> AttentionMap {
    let g = y.grid();
    let values: Vec<f64> = g.values().iter().map(|&v| sigmoid_scalar(v)).collect();
    AttentionMap::new(Grid::new(g.height(), g.width(), values).expect("dims valid"))
        .expect("sigmoid output lies in [0,1]")
}

#[inline]
pub(crate) fn sigmoid_scalar(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Channel statistic of absolute activations: `A_raw[i,j] = Σ_d |Z[i,j,d]|^p`.
/// Returned unnormalized; pair with [`normalize_to_unit`] for a map in `[0, 1]`.
pub fn activation_attention(z: &FeatureMap, p: f64) -> Result<SignificanceMap> {
    if p <= 0.0 {
        return Err(Error::InvalidConfig("activation exponent must be > 0".into()));
    }
    let square = p == 2.0;
    let mut values = Vec::with_capacity(z.height() * z.width());
    for r in 0..z.height() {
        for c in 0..z.width() {
            let mut acc = 0.0;
            for d in 0..z.channels() {
                let v = z.at(r, c, d);
                acc += if square { v * v } else { v.abs().powf(p) };
            }
            values.push(acc);
        }
    }
    SignificanceMap::from_values(z.height(), z.width(), values)
}

/// Divide a nonnegative map by its maximum; the all-zero map stays zero.
pub fn normalize_to_unit(a_raw: &SignificanceMap) -> Result<AttentionMap> {
    let g = a_raw.grid();
    if g.values().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidValue(
            "normalize_to_unit requires a nonnegative map".into(),
        ));
    }
    let m = g.max();
    let values: Vec<f64> = if m == 0.0 {
        vec![0.0; g.len()]
    } else {
        g.values().iter().map(|&v| (v / m).min(1.0)).collect()
    };
    AttentionMap::from_values(g.height(), g.width(), values)
}

/// Human attention injected into the model: the fixation density resampled to
/// the feature resolution and max-normalized to [0, 1]. `degenerate` is set
/// when the density is all zero and the map therefore carries no signal.
#[derive(Debug, Clone)]
pub struct HumanAttention {
    pub map: AttentionMap,
    pub degenerate: bool,
}

pub fn human_attention(d: &DensityMap, target_height: usize, target_width: usize) -> Result<HumanAttention> {
    let resampled = d.resampled(target_height, target_width)?;
    let sig = SignificanceMap::new(resampled.into_grid())?;
    let map = normalize_to_unit(&sig)?;
    let degenerate = map.grid().max() == 0.0;
    Ok(HumanAttention { map, degenerate })
}

/// Shift applied before distribution normalization: `eps` when either map
/// carries a zero (so no log argument vanishes), otherwise no shift, keeping
/// hand-checkable cases exact.
pub(crate) fn distribution_shift(a: &[f64], b: &[f64], eps: f64) -> f64 {
    if a.iter().any(|&v| v == 0.0) || b.iter().any(|&v| v == 0.0) {
        eps
    } else {
        0.0
    }
}

pub(crate) fn normalize_with_shift(values: &[f64], shift: f64) -> Vec<f64> {
    let total: f64 = values.iter().map(|&v| v + shift).sum();
    values.iter().map(|&v| (v + shift) / total).collect()
}

/// KL divergence from the human density to the attention map,
/// KL(p ‖ q) = Σ p_i ln(p_i / q_i), after both maps are normalized to
/// distributions (with an epsilon shift only when zeros are present).
/// Nonnegative; zero exactly when the normalized maps coincide.
pub fn attention_kl_loss(a: &AttentionMap, h: &DensityMap, epsilon_norm: f64) -> Result<f64> {
    if a.dims() != h.dims() {
        return Err(Error::shape(
            "attention_kl_loss",
            format!("{:?}", h.dims()),
            format!("{:?}", a.dims()),
        ));
    }
    let shift = distribution_shift(a.grid().values(), h.grid().values(), epsilon_norm);
    let q = normalize_with_shift(a.grid().values(), shift);
    let p = normalize_with_shift(h.grid().values(), shift);
    let mut kl = 0.0;
    for (pi, qi) in p.iter().zip(&q) {
        if *pi > 0.0 {
            kl += pi * (pi / qi).ln();
        }
    }
    Ok(kl.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn sig(h: usize, w: usize, values: Vec<f64>) -> SignificanceMap {
        SignificanceMap::from_values(h, w, values).unwrap()
    }

    #[test]
    fn softmax_constant_is_uniform() {
        let a = softmax_attention(&sig(2, 3, vec![1.7; 6]));
        for &v in a.grid().values() {
            assert_relative_eq!(v, 1.0 / 6.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn softmax_hand_case() {
        let a = softmax_attention(&sig(2, 2, vec![0.0, 2.0f64.ln(), 0.0, 0.0]));
        let expect = [0.2, 0.4, 0.2, 0.2];
        for (v, e) in a.grid().values().iter().zip(expect) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_shift_invariant_and_sums_to_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let values: Vec<f64> = (0..12).map(|_| rng.gen_range(-40.0..40.0)).collect();
            let shifted: Vec<f64> = values.iter().map(|v| v + 123.456).collect();
            let a = softmax_attention(&sig(3, 4, values));
            let b = softmax_attention(&sig(3, 4, shifted));
            assert!((a.grid().sum() - 1.0).abs() < 1e-12);
            for (x, y) in a.grid().values().iter().zip(b.grid().values()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sigmoid_hand_cases() {
        let a = sigmoid_attention(&sig(1, 3, vec![0.0, 3.0f64.ln(), 50.0]));
        assert_eq!(a.grid().values()[0], 0.5);
        assert!((a.grid().values()[1] - 0.75).abs() < 1e-12);
        assert!((a.grid().values()[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_monotone_and_open_interval() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let y1: f64 = rng.gen_range(-30.0..30.0);
            let y2: f64 = rng.gen_range(-30.0..30.0);
            let a = sigmoid_attention(&sig(1, 2, vec![y1, y2]));
            let (v1, v2) = (a.grid().values()[0], a.grid().values()[1]);
            assert!(v1 > 0.0 && v1 < 1.0);
            if y1 > y2 {
                assert!(v1 > v2);
            }
        }
    }

    #[test]
    fn activation_attention_matches_loop_oracle_exactly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let z = FeatureMap::new(4, 3, 5, (0..60).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let got = activation_attention(&z, 2.0).unwrap();
        for r in 0..4 {
            for c in 0..3 {
                let mut expect = 0.0;
                for d in 0..5 {
                    expect += z.at(r, c, d) * z.at(r, c, d);
                }
                assert_eq!(got.grid().at(r, c), expect);
            }
        }
    }

    #[test]
    fn activation_attention_hand_cases() {
        let z = FeatureMap::new(1, 1, 2, vec![3.0, 4.0]).unwrap();
        assert_eq!(activation_attention(&z, 2.0).unwrap().grid().at(0, 0), 25.0);
        let zero = FeatureMap::zeros(2, 2, 3);
        assert!(activation_attention(&zero, 2.0)
            .unwrap()
            .grid()
            .values()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_to_unit_cases() {
        let m = normalize_to_unit(&sig(2, 2, vec![1.0, 2.0, 4.0, 8.0])).unwrap();
        assert_eq!(m.grid().values(), &[0.125, 0.25, 0.5, 1.0]);
        let z = normalize_to_unit(&sig(2, 2, vec![0.0; 4])).unwrap();
        assert!(z.grid().values().iter().all(|&v| v == 0.0));
        assert!(normalize_to_unit(&sig(1, 2, vec![-1.0, 1.0])).is_err());
    }

    #[test]
    fn human_attention_uniform_and_peak() {
        let d = DensityMap::from_values(3, 3, vec![2.0; 9]).unwrap();
        let h = human_attention(&d, 3, 3).unwrap();
        assert!(!h.degenerate);
        assert!(h.map.grid().values().iter().all(|&v| v == 1.0));

        let mut peaked = vec![0.1; 9];
        peaked[4] = 0.9;
        let d = DensityMap::from_values(3, 3, peaked).unwrap();
        let h = human_attention(&d, 3, 3).unwrap();
        assert_eq!(h.map.grid().at(1, 1), 1.0);

        let zero = DensityMap::from_values(2, 2, vec![0.0; 4]).unwrap();
        let h = human_attention(&zero, 4, 4).unwrap();
        assert!(h.degenerate);
        assert!(h.map.grid().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kl_zero_for_proportional_maps() {
        let a = AttentionMap::from_values(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let h = DensityMap::from_values(2, 2, vec![0.5, 1.0, 1.5, 2.0]).unwrap();
        let kl = attention_kl_loss(&a, &h, 1e-9).unwrap();
        assert!(kl.abs() < 1e-12);
    }

    #[test]
    fn kl_hand_case() {
        // p = (0.5, 0.5) human, q = (0.25, 0.75) attention
        let a = AttentionMap::from_values(1, 2, vec![0.25, 0.75]).unwrap();
        let h = DensityMap::from_values(1, 2, vec![0.5, 0.5]).unwrap();
        let kl = attention_kl_loss(&a, &h, 1e-9).unwrap();
        let expect = 0.5 * 2.0f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl - expect).abs() < 1e-12);
    }

    #[test]
    fn kl_nonnegative_and_detects_difference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let av: Vec<f64> = (0..16).map(|_| rng.gen_range(0.01..1.0)).collect();
            let hv: Vec<f64> = (0..16).map(|_| rng.gen_range(0.01..1.0)).collect();
            let a = AttentionMap::from_values(4, 4, av).unwrap();
            let h = DensityMap::from_values(4, 4, hv).unwrap();
            let kl = attention_kl_loss(&a, &h, 1e-9).unwrap();
            assert!(kl >= 0.0);
        }
        // a genuinely different pair has strictly positive divergence
        let a = AttentionMap::from_values(1, 2, vec![0.9, 0.1]).unwrap();
        let h = DensityMap::from_values(1, 2, vec![0.1, 0.9]).unwrap();
        assert!(attention_kl_loss(&a, &h, 1e-9).unwrap() > 1e-10);
    }

    #[test]
    fn kl_handles_zeros_via_epsilon() {
        let a = AttentionMap::from_values(1, 2, vec![0.0, 1.0]).unwrap();
        let h = DensityMap::from_values(1, 2, vec![1.0, 0.0]).unwrap();
        let kl = attention_kl_loss(&a, &h, 1e-9).unwrap();
        assert!(kl.is_finite() && kl > 0.0);
    }

    #[test]
    fn kl_rejects_dim_mismatch() {
        let a = AttentionMap::from_values(1, 2, vec![0.5, 0.5]).unwrap();
        let h = DensityMap::from_values(2, 1, vec![0.5, 0.5]).unwrap();
        assert!(attention_kl_loss(&a, &h, 1e-9).is_err());
    }
}
