//! Task-performance metrics: F-measure with adaptive thresholding, MAE,
//! interpolated average precision, classification accuracy, and the fooling
//! rate used for robustness evaluation.

use crate::error::{Error, Result};
use crate::tensor::Grid;

pub const DEFAULT_BETA_SQUARED: f64 = 0.3;

/// A saliency map prediction with values in [0, 1].
#[derive(Debug, Clone)]
pub struct SaliencyPrediction {
    pub image_id: String,
    pub map: Grid,
}

impl SaliencyPrediction {
    pub fn new(image_id: impl Into<String>, map: Grid) -> Result<Self> {
        if map.values().iter().any(|&v| !(0.0..=1.0).contains(&v) || !v.is_finite()) {
            return Err(Error::InvalidValue("saliency prediction values must lie in [0, 1]".into()));
        }
        Ok(SaliencyPrediction {
            image_id: image_id.into(),
            map,
        })
    }
}

/// Binary segmentation ground truth.
#[derive(Debug, Clone)]
pub struct GroundTruthMask {
    pub image_id: String,
    height: usize,
    width: usize,
    mask: Vec<bool>,
}

impl GroundTruthMask {
    pub fn new(image_id: impl Into<String>, height: usize, width: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != height * width {
            return Err(Error::shape(
                "ground-truth mask",
                format!("{} cells", height * width),
                format!("{} cells", mask.len()),
            ));
        }
        Ok(GroundTruthMask {
            image_id: image_id.into(),
            height,
            width,
            mask,
        })
    }

    pub fn from_grid(image_id: impl Into<String>, grid: &Grid) -> Result<Self> {
        let mask: Result<Vec<bool>> = grid
            .values()
            .iter()
            .map(|&v| {
                if v == 0.0 {
                    Ok(false)
                } else if v == 1.0 {
                    Ok(true)
                } else {
                    Err(Error::InvalidValue(format!("mask cell value {v} is neither 0 nor 1")))
                }
            })
            .collect();
        GroundTruthMask::new(image_id, grid.height(), grid.width(), mask?)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn cells(&self) -> &[bool] {
        &self.mask
    }
}

/// Ranked per-class retrieval results for average precision.
#[derive(Debug, Clone)]
pub struct RankedPredictions {
    pub class_id: String,
    entries: Vec<RankedEntry>,
}

#[derive(Debug, Clone)]
pub struct RankedEntry {
    pub item_id: String,
    pub score: f64,
    pub is_positive: bool,
}

impl RankedPredictions {
    /// Sorts by descending score; equal scores break by item_id so the
    /// ranking is a deterministic function of the inputs.
    pub fn new(class_id: impl Into<String>, mut entries: Vec<RankedEntry>) -> Result<Self> {
        if entries.iter().any(|e| !e.score.is_finite()) {
            return Err(Error::InvalidValue("ranking scores must be finite".into()));
        }
        entries.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("finite scores")
                .then_with(|| a.item_id.cmp(&b.item_id))
        });
        Ok(RankedPredictions {
            class_id: class_id.into(),
            entries,
        })
    }

    pub fn entries(&self) -> &[RankedEntry] {
        &self.entries
    }

    pub fn num_positives(&self) -> usize {
        self.entries.iter().filter(|e| e.is_positive).count()
    }
}

/// Clean and perturbed predicted labels for one item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelPair {
    pub item_id: String,
    pub clean_label: usize,
    pub perturbed_label: Option<usize>,
}

/// Per-image binarization level: twice the map mean, clamped below 1 so a
/// nonzero map always produces a nonempty foreground candidate set.
pub fn adaptive_threshold(s: &SaliencyPrediction) -> f64 {
    let t = 2.0 * s.map.mean();
    t.min(1.0 - 1e-12)
}

/// Weighted harmonic mean of precision and recall (β² weights precision).
/// Defined as 0 when both are zero.
pub fn f_measure(precision: f64, recall: f64, beta_squared: f64) -> f64 {
    if precision == 0.0 && recall == 0.0 {
        return 0.0;
    }
    (1.0 + beta_squared) * precision * recall / (beta_squared * precision + recall)
}

fn precision_recall_at(s: &SaliencyPrediction, g: &GroundTruthMask, threshold: f64) -> (f64, f64) {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&v, &is_fg) in s.map.values().iter().zip(g.cells()) {
        let predicted = v > threshold;
        match (predicted, is_fg) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    (precision, recall)
}

/// Per-image F at the adaptive threshold.
pub fn f_measure_adaptive(s: &SaliencyPrediction, g: &GroundTruthMask, beta_squared: f64) -> Result<f64> {
    if s.map.dims() != g.dims() {
        return Err(Error::shape(
            "f_measure_adaptive",
            format!("{:?}", g.dims()),
            format!("{:?}", s.map.dims()),
        ));
    }
    let (p, r) = precision_recall_at(s, g, adaptive_threshold(s));
    Ok(f_measure(p, r, beta_squared))
}

/// Dataset-level F scores: the mean F at each image's adaptive threshold, and
/// the maximum F over a 256-level threshold sweep (mean precision and recall
/// across images at each level). Both are reported side by side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FMeasureScores {
    pub adaptive_mean: f64,
    pub sweep_max: f64,
}

pub fn f_max(preds: &[SaliencyPrediction], gts: &[GroundTruthMask], beta_squared: f64) -> Result<FMeasureScores> {
    if preds.is_empty() || preds.len() != gts.len() {
        return Err(Error::InvalidValue(format!(
            "f_max needs matched nonempty prediction/mask lists (got {} vs {})",
            preds.len(),
            gts.len()
        )));
    }
    let mut adaptive_total = 0.0;
    let levels = 256usize;
    let mut sweep_precision = vec![0.0; levels];
    let mut sweep_recall = vec![0.0; levels];
    for (s, g) in preds.iter().zip(gts) {
        adaptive_total += f_measure_adaptive(s, g, beta_squared)?;
        for (level, (sp, sr)) in sweep_precision.iter_mut().zip(sweep_recall.iter_mut()).enumerate() {
            // strict binarization at each level, same rule as the adaptive
            // path; the top level keeps fully-confident cells in via the
            // same clamp used by adaptive_threshold
            let t = (level as f64 / 255.0).min(1.0 - 1e-12);
            let (p, r) = precision_recall_at(s, g, t);
            *sp += p;
            *sr += r;
        }
    }
    let n = preds.len() as f64;
    let sweep_max = sweep_precision
        .iter()
        .zip(&sweep_recall)
        .map(|(&p, &r)| f_measure(p / n, r / n, beta_squared))
        .fold(0.0f64, f64::max);
    Ok(FMeasureScores {
        adaptive_mean: adaptive_total / n,
        sweep_max,
    })
}

/// Average pixel-wise absolute error between a saliency map and its mask.
pub fn mae(s: &SaliencyPrediction, g: &GroundTruthMask) -> Result<f64> {
    if s.map.dims() != g.dims() {
        return Err(Error::shape("mae", format!("{:?}", g.dims()), format!("{:?}", s.map.dims())));
    }
    let total: f64 = s
        .map
        .values()
        .iter()
        .zip(g.cells())
        .map(|(&v, &m)| (if m { 1.0 } else { 0.0 } - v).abs())
        .sum();
    Ok(total / s.map.len() as f64)
}

/// Interpolated average precision: the mean, over recall levels (one per
/// positive), of the maximum precision at that recall or beyond.
pub fn average_precision(r: &RankedPredictions) -> Result<f64> {
    let num_pos = r.num_positives();
    if num_pos == 0 {
        return Err(Error::Unscorable {
            image_id: r.class_id.clone(),
            reason: "class has no positives; skipped".into(),
        });
    }
    // precision at each positive hit, walking down the ranking
    let mut hit_precisions = Vec::with_capacity(num_pos);
    let mut tp = 0usize;
    for (rank0, entry) in r.entries().iter().enumerate() {
        if entry.is_positive {
            tp += 1;
            hit_precisions.push(tp as f64 / (rank0 + 1) as f64);
        }
    }
    // interpolate: max precision at this recall level or any deeper one;
    // summed in ascending recall order (the definition's order)
    let mut interpolated = vec![0.0f64; num_pos];
    let mut best = 0.0f64;
    for (slot, &p) in interpolated.iter_mut().rev().zip(hit_precisions.iter().rev()) {
        best = best.max(p);
        *slot = best;
    }
    Ok(interpolated.iter().sum::<f64>() / num_pos as f64)
}

/// Unweighted mean of per-class AP. Classes without positives are skipped and
/// returned so the caller can flag them.
pub fn mean_average_precision(classes: &[RankedPredictions]) -> Result<(f64, Vec<String>)> {
    let mut total = 0.0;
    let mut scored = 0usize;
    let mut skipped = Vec::new();
    for class in classes {
        match average_precision(class) {
            Ok(ap) => {
                total += ap;
                scored += 1;
            }
            Err(Error::Unscorable { .. }) => skipped.push(class.class_id.clone()),
            Err(e) => return Err(e),
        }
    }
    if scored == 0 {
        return Err(Error::InvalidValue("mean_average_precision: no scorable class".into()));
    }
    Ok((total / scored as f64, skipped))
}

/// Fraction of correct predictions.
pub fn accuracy(pairs: &[(usize, usize)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidValue("accuracy requires at least one prediction".into()));
    }
    let correct = pairs.iter().filter(|(pred, gt)| pred == gt).count();
    Ok(correct as f64 / pairs.len() as f64)
}

/// Video-level prediction: average the per-frame class probability vectors,
/// then take the argmax (ties resolve to the lowest class index).
pub fn video_level_label(frame_probs: &[Vec<f64>]) -> Result<usize> {
    let num_classes = frame_probs.first().map(|p| p.len()).unwrap_or(0);
    if num_classes == 0 {
        return Err(Error::InvalidValue("video_level_label requires at least one frame".into()));
    }
    if frame_probs.iter().any(|p| p.len() != num_classes) {
        return Err(Error::InvalidValue("frames disagree on class count".into()));
    }
    let mut mean = vec![0.0; num_classes];
    for frame in frame_probs {
        for (m, &p) in mean.iter_mut().zip(frame) {
            *m += p;
        }
    }
    let mut best = 0usize;
    for (i, &v) in mean.iter().enumerate() {
        if v > mean[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Fraction of items whose predicted label changed under perturbation.
pub fn fooling_rate(pairs: &[LabelPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidValue("fooling_rate requires at least one pair".into()));
    }
    let mut changed = 0usize;
    for pair in pairs {
        let perturbed = pair.perturbed_label.ok_or_else(|| {
            Error::InvalidValue(format!("item {} has no perturbed label", pair.item_id))
        })?;
        if perturbed != pair.clean_label {
            changed += 1;
        }
    }
    Ok(changed as f64 / pairs.len() as f64)
}
