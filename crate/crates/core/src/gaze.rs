//! Center-bias-resistant correlation metrics between a predicted map and
//! human fixations: shuffled AUC and Information Gain.
//!
//! Shuffled AUC scores prediction values at fixated cells (positives) against
//! values at cells fixated in *other* images (negatives), so a prediction
//! that merely reproduces the shared spatial prior of the dataset scores 0.5.
//! Information Gain is the mean log-likelihood improvement, in bits per
//! fixation, of the predicted distribution over a baseline distribution.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::normalize_with_shift;
use crate::error::{Error, Result};
use crate::tensor::{AttentionMap, DensityMap, Grid, ScalarMap};

/// Discrete gaze points on an image grid, with the grid they live on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixationSet {
    image_id: String,
    points: Vec<(usize, usize)>,
    grid_height: usize,
    grid_width: usize,
}

impl FixationSet {
    pub fn new(
        image_id: impl Into<String>,
        points: Vec<(usize, usize)>,
        grid_height: usize,
        grid_width: usize,
    ) -> Result<Self> {
        if grid_height == 0 || grid_width == 0 {
            return Err(Error::InvalidValue("fixation grid dims must be positive".into()));
        }
        let image_id = image_id.into();
        for &(r, c) in &points {
            if r >= grid_height || c >= grid_width {
                return Err(Error::InvalidValue(format!(
                    "fixation ({r}, {c}) outside {grid_height}x{grid_width} grid of image {image_id}"
                )));
            }
        }
        Ok(FixationSet {
            image_id,
            points,
            grid_height,
            grid_width,
        })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn points(&self) -> &[(usize, usize)] {
        &self.points
    }

    pub fn grid_dims(&self) -> (usize, usize) {
        (self.grid_height, self.grid_width)
    }

    /// Empty sets are flagged, not scored.
    pub fn is_scorable(&self) -> bool {
        !self.points.is_empty()
    }
}

/// How shuffled negatives are assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShuffleMode {
    /// All other-image fixations (multiplicity preserved, so the pool keeps
    /// the empirical spatial prior), minus any location that coincides with a
    /// positive. Reproducible bit-exactly with no sampling noise.
    DeterministicUnion,
    /// M seeded draws of |fix| locations from the same pool; scores averaged.
    MonteCarlo,
}

/// Negative-set policy for shuffled AUC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShuffleSpec {
    pub mode: ShuffleMode,
    pub num_shuffles: usize,
    pub seed: u64,
}

impl ShuffleSpec {
    pub fn deterministic() -> Self {
        ShuffleSpec {
            mode: ShuffleMode::DeterministicUnion,
            num_shuffles: 1,
            seed: 0,
        }
    }

    pub fn monte_carlo(num_shuffles: usize, seed: u64) -> Self {
        ShuffleSpec {
            mode: ShuffleMode::MonteCarlo,
            num_shuffles,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_shuffles == 0 {
            return Err(Error::InvalidConfig("num_shuffles must be >= 1".into()));
        }
        Ok(())
    }
}

/// FNV-1a, used to derive a per-image RNG stream from (seed, image_id) so the
/// scoring order of images cannot change Monte Carlo results.
pub(crate) fn hash_image_id(id: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in id.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Map a fixation from its own grid onto `dims`, proportionally.
fn map_point(point: (usize, usize), from: (usize, usize), to: (usize, usize)) -> (usize, usize) {
    if from == to {
        return point;
    }
    let r = ((point.0 as f64 + 0.5) * to.0 as f64 / from.0 as f64) as usize;
    let c = ((point.1 as f64 + 0.5) * to.1 as f64 / from.1 as f64) as usize;
    (r.min(to.0 - 1), c.min(to.1 - 1))
}

/// Rank-based Mann-Whitney statistic with midrank tie handling:
/// (#(pos > neg) + 0.5 · #(pos = neg)) / (#pos · #neg).
fn mann_whitney_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let np = pos.len();
    let nn = neg.len();
    let mut all: Vec<(f64, bool)> = Vec::with_capacity(np + nn);
    all.extend(pos.iter().map(|&v| (v, true)));
    all.extend(neg.iter().map(|&v| (v, false)));
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i + 1;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // ranks are 1-based; every tied value gets the mean rank of its block
        let midrank = (i + j + 1) as f64 / 2.0;
        let pos_in_block = all[i..j].iter().filter(|t| t.1).count();
        rank_sum_pos += midrank * pos_in_block as f64;
        i = j;
    }
    let u = rank_sum_pos - (np * (np + 1)) as f64 / 2.0;
    u / (np as f64 * nn as f64)
}

/// Build the negative-location pool from other images' fixations, mapped onto
/// the prediction grid. Multiplicity is preserved so the pool carries the
/// empirical spatial prior; locations coinciding with a positive are removed.
fn negative_pool(
    fix: &FixationSet,
    others: &[&FixationSet],
    dims: (usize, usize),
) -> Vec<(usize, usize)> {
    let positives: BTreeSet<(usize, usize)> = fix.points().iter().copied().collect();
    let mut pool = Vec::new();
    for other in others {
        if other.image_id() == fix.image_id() {
            continue;
        }
        for &p in other.points() {
            let mapped = map_point(p, other.grid_dims(), dims);
            if !positives.contains(&mapped) {
                pool.push(mapped);
            }
        }
    }
    pool
}

/// Shuffled AUC of a prediction map against human fixations, with negatives
/// drawn from other images' fixation locations.
pub fn s_auc(
    pred: &impl ScalarMap,
    fix: &FixationSet,
    others: &[&FixationSet],
    spec: &ShuffleSpec,
) -> Result<f64> {
    spec.validate()?;
    let dims = pred.dims();
    if dims != fix.grid_dims() {
        return Err(Error::shape(
            "s_auc",
            format!("{:?}", fix.grid_dims()),
            format!("{:?}", dims),
        ));
    }
    if !fix.is_scorable() {
        return Err(Error::Unscorable {
            image_id: fix.image_id().to_string(),
            reason: "no fixations (empty positive set)".into(),
        });
    }
    let pos: Vec<f64> = fix.points().iter().map(|&(r, c)| pred.grid().at(r, c)).collect();
    let pool = negative_pool(fix, others, dims);
    if pool.is_empty() {
        return Err(Error::Unscorable {
            image_id: fix.image_id().to_string(),
            reason: "empty shuffled negative pool".into(),
        });
    }
    let value_at = |loc: &(usize, usize)| pred.grid().at(loc.0, loc.1);

    match spec.mode {
        ShuffleMode::DeterministicUnion => {
            let neg: Vec<f64> = pool.iter().map(value_at).collect();
            Ok(mann_whitney_auc(&pos, &neg))
        }
        ShuffleMode::MonteCarlo => {
            let mut rng =
                ChaCha8Rng::seed_from_u64(spec.seed ^ hash_image_id(fix.image_id()).rotate_left(17));
            let take = pos.len().min(pool.len());
            let mut total = 0.0;
            for _ in 0..spec.num_shuffles {
                let idx = rand::seq::index::sample(&mut rng, pool.len(), take);
                let neg: Vec<f64> = idx.iter().map(|i| value_at(&pool[i])).collect();
                total += mann_whitney_auc(&pos, &neg);
            }
            Ok(total / spec.num_shuffles as f64)
        }
    }
}

/// Normalize a map to a probability distribution over cells, shifting by
/// `eps` first only when the map contains zeros.
fn to_distribution(grid: &Grid, eps: f64) -> Vec<f64> {
    let shift = if grid.values().iter().any(|&v| v == 0.0) {
        eps
    } else {
        0.0
    };
    normalize_with_shift(grid.values(), shift)
}

/// Information Gain in bits per fixation:
/// IG = (1/|fix|) Σ_f [log₂ p_pred(f) − log₂ p_base(f)].
pub fn info_gain(
    pred: &impl ScalarMap,
    fix: &FixationSet,
    baseline: &DensityMap,
    epsilon_norm: f64,
) -> Result<f64> {
    let dims = pred.dims();
    if dims != fix.grid_dims() || dims != baseline.dims() {
        return Err(Error::shape(
            "info_gain",
            format!("{:?}", fix.grid_dims()),
            format!("pred {:?}, baseline {:?}", dims, baseline.dims()),
        ));
    }
    if !fix.is_scorable() {
        return Err(Error::Unscorable {
            image_id: fix.image_id().to_string(),
            reason: "no fixations".into(),
        });
    }
    let (_, width) = dims;
    let p_pred = to_distribution(pred.grid(), epsilon_norm);
    let p_base = to_distribution(baseline.grid(), epsilon_norm);
    let mut total = 0.0;
    for &(r, c) in fix.points() {
        let i = r * width + c;
        total += p_pred[i].log2() - p_base[i].log2();
    }
    Ok(total / fix.points().len() as f64)
}

/// Accumulate all other-image fixations onto a grid, blur with an isotropic
/// Gaussian, and normalize to sum 1. Used as the IG baseline distribution.
///
/// The blur is a normalized convolution (kernel weights renormalized over the
/// in-grid support), so a spatially uniform fixation pattern stays uniform.
pub fn build_shuffled_baseline(
    others: &[&FixationSet],
    dims: (usize, usize),
    blur_sigma: f64,
) -> Result<DensityMap> {
    if others.is_empty() {
        return Err(Error::InvalidValue("shuffled baseline needs at least one fixation set".into()));
    }
    if blur_sigma < 0.0 || !blur_sigma.is_finite() {
        return Err(Error::InvalidValue("blur_sigma must be finite and >= 0".into()));
    }
    let (h, w) = dims;
    let mut counts = Grid::filled(h, w, 0.0);
    let mut total = 0usize;
    for set in others {
        for &p in set.points() {
            let (r, c) = map_point(p, set.grid_dims(), dims);
            counts.set(r, c, counts.at(r, c) + 1.0);
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::InvalidValue("shuffled baseline: no fixations in the provided sets".into()));
    }

    let blurred = gaussian_blur(&counts, blur_sigma);
    let sum = blurred.sum();
    let values: Vec<f64> = blurred.values().iter().map(|&v| v / sum).collect();
    DensityMap::from_values(h, w, values)
}

/// Default blur for baseline construction: 1/16 of the shorter grid side.
pub fn default_blur_sigma(dims: (usize, usize)) -> f64 {
    dims.0.min(dims.1) as f64 / 16.0
}

fn gaussian_blur(grid: &Grid, sigma: f64) -> Grid {
    if sigma == 0.0 {
        return grid.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let (h, w) = (grid.height() as isize, grid.width() as isize);
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let mut out = Grid::filled(grid.height(), grid.width(), 0.0);
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            let mut weight = 0.0;
            for dr in -radius..=radius {
                let rr = r + dr;
                if rr < 0 || rr >= h {
                    continue;
                }
                for dc in -radius..=radius {
                    let cc = c + dc;
                    if cc < 0 || cc >= w {
                        continue;
                    }
                    let k = kernel[(dr + radius) as usize] * kernel[(dc + radius) as usize];
                    acc += k * grid.at(rr as usize, cc as usize);
                    weight += k;
                }
            }
            out.set(r as usize, c as usize, acc / weight);
        }
    }
    out
}

/// The highest-valued cells of a map, usable as surrogate fixations for
/// map-vs-map correlation. Ties break by (row, col) order.
pub fn pseudo_fixations(
    map: &AttentionMap,
    top_fraction: f64,
    image_id: impl Into<String>,
) -> Result<FixationSet> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::InvalidConfig("top_fraction must lie in (0, 1]".into()));
    }
    let g = map.grid();
    let count = ((top_fraction * g.len() as f64).ceil() as usize).clamp(1, g.len());
    let mut cells: Vec<(usize, usize)> = (0..g.height())
        .flat_map(|r| (0..g.width()).map(move |c| (r, c)))
        .collect();
    cells.sort_by(|&(r1, c1), &(r2, c2)| {
        g.at(r2, c2)
            .partial_cmp(&g.at(r1, c1))
            .expect("finite values")
            .then(r1.cmp(&r2))
            .then(c1.cmp(&c2))
    });
    cells.truncate(count);
    FixationSet::new(image_id, cells, g.height(), g.width())
}
