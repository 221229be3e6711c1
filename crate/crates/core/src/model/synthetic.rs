//! Desk-scale synthetic classification task with per-sample gaze.
//!
//! Each image carries one class-determining textured patch at a random
//! location, a couple of lower-amplitude distractor patches painted with
//! other classes' textures, and pixel noise. The gaze density is an
//! isotropic Gaussian centered on the informative patch, and fixations are
//! seeded draws from that density, so "looking at the right place" genuinely
//! identifies the class-relevant evidence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::gaze::FixationSet;
use crate::tensor::{DensityMap, FeatureMap, Grid, ScalarMap};

/// Number of distinct class textures available.
pub const MAX_CLASSES: usize = 8;

#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub id: String,
    pub image: FeatureMap,
    pub label: usize,
    pub gaze_density: DensityMap,
    pub gaze_fixations: FixationSet,
    /// Top-left corner of the informative patch; absent for samples loaded
    /// from manifests.
    pub patch_origin: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub samples: Vec<SyntheticSample>,
    pub num_classes: usize,
    pub grid: usize,
    pub in_channels: usize,
    pub patch_size: usize,
    /// Valid input intensity range, used as the FGSM clamp range.
    pub intensity_range: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticTaskConfig {
    pub num_classes: usize,
    pub grid: usize,
    pub samples: usize,
    pub seed: u64,
    pub patch_size: usize,
    pub num_distractors: usize,
    pub distractor_amplitude: f64,
    pub noise_sigma: f64,
    pub gaze_sigma: f64,
    pub fixations_per_sample: usize,
}

impl SyntheticTaskConfig {
    pub fn new(num_classes: usize, grid: usize, samples: usize, seed: u64) -> Self {
        SyntheticTaskConfig {
            num_classes,
            grid,
            samples,
            seed,
            patch_size: 4,
            num_distractors: 2,
            distractor_amplitude: 0.55,
            noise_sigma: 0.20,
            gaze_sigma: 1.6,
            fixations_per_sample: 12,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::InvalidConfig("synthetic task needs >= 2 classes".into()));
        }
        if self.num_classes > MAX_CLASSES {
            return Err(Error::InvalidConfig(format!(
                "synthetic task supports at most {MAX_CLASSES} classes"
            )));
        }
        if self.samples == 0 {
            return Err(Error::InvalidConfig("synthetic task needs >= 1 sample".into()));
        }
        if self.grid < self.patch_size + 2 {
            return Err(Error::InvalidConfig("grid too small for the patch".into()));
        }
        if self.fixations_per_sample == 0 {
            return Err(Error::InvalidConfig("need >= 1 fixation per sample".into()));
        }
        Ok(())
    }
}

/// Class texture value at a patch-relative cell, in {-1, +1}.
fn class_texture(class: usize, r: usize, c: usize) -> f64 {
    let sign = |b: bool| if b { 1.0 } else { -1.0 };
    match class {
        0 => 1.0,
        1 => sign(c % 2 == 0),
        2 => sign(r % 2 == 0),
        3 => sign((r + c) % 2 == 0),
        4 => -1.0,
        5 => sign((r + c) % 2 == 1),
        6 => sign(c % 2 == 1),
        7 => sign(r % 2 == 1),
        _ => unreachable!("validated class count"),
    }
}

fn paint_patch(
    image: &mut FeatureMap,
    origin: (usize, usize),
    size: usize,
    class: usize,
    amplitude: f64,
) {
    for r in 0..size {
        for c in 0..size {
            let v = amplitude * class_texture(class, r, c);
            for d in 0..image.channels() {
                let cur = image.at(origin.0 + r, origin.1 + c, d);
                image.set(origin.0 + r, origin.1 + c, d, cur + v);
            }
        }
    }
}

fn overlaps(a: (usize, usize), b: (usize, usize), size: usize) -> bool {
    a.0 < b.0 + size && b.0 < a.0 + size && a.1 < b.1 + size && b.1 < a.1 + size
}

pub fn generate_synthetic_task(cfg: &SyntheticTaskConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_sigma)
        .map_err(|_| Error::InvalidConfig("noise sigma must be finite and >= 0".into()))?;
    let k = cfg.grid;
    let max_origin = k - cfg.patch_size;
    let in_channels = 1;

    let mut samples = Vec::with_capacity(cfg.samples);
    for idx in 0..cfg.samples {
        let label = rng.gen_range(0..cfg.num_classes);
        let origin = (rng.gen_range(0..=max_origin), rng.gen_range(0..=max_origin));

        let mut image = FeatureMap::zeros(k, k, in_channels);
        for v in image.values_mut() {
            *v = noise.sample(&mut rng);
        }

        let amplitude = rng.gen_range(0.8..1.2);
        paint_patch(&mut image, origin, cfg.patch_size, label, amplitude);

        for _ in 0..cfg.num_distractors {
            let other: usize = {
                let raw = rng.gen_range(0..cfg.num_classes - 1);
                if raw >= label {
                    raw + 1
                } else {
                    raw
                }
            };
            // place away from the informative patch; give up after a bounded
            // number of tries so generation always terminates
            let mut placed = None;
            for _ in 0..24 {
                let candidate = (rng.gen_range(0..=max_origin), rng.gen_range(0..=max_origin));
                if !overlaps(candidate, origin, cfg.patch_size) {
                    placed = Some(candidate);
                    break;
                }
            }
            if let Some(at) = placed {
                let amp = cfg.distractor_amplitude * rng.gen_range(0.8..1.2);
                paint_patch(&mut image, at, cfg.patch_size, other, amp);
            }
        }

        // gaze: isotropic Gaussian centered on the informative patch
        let center = (
            origin.0 as f64 + (cfg.patch_size - 1) as f64 / 2.0,
            origin.1 as f64 + (cfg.patch_size - 1) as f64 / 2.0,
        );
        let mut density = Grid::filled(k, k, 0.0);
        for r in 0..k {
            for c in 0..k {
                let d2 = (r as f64 - center.0).powi(2) + (c as f64 - center.1).powi(2);
                density.set(r, c, (-d2 / (2.0 * cfg.gaze_sigma * cfg.gaze_sigma)).exp());
            }
        }
        let gaze_density = DensityMap::new(density)?;

        // seeded draws from the density
        let total = gaze_density.grid().sum();
        let cumulative: Vec<f64> = gaze_density
            .grid()
            .values()
            .iter()
            .scan(0.0, |acc, &v| {
                *acc += v / total;
                Some(*acc)
            })
            .collect();
        let points: Vec<(usize, usize)> = (0..cfg.fixations_per_sample)
            .map(|_| {
                let u: f64 = rng.gen();
                let i = cumulative.partition_point(|&cv| cv < u).min(k * k - 1);
                (i / k, i % k)
            })
            .collect();
        let id = format!("sample{idx:04}");
        let gaze_fixations = FixationSet::new(&id, points, k, k)?;

        samples.push(SyntheticSample {
            id,
            image,
            label,
            gaze_density,
            gaze_fixations,
            patch_origin: Some(origin),
        });
    }

    Ok(SyntheticDataset {
        samples,
        num_classes: cfg.num_classes,
        grid: k,
        in_channels,
        patch_size: cfg.patch_size,
        intensity_range: (-3.0, 3.0),
    })
}

impl SyntheticDataset {
    /// Deterministic train/test partition: the first `train` samples train,
    /// the rest test. Samples are i.i.d. draws, so a prefix split is unbiased.
    pub fn split(&self, train: usize) -> (&[SyntheticSample], &[SyntheticSample]) {
        let cut = train.min(self.samples.len());
        (&self.samples[..cut], &self.samples[cut..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_gives_identical_datasets() {
        let cfg = SyntheticTaskConfig::new(4, 12, 20, 7);
        let a = generate_synthetic_task(&cfg).unwrap();
        let b = generate_synthetic_task(&cfg).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.image.values(), y.image.values());
            assert_eq!(x.label, y.label);
            assert_eq!(x.gaze_fixations.points(), y.gaze_fixations.points());
        }
    }

    #[test]
    fn gaze_density_peaks_inside_informative_patch() {
        let cfg = SyntheticTaskConfig::new(4, 12, 50, 3);
        let data = generate_synthetic_task(&cfg).unwrap();
        for s in &data.samples {
            let g = s.gaze_density.grid();
            let mut best = (0, 0);
            for r in 0..g.height() {
                for c in 0..g.width() {
                    if g.at(r, c) > g.at(best.0, best.1) {
                        best = (r, c);
                    }
                }
            }
            let (pr, pc) = s.patch_origin.unwrap();
            assert!(best.0 >= pr && best.0 < pr + cfg.patch_size);
            assert!(best.1 >= pc && best.1 < pc + cfg.patch_size);
        }
    }

    #[test]
    fn labels_are_roughly_balanced() {
        let cfg = SyntheticTaskConfig::new(4, 12, 600, 9);
        let data = generate_synthetic_task(&cfg).unwrap();
        let mut counts = vec![0usize; 4];
        for s in &data.samples {
            counts[s.label] += 1;
        }
        // majority-class accuracy should sit near 1/num_classes
        let majority = *counts.iter().max().unwrap() as f64 / data.samples.len() as f64;
        assert!((majority - 0.25).abs() < 0.05, "majority fraction {majority}");
    }

    #[test]
    fn config_validation() {
        assert!(generate_synthetic_task(&SyntheticTaskConfig::new(1, 12, 5, 0)).is_err());
        assert!(generate_synthetic_task(&SyntheticTaskConfig::new(9, 12, 5, 0)).is_err());
        assert!(generate_synthetic_task(&SyntheticTaskConfig::new(4, 4, 5, 0)).is_err());
    }
}
