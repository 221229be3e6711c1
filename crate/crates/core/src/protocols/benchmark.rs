//! End-to-end benchmark: train every baseline on the synthetic task, score
//! task metrics, gaze-correlation metrics, grouped correlation analyses, and
//! (optionally) FGSM robustness, emitting the comparison tables.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::adversarial::{evaluate_robustness, AttackConfig};
use crate::attention::AttentionKind;
use crate::error::{Error, Result};
use crate::gaze::{
    build_shuffled_baseline, default_blur_sigma, info_gain, s_auc, FixationSet, ShuffleSpec,
};
use crate::io::{
    load_density, load_fixations, load_grid, save_fixations, save_grid_csv, Manifest,
    ManifestEntry, ManifestGlobal,
};
use crate::model::{
    forward_sample, train, ModelParams, SyntheticDataset, SyntheticSample, TrainConfig,
};
use crate::protocols::{
    correlation_table, CorrelationContext, EvalRecord, GroupingMode, GroupingSpec,
    WithinGroupProtocol,
};
use crate::report::ReportTable;
use crate::tensor::{DensityMap, FeatureMap, ScalarMap};

/// Full benchmark configuration. `train_template` carries the optimizer and
/// schedule shared by every baseline; the attention kind is substituted per
/// baseline.
#[derive(Debug, Clone, Serialize)]
pub struct BenchConfig {
    pub seed: u64,
    pub baselines: Vec<AttentionKind>,
    pub train_template: TrainConfig,
    pub shuffle: ShuffleSpec,
    pub epsilon_norm: f64,
    /// FGSM budget; robustness evaluation runs only when set.
    pub fgsm_epsilon: Option<f64>,
    /// Group size for the top/bottom analysis.
    pub grouping_k: usize,
    /// Fraction of cells used as pseudo-fixations in pairwise mode.
    pub top_fraction: f64,
    /// Gaussian blur for the IG shuffled baseline; None = min(grid)/16.
    pub blur_sigma: Option<f64>,
    pub jobs: usize,
}

impl BenchConfig {
    pub fn new(seed: u64) -> Self {
        let mut template = TrainConfig::new(AttentionKind::Sigmoid);
        template.seed = seed;
        BenchConfig {
            seed,
            baselines: AttentionKind::ALL.to_vec(),
            train_template: template,
            shuffle: ShuffleSpec::deterministic(),
            epsilon_norm: 1e-9,
            fgsm_epsilon: None,
            grouping_k: 10,
            top_fraction: 0.05,
            blur_sigma: None,
            jobs: 1,
        }
    }

    pub fn config_hash(&self) -> String {
        let body = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(body.as_bytes());
        let digest = hasher.finalize();
        format!("{:x}", digest)[..16].to_string()
    }

    fn train_config_for(&self, kind: AttentionKind) -> TrainConfig {
        let mut cfg = self.train_template;
        cfg.attention.kind = kind;
        cfg.seed = self.seed;
        cfg
    }
}

/// A dataset ready for the benchmark: train and test splits plus the input
/// intensity range for attacks.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub train: Vec<SyntheticSample>,
    pub test: Vec<SyntheticSample>,
    pub num_classes: usize,
    pub intensity_range: (f64, f64),
}

impl LoadedDataset {
    pub fn from_synthetic(dataset: &SyntheticDataset, train_count: usize) -> Self {
        let (train, test) = dataset.split(train_count);
        LoadedDataset {
            train: train.to_vec(),
            test: test.to_vec(),
            num_classes: dataset.num_classes,
            intensity_range: dataset.intensity_range,
        }
    }
}

#[derive(Debug)]
pub struct BenchOutcome {
    pub tables: Vec<ReportTable>,
    pub warnings: Vec<String>,
    pub models: Vec<(TrainConfig, ModelParams)>,
}

struct BaselineRun {
    kind: AttentionKind,
    config: TrainConfig,
    params: ModelParams,
    /// Absent when the baseline came from a checkpoint instead of training.
    initial_loss: Option<f64>,
    final_loss: Option<f64>,
    accuracy: f64,
    mean_true_prob: f64,
    records: Vec<EvalRecord>,
    warnings: Vec<String>,
}

fn run_baseline(
    kind: AttentionKind,
    cfg: &BenchConfig,
    data: &LoadedDataset,
    pretrained: Option<&ModelParams>,
) -> Result<BaselineRun> {
    let config = cfg.train_config_for(kind);
    let (params, initial_loss, final_loss) = match pretrained {
        Some(params) => {
            if params.steps_trained == 0 {
                return Err(Error::UntrainedModel);
            }
            (params.clone(), None, None)
        }
        None => {
            let outcome = train(&data.train, &config)?;
            (outcome.params, Some(outcome.initial_loss), Some(outcome.final_loss))
        }
    };
    let mut warnings = Vec::new();

    // per-image evaluation; parallel over images when a pool is active, with
    // the ordered collect keeping the aggregation deterministic
    let evaluate = |sample: &SyntheticSample| -> Result<(f64, bool, Option<EvalRecord>)> {
        let pass = forward_sample(&params, sample, &config)?;
        let predicted = pass.predicted_label();
        let true_prob = pass.class_probs()[sample.label];
        let record = pass.attention_map().map(|attention| EvalRecord {
            image_id: sample.id.clone(),
            kind,
            attention,
            task_score: Some(true_prob),
            correct: Some(predicted == sample.label),
        });
        Ok((true_prob, predicted == sample.label, record))
    };
    let evaluated: Vec<(f64, bool, Option<EvalRecord>)> = if cfg.jobs > 1 {
        use rayon::prelude::*;
        data.test.par_iter().map(evaluate).collect::<Result<Vec<_>>>()?
    } else {
        data.test.iter().map(evaluate).collect::<Result<Vec<_>>>()?
    };

    let mut records = Vec::with_capacity(data.test.len());
    let mut correct = 0usize;
    let mut prob_total = 0.0;
    for (sample, (true_prob, is_correct, record)) in data.test.iter().zip(evaluated) {
        prob_total += true_prob;
        correct += usize::from(is_correct);
        match record {
            Some(r) => records.push(r),
            None => warnings.push(format!("{kind}: no attention map for {}", sample.id)),
        }
    }
    Ok(BaselineRun {
        kind,
        config,
        params,
        initial_loss,
        final_loss,
        accuracy: correct as f64 / data.test.len() as f64,
        mean_true_prob: prob_total / data.test.len() as f64,
        records,
        warnings,
    })
}

fn stamp(table: ReportTable, cfg: &BenchConfig, timestamp: &str) -> ReportTable {
    table
        .with_metadata("seed", cfg.seed)
        .with_metadata("config_hash", cfg.config_hash())
        .with_metadata("timestamp", timestamp)
}

/// Run the benchmark on a prepared dataset. Deterministic given (config,
/// dataset): per-baseline pipelines are independent, and every aggregation
/// is an ordered reduction.
pub fn run_benchmark(data: &LoadedDataset, cfg: &BenchConfig) -> Result<BenchOutcome> {
    run_benchmark_with(data, cfg, &[])
}

/// Like [`run_benchmark`], but baselines present in `pretrained` reuse the
/// given parameters (a loaded checkpoint) instead of training; their
/// training-loss cells come out as n/a.
pub fn run_benchmark_with(
    data: &LoadedDataset,
    cfg: &BenchConfig,
    pretrained: &[(AttentionKind, ModelParams)],
) -> Result<BenchOutcome> {
    if data.train.is_empty() || data.test.is_empty() {
        return Err(Error::InvalidValue("benchmark needs nonempty train and test splits".into()));
    }
    let timestamp = format!(
        "unix:{}",
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
    );
    let mut warnings = Vec::new();

    let params_for = |kind: AttentionKind| {
        pretrained.iter().find(|(k, _)| *k == kind).map(|(_, p)| p)
    };
    // per-baseline pipelines are independent; run them on a pool when asked
    let runs: Vec<BaselineRun> = if cfg.jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?;
        pool.install(|| {
            cfg.baselines
                .par_iter()
                .map(|&kind| run_baseline(kind, cfg, data, params_for(kind)))
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        cfg.baselines
            .iter()
            .map(|&kind| run_baseline(kind, cfg, data, params_for(kind)))
            .collect::<Result<Vec<_>>>()?
    };

    for run in &runs {
        warnings.extend(run.warnings.iter().cloned());
    }

    // gaze scoring context: human fixations of the test split, and per-image
    // IG baselines built from the *other* images' fixations
    let fixations: Vec<FixationSet> =
        data.test.iter().map(|s| s.gaze_fixations.clone()).collect();
    let dims = fixations
        .first()
        .map(|f| f.grid_dims())
        .unwrap_or((1, 1));
    let blur = cfg.blur_sigma.unwrap_or_else(|| default_blur_sigma(dims));
    let mut ig_baselines: Vec<(String, DensityMap)> = Vec::with_capacity(fixations.len());
    for fix in &fixations {
        let others: Vec<&FixationSet> = fixations
            .iter()
            .filter(|f| f.image_id() != fix.image_id())
            .collect();
        if others.is_empty() {
            warnings.push(format!(
                "no other images to build an IG baseline for {}",
                fix.image_id()
            ));
            continue;
        }
        ig_baselines.push((
            fix.image_id().to_string(),
            build_shuffled_baseline(&others, dims, blur)?,
        ));
    }
    let ctx = CorrelationContext {
        fixations: &fixations,
        ig_baselines: &ig_baselines,
        shuffle: cfg.shuffle,
        epsilon_norm: cfg.epsilon_norm,
    };

    let mut tables = Vec::new();
    let baseline_names: Vec<String> = runs.iter().map(|r| r.kind.name().to_string()).collect();

    // Table: task performance (accuracy plus the training-loss contract)
    let mut task = ReportTable::new(
        "task performance",
        baseline_names.clone(),
        vec![
            "accuracy".into(),
            "mean_true_class_prob".into(),
            "initial_train_loss".into(),
            "final_train_loss".into(),
            "loss_ratio".into(),
        ],
    );
    for (row, run) in runs.iter().enumerate() {
        task.set(row, 0, run.accuracy);
        task.set(row, 1, run.mean_true_prob);
        if let (Some(initial), Some(final_)) = (run.initial_loss, run.final_loss) {
            task.set(row, 2, initial);
            task.set(row, 3, final_);
            task.set(row, 4, final_ / initial);
        }
    }
    tables.push(stamp(task, cfg, &timestamp));

    // Table: gaze correlation (mean s-AUC and IG vs human fixations)
    let mut gaze = ReportTable::new(
        "gaze correlation",
        baseline_names.clone(),
        vec!["s_auc".into(), "ig".into()],
    );
    let all_fix: Vec<&FixationSet> = fixations.iter().collect();
    for (row, run) in runs.iter().enumerate() {
        let mut aucs = Vec::new();
        let mut igs = Vec::new();
        for record in &run.records {
            let Some(fix) = fixations.iter().find(|f| f.image_id() == record.image_id) else {
                continue;
            };
            match s_auc(&record.attention, fix, &all_fix, &cfg.shuffle) {
                Ok(v) => aucs.push(v),
                Err(e) => warnings.push(format!("{}: s-AUC failed: {e}", run.kind)),
            }
            if let Some((_, baseline)) =
                ig_baselines.iter().find(|(id, _)| id == &record.image_id)
            {
                match info_gain(&record.attention, fix, baseline, cfg.epsilon_norm) {
                    Ok(v) => igs.push(v),
                    Err(e) => warnings.push(format!("{}: IG failed: {e}", run.kind)),
                }
            }
        }
        if !aucs.is_empty() {
            gaze.set(row, 0, aucs.iter().sum::<f64>() / aucs.len() as f64);
        }
        if !igs.is_empty() {
            gaze.set(row, 1, igs.iter().sum::<f64>() / igs.len() as f64);
        }
    }
    let gaze = stamp(gaze, cfg, &timestamp)
        .with_metadata("blur_sigma", blur)
        .with_metadata("shuffle_mode", format!("{:?}", cfg.shuffle.mode))
        .with_metadata("fixation_source", "discrete fixation points");
    tables.push(gaze);

    // Tables: grouped correlation analyses under both interpretations
    let all_records: Vec<EvalRecord> =
        runs.iter().flat_map(|r| r.records.iter().cloned()).collect();
    let groupings = [
        (
            "grouped correlation top-bottom vs-human",
            GroupingSpec {
                mode: GroupingMode::TopBottomK(cfg.grouping_k),
                protocol: WithinGroupProtocol::VsHuman,
            },
        ),
        (
            "grouped correlation top-bottom pairwise-pseudo",
            GroupingSpec {
                mode: GroupingMode::TopBottomK(cfg.grouping_k),
                protocol: WithinGroupProtocol::PairwisePseudo {
                    top_fraction: cfg.top_fraction,
                },
            },
        ),
        (
            "grouped correlation positive-negative vs-human",
            GroupingSpec {
                mode: GroupingMode::PositiveNegative,
                protocol: WithinGroupProtocol::VsHuman,
            },
        ),
        (
            "grouped correlation positive-negative pairwise-pseudo",
            GroupingSpec {
                mode: GroupingMode::PositiveNegative,
                protocol: WithinGroupProtocol::PairwisePseudo {
                    top_fraction: cfg.top_fraction,
                },
            },
        ),
    ];
    for (title, spec) in groupings {
        let (table, mut extra) = correlation_table(title, &all_records, &spec, &ctx)?;
        warnings.append(&mut extra);
        tables.push(stamp(table, cfg, &timestamp));
    }

    // Table: fooling rates under FGSM
    let models: Vec<(TrainConfig, ModelParams)> =
        runs.iter().map(|r| (r.config, r.params.clone())).collect();
    if let Some(eps) = cfg.fgsm_epsilon {
        let attack = AttackConfig::new(eps, data.intensity_range)?;
        let rows = evaluate_robustness(&models, &data.test, &attack)?;
        let mut fooling = ReportTable::new(
            "fooling rates",
            baseline_names,
            vec!["clean_accuracy".into(), "fooling_rate".into()],
        );
        for (row, r) in rows.iter().enumerate() {
            fooling.set(row, 0, r.clean_accuracy);
            fooling.set(row, 1, r.fooling_rate);
        }
        let fooling = stamp(fooling, cfg, &timestamp)
            .with_metadata("fgsm_epsilon", eps)
            .with_metadata("clamp_range", format!("{:?}", data.intensity_range))
            .with_metadata("attack", "untargeted FGSM at the true label");
        tables.push(fooling);
    }

    Ok(BenchOutcome {
        tables,
        warnings,
        models,
    })
}

// ---------------------------------------------------------------------------
// dataset files
// ---------------------------------------------------------------------------

/// Write a synthetic dataset as manifest + per-sample CSV files. The first
/// `train_count` samples are marked as the training split.
pub fn write_synthetic_dataset(
    dataset: &SyntheticDataset,
    dir: &Path,
    train_count: usize,
    seed: u64,
) -> Result<PathBuf> {
    for sub in ["images", "densities", "fixations"] {
        std::fs::create_dir_all(dir.join(sub)).map_err(|e| Error::io(dir.join(sub), e))?;
    }
    let mut entries = Vec::with_capacity(dataset.samples.len());
    for (i, sample) in dataset.samples.iter().enumerate() {
        let image_rel = format!("images/{}.csv", sample.id);
        let density_rel = format!("densities/{}.csv", sample.id);
        let fixation_rel = format!("fixations/{}.csv", sample.id);
        save_grid_csv(&sample.image.channel(0), &dir.join(&image_rel))?;
        save_grid_csv(sample.gaze_density.grid(), &dir.join(&density_rel))?;
        save_fixations(&[&sample.gaze_fixations], &dir.join(&fixation_rel))?;

        let mut entry = ManifestEntry::new(&sample.id);
        entry.image_path = Some(image_rel);
        entry.density_path = Some(density_rel);
        entry.fixation_path = Some(fixation_rel);
        entry.label = Some(sample.label);
        entry.split = Some(if i < train_count { "train" } else { "test" }.into());
        entries.push(entry);
    }
    let manifest = Manifest::new(
        ManifestGlobal {
            grid_height: dataset.grid,
            grid_width: dataset.grid,
            seed,
            num_classes: Some(dataset.num_classes),
            blur_sigma: None,
            intensity_range: Some(dataset.intensity_range),
        },
        entries,
    );
    let path = dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}

/// Rebuild a benchmark dataset from a manifest written by
/// [`write_synthetic_dataset`] (or an equivalent hand-written one). Entries
/// need image, label, density, and fixations; inconsistencies are reported
/// with the offending ids.
pub fn dataset_from_manifest(manifest: &Manifest) -> Result<LoadedDataset> {
    let dims = (manifest.global.grid_height, manifest.global.grid_width);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut max_label = 0usize;
    for entry in &manifest.entries {
        let missing: Vec<&str> = [
            ("image_path", entry.image_path.is_none()),
            ("label", entry.label.is_none()),
            ("density_path", entry.density_path.is_none()),
            ("fixation_path", entry.fixation_path.is_none()),
        ]
        .iter()
        .filter(|(_, m)| *m)
        .map(|(n, _)| *n)
        .collect();
        if !missing.is_empty() {
            return Err(Error::Manifest(format!(
                "entry {:?} cannot join the benchmark: missing {}",
                entry.id,
                missing.join(", ")
            )));
        }
        let (image_grid, _) = load_grid(&manifest.resolve(entry.image_path.as_ref().unwrap()))?;
        if image_grid.dims() != dims {
            return Err(Error::Manifest(format!(
                "entry {:?}: image dims {:?} disagree with manifest grid {:?}",
                entry.id,
                image_grid.dims(),
                dims
            )));
        }
        let image = FeatureMap::new(
            image_grid.height(),
            image_grid.width(),
            1,
            image_grid.values().to_vec(),
        )?;
        let density = load_density(&manifest.resolve(entry.density_path.as_ref().unwrap()))?;
        if density.dims() != dims {
            return Err(Error::Manifest(format!(
                "entry {:?}: density dims {:?} disagree with manifest grid {:?}",
                entry.id,
                density.dims(),
                dims
            )));
        }
        let sets = load_fixations(
            &manifest.resolve(entry.fixation_path.as_ref().unwrap()),
            Some(dims),
        )?;
        let fixations = sets
            .into_iter()
            .find(|s| s.image_id() == entry.id)
            .ok_or_else(|| {
                Error::Manifest(format!(
                    "entry {:?}: fixation file carries no set for this image id",
                    entry.id
                ))
            })?;
        let label = entry.label.unwrap();
        max_label = max_label.max(label);
        let sample = SyntheticSample {
            id: entry.id.clone(),
            image,
            label,
            gaze_density: density,
            gaze_fixations: fixations,
            patch_origin: None,
        };
        match entry.split.as_deref() {
            Some("train") => train.push(sample),
            Some("test") | None => test.push(sample),
            Some(other) => {
                return Err(Error::Manifest(format!(
                    "entry {:?}: unknown split {other:?} (expected train or test)",
                    entry.id
                )))
            }
        }
    }
    let num_classes = manifest.global.num_classes.unwrap_or(max_label + 1).max(max_label + 1).max(2);
    Ok(LoadedDataset {
        train,
        test,
        num_classes,
        intensity_range: manifest.global.intensity_range.unwrap_or((-3.0, 3.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_synthetic_task, SyntheticTaskConfig};

    fn small_config() -> BenchConfig {
        let mut cfg = BenchConfig::new(0);
        cfg.train_template.steps = 12;
        cfg.train_template.batch_size = 16;
        cfg.grouping_k = 4;
        cfg
    }

    #[test]
    fn empty_baseline_list_emits_valid_schema() {
        let data = generate_synthetic_task(&SyntheticTaskConfig::new(4, 10, 48, 2)).unwrap();
        let loaded = LoadedDataset::from_synthetic(&data, 32);
        let mut cfg = small_config();
        cfg.baselines.clear();
        let outcome = run_benchmark(&loaded, &cfg).unwrap();
        assert_eq!(outcome.tables.len(), 6);
        for table in &outcome.tables {
            assert!(table.validate().is_ok());
            assert!(table.row_labels.is_empty());
        }
    }

    #[test]
    fn benchmark_smoke_produces_all_rows_and_is_deterministic() {
        let data = generate_synthetic_task(&SyntheticTaskConfig::new(4, 10, 60, 0)).unwrap();
        let loaded = LoadedDataset::from_synthetic(&data, 40);
        let mut cfg = small_config();
        cfg.baselines = vec![AttentionKind::Sigmoid, AttentionKind::Human];
        cfg.fgsm_epsilon = Some(0.1);
        let a = run_benchmark(&loaded, &cfg).unwrap();
        assert_eq!(a.tables.len(), 7);
        let task = &a.tables[0];
        assert_eq!(task.row_labels, vec!["sigmoid".to_string(), "human".to_string()]);
        let b = run_benchmark(&loaded, &cfg).unwrap();
        for (ta, tb) in a.tables.iter().zip(&b.tables) {
            assert_eq!(ta.to_csv(), tb.to_csv());
            assert_eq!(ta.determinism_hash(), tb.determinism_hash());
        }
    }

    #[test]
    fn jobs_parallelism_does_not_change_results() {
        let data = generate_synthetic_task(&SyntheticTaskConfig::new(4, 10, 48, 3)).unwrap();
        let loaded = LoadedDataset::from_synthetic(&data, 32);
        let mut cfg = small_config();
        cfg.baselines = vec![AttentionKind::Sigmoid, AttentionKind::Softmax, AttentionKind::Human];
        let serial = run_benchmark(&loaded, &cfg).unwrap();
        cfg.jobs = 3;
        let parallel = run_benchmark(&loaded, &cfg).unwrap();
        for (a, b) in serial.tables.iter().zip(&parallel.tables) {
            assert_eq!(a.to_csv(), b.to_csv());
        }
    }

    #[test]
    fn synthetic_dataset_round_trips_through_manifest() {
        let data = generate_synthetic_task(&SyntheticTaskConfig::new(4, 10, 12, 5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest_path = write_synthetic_dataset(&data, dir.path(), 8, 5).unwrap();
        let manifest = Manifest::load(&manifest_path).unwrap();
        let loaded = dataset_from_manifest(&manifest).unwrap();
        assert_eq!(loaded.train.len(), 8);
        assert_eq!(loaded.test.len(), 4);
        assert_eq!(loaded.num_classes, 4);
        for (orig, back) in data.samples.iter().zip(loaded.train.iter().chain(&loaded.test)) {
            assert_eq!(orig.id, back.id);
            assert_eq!(orig.label, back.label);
            assert_eq!(orig.gaze_fixations.points(), back.gaze_fixations.points());
            for (a, b) in orig.image.values().iter().zip(back.image.values()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
