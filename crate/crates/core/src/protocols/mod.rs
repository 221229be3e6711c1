//! Comparative experimental protocols: cross-validation splits, grouped
//! correlation analyses between attention maps and human gaze, and the full
//! benchmark runner ([`run_benchmark`]).
//!
//! The grouped analyses implement two explicit readings of "correlation
//! between attentions of the best and worst cases", since the source
//! protocol leaves it open:
//! - `vs_human`: each group's maps are scored against that image's human
//!   fixations (s-AUC and IG), then averaged within the group;
//! - `pairwise_pseudo`: within a group, every ordered map pair (i, j) scores
//!   map_i against pseudo-fixations extracted from map_j.
//! Every emitted table is labeled with the reading used.

mod benchmark;

pub use benchmark::{
    dataset_from_manifest, run_benchmark, run_benchmark_with, write_synthetic_dataset, BenchConfig,
    BenchOutcome, LoadedDataset,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attention::AttentionKind;
use crate::error::{Error, Result};
use crate::gaze::{info_gain, pseudo_fixations, s_auc, FixationSet, ShuffleSpec};
use crate::report::ReportTable;
use crate::tensor::{AttentionMap, DensityMap};

/// Per-image, per-baseline evaluation outcome carried into the protocols.
#[derive(Debug, Clone)]
pub struct EvalRecord {
    pub image_id: String,
    pub kind: AttentionKind,
    pub attention: AttentionMap,
    /// Ranking metric (task performance) for top/bottom grouping.
    pub task_score: Option<f64>,
    /// Correctness flag for positive/negative grouping.
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupingMode {
    /// Best k and worst k records by task score (ties break by image id).
    TopBottomK(usize),
    /// Correctly vs incorrectly classified records.
    PositiveNegative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WithinGroupProtocol {
    /// Score each map against its own image's human fixations.
    VsHuman,
    /// Score each map against pseudo-fixations from every other map in the
    /// group (ordered pairs).
    PairwisePseudo { top_fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupingSpec {
    pub mode: GroupingMode,
    pub protocol: WithinGroupProtocol,
}

impl GroupingSpec {
    pub fn validate(&self) -> Result<()> {
        if let GroupingMode::TopBottomK(k) = self.mode {
            if k == 0 {
                return Err(Error::InvalidConfig("top/bottom k must be >= 1".into()));
            }
        }
        if let WithinGroupProtocol::PairwisePseudo { top_fraction } = self.protocol {
            if !(top_fraction > 0.0 && top_fraction <= 1.0) {
                return Err(Error::InvalidConfig("top_fraction must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn interpretation_label(&self) -> String {
        let mode = match self.mode {
            GroupingMode::TopBottomK(k) => format!("top-bottom-{k}"),
            GroupingMode::PositiveNegative => "positive-negative".into(),
        };
        let protocol = match self.protocol {
            WithinGroupProtocol::VsHuman => "vs-human".to_string(),
            WithinGroupProtocol::PairwisePseudo { top_fraction } => {
                format!("pairwise-pseudo(top_fraction={top_fraction})")
            }
        };
        format!("{mode}/{protocol}")
    }
}

/// Seeded k-fold partition: shuffle, deal near-equal folds (larger folds
/// first), use each fold once as validation.
pub fn kfold_split<T: Clone>(ids: &[T], k: usize, seed: u64) -> Result<Vec<(Vec<T>, Vec<T>)>> {
    if k < 2 {
        return Err(Error::InvalidConfig("k-fold needs k >= 2".into()));
    }
    if ids.len() < k {
        return Err(Error::InvalidValue(format!(
            "cannot split {} ids into {k} folds",
            ids.len()
        )));
    }
    let mut shuffled: Vec<T> = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let base = ids.len() / k;
    let remainder = ids.len() % k;
    let mut folds: Vec<Vec<T>> = Vec::with_capacity(k);
    let mut cursor = 0usize;
    for fold_idx in 0..k {
        let size = base + usize::from(fold_idx < remainder);
        folds.push(shuffled[cursor..cursor + size].to_vec());
        cursor += size;
    }

    Ok((0..k)
        .map(|validation_idx| {
            let validation = folds[validation_idx].clone();
            let train: Vec<T> = folds
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != validation_idx)
                .flat_map(|(_, f)| f.iter().cloned())
                .collect();
            (train, validation)
        })
        .collect())
}

struct GroupScores {
    s_auc: Option<f64>,
    info_gain: Option<f64>,
    s_auc_sym: Option<f64>,
    info_gain_sym: Option<f64>,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Inputs shared by every group evaluation: the human fixations per image,
/// the pooled negative sets for s-AUC, and the IG baseline per image.
pub struct CorrelationContext<'a> {
    pub fixations: &'a [FixationSet],
    pub ig_baselines: &'a [(String, DensityMap)],
    pub shuffle: ShuffleSpec,
    pub epsilon_norm: f64,
}

impl<'a> CorrelationContext<'a> {
    fn fixations_for(&self, image_id: &str) -> Option<&FixationSet> {
        self.fixations.iter().find(|f| f.image_id() == image_id)
    }

    fn baseline_for(&self, image_id: &str) -> Option<&DensityMap> {
        self.ig_baselines
            .iter()
            .find(|(id, _)| id == image_id)
            .map(|(_, d)| d)
    }

    fn all_fixations(&self) -> Vec<&FixationSet> {
        self.fixations.iter().collect()
    }
}

fn score_group(
    group: &[&EvalRecord],
    protocol: WithinGroupProtocol,
    ctx: &CorrelationContext<'_>,
    warnings: &mut Vec<String>,
) -> GroupScores {
    let others = ctx.all_fixations();
    match protocol {
        WithinGroupProtocol::VsHuman => {
            let mut aucs = Vec::new();
            let mut igs = Vec::new();
            for record in group {
                let Some(fix) = ctx.fixations_for(&record.image_id) else {
                    warnings.push(format!("no fixations for image {}; skipped", record.image_id));
                    continue;
                };
                match s_auc(&record.attention, fix, &others, &ctx.shuffle) {
                    Ok(v) => aucs.push(v),
                    Err(e) => warnings.push(format!("s-AUC failed: {e}")),
                }
                if let Some(baseline) = ctx.baseline_for(&record.image_id) {
                    match info_gain(&record.attention, fix, baseline, ctx.epsilon_norm) {
                        Ok(v) => igs.push(v),
                        Err(e) => warnings.push(format!("IG failed: {e}")),
                    }
                }
            }
            GroupScores {
                s_auc: mean(&aucs),
                info_gain: mean(&igs),
                s_auc_sym: None,
                info_gain_sym: None,
            }
        }
        WithinGroupProtocol::PairwisePseudo { top_fraction } => {
            if group.len() < 2 {
                warnings.push(format!(
                    "pairwise protocol needs >= 2 records per group, found {}; group skipped",
                    group.len()
                ));
                return GroupScores {
                    s_auc: None,
                    info_gain: None,
                    s_auc_sym: None,
                    info_gain_sym: None,
                };
            }
            // pseudo-fixations per target map, computed once
            let pseudo: Vec<Option<FixationSet>> = group
                .iter()
                .map(|r| match pseudo_fixations(&r.attention, top_fraction, &r.image_id) {
                    Ok(f) => Some(f),
                    Err(e) => {
                        warnings.push(format!("pseudo-fixations failed for {}: {e}", r.image_id));
                        None
                    }
                })
                .collect();
            let n = group.len();
            let mut auc = vec![vec![None; n]; n];
            let mut ig = vec![vec![None; n]; n];
            for (j, target) in pseudo.iter().enumerate() {
                let Some(target) = target else { continue };
                for i in 0..n {
                    if i == j {
                        continue;
                    }
                    if let Ok(v) = s_auc(&group[i].attention, target, &others, &ctx.shuffle) {
                        auc[i][j] = Some(v);
                    }
                    if let Some(baseline) = ctx.baseline_for(&group[j].image_id) {
                        if let Ok(v) =
                            info_gain(&group[i].attention, target, baseline, ctx.epsilon_norm)
                        {
                            ig[i][j] = Some(v);
                        }
                    }
                }
            }
            let ordered: Vec<f64> = auc.iter().flatten().filter_map(|v| *v).collect();
            let ordered_ig: Vec<f64> = ig.iter().flatten().filter_map(|v| *v).collect();
            // symmetrized: unordered pairs averaged both ways
            let mut sym = Vec::new();
            let mut sym_ig = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if let (Some(a), Some(b)) = (auc[i][j], auc[j][i]) {
                        sym.push((a + b) / 2.0);
                    }
                    if let (Some(a), Some(b)) = (ig[i][j], ig[j][i]) {
                        sym_ig.push((a + b) / 2.0);
                    }
                }
            }
            GroupScores {
                s_auc: mean(&ordered),
                info_gain: mean(&ordered_ig),
                s_auc_sym: mean(&sym),
                info_gain_sym: mean(&sym_ig),
            }
        }
    }
}

/// Split each baseline's records into two groups, score both groups under
/// the configured protocol, and emit one table row per baseline.
pub fn correlation_table(
    title: &str,
    records: &[EvalRecord],
    spec: &GroupingSpec,
    ctx: &CorrelationContext<'_>,
) -> Result<(ReportTable, Vec<String>)> {
    spec.validate()?;
    let mut warnings = Vec::new();

    let (first_group, second_group) = match spec.mode {
        GroupingMode::TopBottomK(_) => ("best", "worst"),
        GroupingMode::PositiveNegative => ("pos", "neg"),
    };
    let pairwise = matches!(spec.protocol, WithinGroupProtocol::PairwisePseudo { .. });
    let mut columns = vec![
        format!("{first_group}_s_auc"),
        format!("{first_group}_ig"),
        format!("{second_group}_s_auc"),
        format!("{second_group}_ig"),
    ];
    if pairwise {
        columns.extend([
            format!("{first_group}_s_auc_sym"),
            format!("{first_group}_ig_sym"),
            format!("{second_group}_s_auc_sym"),
            format!("{second_group}_ig_sym"),
        ]);
    }

    let kinds: Vec<AttentionKind> = AttentionKind::ALL
        .into_iter()
        .filter(|k| records.iter().any(|r| r.kind == *k))
        .collect();
    let mut table = ReportTable::new(
        title,
        kinds.iter().map(|k| k.name().to_string()).collect(),
        columns,
    );
    table
        .metadata
        .insert("interpretation".into(), spec.interpretation_label());

    for (row, kind) in kinds.iter().enumerate() {
        let mut subset: Vec<&EvalRecord> = records.iter().filter(|r| r.kind == *kind).collect();
        let (first, second): (Vec<&EvalRecord>, Vec<&EvalRecord>) = match spec.mode {
            GroupingMode::TopBottomK(k) => {
                let mut ranked: Vec<&EvalRecord> = subset
                    .iter()
                    .copied()
                    .filter(|r| r.task_score.is_some())
                    .collect();
                if ranked.len() < subset.len() {
                    warnings.push(format!(
                        "{kind}: {} records lack a task score and were dropped from ranking",
                        subset.len() - ranked.len()
                    ));
                }
                ranked.sort_by(|a, b| {
                    b.task_score
                        .partial_cmp(&a.task_score)
                        .expect("finite scores")
                        .then_with(|| a.image_id.cmp(&b.image_id))
                });
                if k > ranked.len() {
                    warnings.push(format!(
                        "{kind}: k={k} exceeds {} ranked records; groups truncated",
                        ranked.len()
                    ));
                }
                let take = k.min(ranked.len());
                let top = ranked[..take].to_vec();
                let bottom = ranked[ranked.len() - take..].to_vec();
                (top, bottom)
            }
            GroupingMode::PositiveNegative => {
                subset.retain(|r| {
                    if r.correct.is_none() {
                        warnings.push(format!(
                            "{kind}: record {} lacks a correctness flag; dropped",
                            r.image_id
                        ));
                    }
                    r.correct.is_some()
                });
                let pos: Vec<&EvalRecord> =
                    subset.iter().copied().filter(|r| r.correct == Some(true)).collect();
                let neg: Vec<&EvalRecord> =
                    subset.iter().copied().filter(|r| r.correct == Some(false)).collect();
                (pos, neg)
            }
        };

        for (offset, group) in [(0usize, &first), (2usize, &second)] {
            let scores = score_group(group, spec.protocol, ctx, &mut warnings);
            if let Some(v) = scores.s_auc {
                table.set(row, offset, v);
            }
            if let Some(v) = scores.info_gain {
                table.set(row, offset + 1, v);
            }
            if pairwise {
                if let Some(v) = scores.s_auc_sym {
                    table.set(row, 4 + offset, v);
                }
                if let Some(v) = scores.info_gain_sym {
                    table.set(row, 4 + offset + 1, v);
                }
            }
        }
    }
    Ok((table, warnings))
}
