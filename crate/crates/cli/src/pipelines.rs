//! Manifest-driven evaluation pipelines behind the CLI subcommands.

use std::collections::BTreeMap;

use gazebench_core::attention::AttentionKind;
use gazebench_core::error::{Error, Result};
use gazebench_core::gaze::{
    build_shuffled_baseline, default_blur_sigma, info_gain, s_auc, FixationSet, ShuffleSpec,
};
use gazebench_core::io::{load_attention, load_fixations, load_grid, load_mask, Manifest};
use gazebench_core::protocols::{
    correlation_table, CorrelationContext, EvalRecord, GroupingSpec,
};
use gazebench_core::report::ReportTable;
use gazebench_core::task::{
    f_max, f_measure_adaptive, mae, GroundTruthMask, SaliencyPrediction, DEFAULT_BETA_SQUARED,
};
use gazebench_core::tensor::{Grid, ScalarMap};

/// All maps a manifest entry can contribute, keyed by source name
/// ("saliency", "density", or a baseline name).
fn entry_maps(manifest: &Manifest, entry_idx: usize, include_density: bool) -> Result<BTreeMap<String, Grid>> {
    let entry = &manifest.entries[entry_idx];
    let mut maps = BTreeMap::new();
    if let Some(path) = &entry.saliency_map_path {
        let (grid, _) = load_grid(&manifest.resolve(path))?;
        maps.insert("saliency".to_string(), grid);
    }
    for (name, path) in &entry.attention_map_paths {
        let map = load_attention(&manifest.resolve(path))?;
        maps.insert(name.clone(), map.grid().clone());
    }
    if include_density {
        if let Some(path) = &entry.density_path {
            let (grid, _) = load_grid(&manifest.resolve(path))?;
            maps.insert("density".to_string(), grid);
        }
    }
    Ok(maps)
}

fn load_entry_fixations(manifest: &Manifest, entry_idx: usize) -> Result<Option<FixationSet>> {
    let entry = &manifest.entries[entry_idx];
    let Some(path) = &entry.fixation_path else {
        return Ok(None);
    };
    let dims = (manifest.global.grid_height, manifest.global.grid_width);
    let sets = load_fixations(&manifest.resolve(path), Some(dims))?;
    match sets.into_iter().find(|s| s.image_id() == entry.id) {
        Some(set) => Ok(Some(set)),
        None => Err(Error::Manifest(format!(
            "entry {:?}: fixation file has no set for this image id",
            entry.id
        ))),
    }
}

/// F-measure (adaptive and sweep variants) and MAE for every map source that
/// has a ground-truth mask.
pub fn eval_saliency(manifest: &Manifest) -> Result<(ReportTable, Vec<String>)> {
    let mut warnings = Vec::new();
    let mut by_source: BTreeMap<String, (Vec<SaliencyPrediction>, Vec<GroundTruthMask>)> =
        BTreeMap::new();
    for (i, entry) in manifest.entries.iter().enumerate() {
        let Some(mask_path) = &entry.gt_mask_path else {
            warnings.push(format!("entry {:?} has no mask; skipped", entry.id));
            continue;
        };
        let mask = load_mask(&manifest.resolve(mask_path), &entry.id)?;
        for (source, grid) in entry_maps(manifest, i, false)? {
            let pred = SaliencyPrediction::new(&entry.id, grid).map_err(|e| {
                Error::Manifest(format!("entry {:?} map {source:?}: {e}", entry.id))
            })?;
            let slot = by_source.entry(source).or_default();
            slot.0.push(pred);
            slot.1.push(mask.clone());
        }
    }
    if by_source.is_empty() {
        return Err(Error::Manifest(
            "no (map, mask) pairs found; eval-saliency needs saliency or attention maps plus gt_mask_path".into(),
        ));
    }
    let sources: Vec<String> = by_source.keys().cloned().collect();
    let mut table = ReportTable::new(
        "saliency metrics",
        sources.clone(),
        vec!["f_adaptive".into(), "f_sweep_max".into(), "mae".into(), "images".into()],
    );
    for (row, source) in sources.iter().enumerate() {
        let (preds, masks) = &by_source[source];
        let scores = f_max(preds, masks, DEFAULT_BETA_SQUARED)?;
        let mut mae_total = 0.0;
        for (p, m) in preds.iter().zip(masks) {
            mae_total += mae(p, m)?;
        }
        table.set(row, 0, scores.adaptive_mean);
        table.set(row, 1, scores.sweep_max);
        table.set(row, 2, mae_total / preds.len() as f64);
        table.set(row, 3, preds.len() as f64);
    }
    Ok((table, warnings))
}

/// Mean s-AUC and IG of each map source against human fixations, with
/// shuffled negatives and baselines built from the other entries.
pub fn eval_gaze(
    manifest: &Manifest,
    shuffle: &ShuffleSpec,
    epsilon_norm: f64,
) -> Result<(ReportTable, Vec<String>)> {
    let mut warnings = Vec::new();
    let dims = (manifest.global.grid_height, manifest.global.grid_width);

    let mut fixations: Vec<FixationSet> = Vec::new();
    let mut maps: Vec<(usize, BTreeMap<String, Grid>)> = Vec::new();
    for (i, entry) in manifest.entries.iter().enumerate() {
        match load_entry_fixations(manifest, i)? {
            Some(set) if set.is_scorable() => fixations.push(set),
            Some(_) => warnings.push(format!("entry {:?} has an empty fixation set; unscorable", entry.id)),
            None => {
                warnings.push(format!("entry {:?} has no fixations; skipped", entry.id));
                continue;
            }
        }
        let entry_map = entry_maps(manifest, i, true)?;
        if entry_map.is_empty() {
            warnings.push(format!("entry {:?} has no maps to score", entry.id));
            continue;
        }
        maps.push((i, entry_map));
    }
    if fixations.is_empty() || maps.is_empty() {
        return Err(Error::Manifest("eval-gaze found no scorable (map, fixations) pairs".into()));
    }

    let blur = manifest.global.blur_sigma.unwrap_or_else(|| default_blur_sigma(dims));
    let all_fix: Vec<&FixationSet> = fixations.iter().collect();

    let mut sources: Vec<String> = Vec::new();
    for (_, m) in &maps {
        for key in m.keys() {
            if !sources.contains(key) {
                sources.push(key.clone());
            }
        }
    }
    sources.sort();

    let mut table = ReportTable::new(
        "gaze metrics",
        sources.clone(),
        vec!["s_auc".into(), "ig".into(), "images".into()],
    );
    for (row, source) in sources.iter().enumerate() {
        let mut aucs = Vec::new();
        let mut igs = Vec::new();
        for (entry_idx, entry_map) in &maps {
            let Some(grid) = entry_map.get(source) else { continue };
            let id = &manifest.entries[*entry_idx].id;
            let Some(fix) = fixations.iter().find(|f| f.image_id() == id) else {
                continue;
            };
            let pred = if grid.dims() == dims {
                grid.clone()
            } else {
                grid.resample_bilinear(dims.0, dims.1)?
            };
            match s_auc(&pred, fix, &all_fix, shuffle) {
                Ok(v) => aucs.push(v),
                Err(e) => warnings.push(format!("s-AUC failed for {id}/{source}: {e}")),
            }
            let others: Vec<&FixationSet> = fixations
                .iter()
                .filter(|f| f.image_id() != id.as_str())
                .collect();
            if others.is_empty() {
                continue;
            }
            let baseline = build_shuffled_baseline(&others, dims, blur)?;
            match info_gain(&pred, fix, &baseline, epsilon_norm) {
                Ok(v) => igs.push(v),
                Err(e) => warnings.push(format!("IG failed for {id}/{source}: {e}")),
            }
        }
        if !aucs.is_empty() {
            table.set(row, 0, aucs.iter().sum::<f64>() / aucs.len() as f64);
            table.set(row, 2, aucs.len() as f64);
        }
        if !igs.is_empty() {
            table.set(row, 1, igs.iter().sum::<f64>() / igs.len() as f64);
        }
    }
    let table = table
        .with_metadata("blur_sigma", blur)
        .with_metadata("shuffle_mode", format!("{:?}", shuffle.mode))
        .with_metadata("fixation_source", "discrete fixation points");
    Ok((table, warnings))
}

/// Assemble EvalRecords from a manifest for the grouped correlation
/// protocols. Task scores come from `task_score` fields when present,
/// otherwise from per-image adaptive-threshold F against the mask;
/// correctness comes from `correct` fields.
pub fn compare_attention(
    manifest: &Manifest,
    specs: &[(String, GroupingSpec)],
    shuffle: &ShuffleSpec,
    epsilon_norm: f64,
) -> Result<(Vec<ReportTable>, Vec<String>)> {
    let mut warnings = Vec::new();
    let dims = (manifest.global.grid_height, manifest.global.grid_width);

    let mut fixations = Vec::new();
    let mut records = Vec::new();
    for (i, entry) in manifest.entries.iter().enumerate() {
        let Some(fix) = load_entry_fixations(manifest, i)? else {
            warnings.push(format!("entry {:?} has no fixations; skipped", entry.id));
            continue;
        };
        if !fix.is_scorable() {
            warnings.push(format!("entry {:?} has an empty fixation set; skipped", entry.id));
            continue;
        }
        fixations.push(fix);

        // ranking metric: explicit task_score, else adaptive-threshold F
        let task_score = match entry.task_score {
            Some(v) => Some(v),
            None => match (&entry.saliency_map_path, &entry.gt_mask_path) {
                (Some(sal), Some(mask)) => {
                    let (grid, _) = load_grid(&manifest.resolve(sal))?;
                    let pred = SaliencyPrediction::new(&entry.id, grid)?;
                    let gt = load_mask(&manifest.resolve(mask), &entry.id)?;
                    Some(f_measure_adaptive(&pred, &gt, DEFAULT_BETA_SQUARED)?)
                }
                _ => None,
            },
        };

        for (name, path) in &entry.attention_map_paths {
            let kind = AttentionKind::parse(name)?;
            let map = load_attention(&manifest.resolve(path))?;
            let attention = if map.dims() == dims {
                map
            } else {
                map.resampled(dims.0, dims.1)?
            };
            records.push(EvalRecord {
                image_id: entry.id.clone(),
                kind,
                attention,
                task_score,
                correct: entry.correct,
            });
        }
    }
    if records.is_empty() {
        return Err(Error::Manifest(
            "compare-attention found no attention maps (attention_map_paths) with fixations".into(),
        ));
    }

    let blur = manifest.global.blur_sigma.unwrap_or_else(|| default_blur_sigma(dims));
    let mut ig_baselines = Vec::new();
    for fix in &fixations {
        let others: Vec<&FixationSet> = fixations
            .iter()
            .filter(|f| f.image_id() != fix.image_id())
            .collect();
        if others.is_empty() {
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
        shuffle: *shuffle,
        epsilon_norm,
    };

    let mut tables = Vec::new();
    for (title, spec) in specs {
        let (table, mut extra) = correlation_table(title, &records, spec, &ctx)?;
        warnings.append(&mut extra);
        tables.push(table.with_metadata("blur_sigma", blur));
    }
    Ok((tables, warnings))
}
