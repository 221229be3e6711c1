//! File formats: PGM (P2/P5) and CSV matrices, fixation lists, and the JSON
//! dataset manifest.
//!
//! Conventions, stated in every emitted header where the format allows:
//! coordinates are (row, col), 0-indexed; CSV matrices are one grid row per
//! line with '.' decimals; PGM values are scaled to [0, 1] on load. Every
//! loader rejects malformed input with the offending line number.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::FixationSet;
use crate::tensor::{AttentionMap, DensityMap, Grid};
use crate::task::GroundTruthMask;

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

// ---------------------------------------------------------------------------
// matrices
// ---------------------------------------------------------------------------

/// Where a grid came from, which decides binarization/scaling semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Pgm { maxval: u32 },
    Csv,
}

/// Auto-detect PGM (P2/P5 magic) vs CSV by the first bytes and parse.
/// PGM values are scaled to [0, 1]; CSV values are taken verbatim.
pub fn load_grid(path: &Path) -> Result<(Grid, MatrixFormat)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        parse_pgm(path, &bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| parse_err(path, 1, "CSV matrix is not valid UTF-8"))?;
        parse_csv_matrix(path, &text).map(|g| (g, MatrixFormat::Csv))
    }
}

fn parse_csv_matrix(path: &Path, text: &str) -> Result<Grid> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(path, i + 1, format!("invalid number {cell:?}")))
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    path,
                    i + 1,
                    format!("ragged row: {} cells, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "empty matrix"));
    }
    let height = rows.len();
    let width = rows[0].len();
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(parse_err(path, 1, "matrix contains non-finite values"));
    }
    Grid::new(height, width, values)
}

fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<(Grid, MatrixFormat)> {
    let binary = bytes.starts_with(b"P5");

    // header tokens: magic, width, height, maxval; '#' comments allowed
    let mut pos = 0usize;
    let mut line = 1usize;
    let mut tokens: Vec<(String, usize)> = Vec::new();
    while pos < bytes.len() && tokens.len() < 4 {
        let b = bytes[pos];
        if b == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        if b.is_ascii_whitespace() {
            if b == b'\n' {
                line += 1;
            }
            pos += 1;
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        tokens.push((
            String::from_utf8_lossy(&bytes[start..pos]).into_owned(),
            line,
        ));
    }
    if tokens.len() < 4 {
        return Err(parse_err(path, line, "truncated PGM header"));
    }
    let width: usize = tokens[1].0.parse().map_err(|_| {
        parse_err(path, tokens[1].1, format!("invalid PGM width {:?}", tokens[1].0))
    })?;
    let height: usize = tokens[2].0.parse().map_err(|_| {
        parse_err(path, tokens[2].1, format!("invalid PGM height {:?}", tokens[2].0))
    })?;
    let maxval: u32 = tokens[3].0.parse().map_err(|_| {
        parse_err(path, tokens[3].1, format!("invalid PGM maxval {:?}", tokens[3].0))
    })?;
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err(path, tokens[3].1, format!("PGM maxval {maxval} out of range [1, 65535]")));
    }

    let mut values = Vec::with_capacity(width * height);
    if binary {
        pos += 1; // single whitespace after maxval
        let two_bytes = maxval > 255;
        let need = width * height * if two_bytes { 2 } else { 1 };
        if bytes.len() < pos + need {
            return Err(parse_err(path, line, "truncated PGM pixel data"));
        }
        for i in 0..width * height {
            let raw = if two_bytes {
                u32::from(bytes[pos + 2 * i]) << 8 | u32::from(bytes[pos + 2 * i + 1])
            } else {
                u32::from(bytes[pos + i])
            };
            if raw > maxval {
                return Err(parse_err(path, line, format!("pixel value {raw} exceeds maxval {maxval}")));
            }
            values.push(f64::from(raw) / f64::from(maxval));
        }
    } else {
        let rest = String::from_utf8_lossy(&bytes[pos..]);
        for (offset, token) in rest.split_ascii_whitespace().enumerate() {
            if values.len() == width * height {
                return Err(parse_err(path, line, "extra pixel data in PGM"));
            }
            let raw: u32 = token.parse().map_err(|_| {
                parse_err(path, line, format!("invalid pixel token {token:?} at index {offset}"))
            })?;
            if raw > maxval {
                return Err(parse_err(path, line, format!("pixel value {raw} exceeds maxval {maxval}")));
            }
            values.push(f64::from(raw) / f64::from(maxval));
        }
        if values.len() != width * height {
            return Err(parse_err(
                path,
                line,
                format!("expected {} pixels, found {}", width * height, values.len()),
            ));
        }
    }
    Ok((Grid::new(height, width, values)?, MatrixFormat::Pgm { maxval }))
}

pub fn load_density(path: &Path) -> Result<DensityMap> {
    let (grid, _) = load_grid(path)?;
    DensityMap::new(grid)
}

pub fn load_attention(path: &Path) -> Result<AttentionMap> {
    let (grid, _) = load_grid(path)?;
    AttentionMap::new(grid)
}

/// Masks must be strictly binary: 0/maxval in PGM, 0/1 in CSV.
pub fn load_mask(path: &Path, image_id: &str) -> Result<GroundTruthMask> {
    let (grid, _) = load_grid(path)?;
    GroundTruthMask::from_grid(image_id, &grid).map_err(|e| match e {
        Error::InvalidValue(msg) => parse_err(path, 1, msg),
        other => other,
    })
}

pub fn save_grid_csv(grid: &Grid, path: &Path) -> Result<()> {
    let mut out = String::new();
    for r in 0..grid.height() {
        for c in 0..grid.width() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", grid.at(r, c)));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Plain-text PGM of a [0, 1] grid at the given maxval.
pub fn save_grid_pgm(grid: &Grid, path: &Path, maxval: u32) -> Result<()> {
    if maxval == 0 || maxval > 65535 {
        return Err(Error::InvalidConfig("PGM maxval must lie in [1, 65535]".into()));
    }
    if grid.values().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidValue("PGM output requires values in [0, 1]".into()));
    }
    let mut out = format!("P2\n# rows={} cols={} (row, col) 0-indexed\n{} {}\n{}\n", grid.height(), grid.width(), grid.width(), grid.height(), maxval);
    for r in 0..grid.height() {
        for c in 0..grid.width() {
            if c > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{}", (grid.at(r, c) * f64::from(maxval)).round() as u32));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// fixations
// ---------------------------------------------------------------------------

/// Parse a fixation CSV: optional `# grid <h> <w>` line, then the header
/// `image_id,row,col`, then one point per line. Points are grouped by
/// image_id in order of first appearance; duplicates are preserved.
pub fn load_fixations(path: &Path, fallback_dims: Option<(usize, usize)>) -> Result<Vec<FixationSet>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut dims = fallback_dims;
    let mut header_seen = false;
    let mut order: Vec<String> = Vec::new();
    let mut by_id: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let parts: Vec<&str> = rest.split_ascii_whitespace().collect();
            if parts.first() == Some(&"grid") {
                if parts.len() != 3 {
                    return Err(parse_err(path, i + 1, "grid line must be `# grid <height> <width>`"));
                }
                let h = parts[1].parse().map_err(|_| parse_err(path, i + 1, "invalid grid height"))?;
                let w = parts[2].parse().map_err(|_| parse_err(path, i + 1, "invalid grid width"))?;
                dims = Some((h, w));
            }
            continue;
        }
        if !header_seen {
            if line != "image_id,row,col" {
                return Err(parse_err(path, i + 1, format!("expected header `image_id,row,col`, found {line:?}")));
            }
            header_seen = true;
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(parse_err(path, i + 1, format!("expected 3 fields, found {}", parts.len())));
        }
        let row: usize = parts[1].trim().parse().map_err(|_| parse_err(path, i + 1, format!("invalid row {:?}", parts[1])))?;
        let col: usize = parts[2].trim().parse().map_err(|_| parse_err(path, i + 1, format!("invalid col {:?}", parts[2])))?;
        let (h, w) = dims.ok_or_else(|| parse_err(path, i + 1, "no grid dims: add a `# grid <h> <w>` line or supply dims"))?;
        if row >= h || col >= w {
            return Err(parse_err(path, i + 1, format!("fixation ({row}, {col}) outside {h}x{w} grid")));
        }
        let id = parts[0].trim().to_string();
        if !by_id.contains_key(&id) {
            order.push(id.clone());
        }
        by_id.entry(id).or_default().push((row, col));
    }
    if !header_seen {
        return Err(parse_err(path, 1, "missing `image_id,row,col` header"));
    }
    let (h, w) = dims.ok_or_else(|| parse_err(path, 1, "no grid dims available"))?;
    order
        .into_iter()
        .map(|id| {
            let points = by_id.remove(&id).unwrap_or_default();
            FixationSet::new(id, points, h, w)
        })
        .collect()
}

pub fn save_fixations(sets: &[&FixationSet], path: &Path) -> Result<()> {
    let dims = sets.first().map(|s| s.grid_dims());
    let mut out = String::new();
    if let Some((h, w)) = dims {
        out.push_str(&format!("# grid {h} {w}\n"));
    }
    out.push_str("image_id,row,col\n");
    for set in sets {
        for &(r, c) in set.points() {
            out.push_str(&format!("{},{r},{c}\n", set.image_id()));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saliency_map_path: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attention_map_paths: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixation_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_mask_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    /// "train" or "test"; used by the benchmark runner.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    /// Optional precomputed task score for top/bottom grouping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_score: Option<f64>,
    /// Optional correctness flag for positive/negative grouping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

impl ManifestEntry {
    pub fn new(id: impl Into<String>) -> Self {
        ManifestEntry {
            id: id.into(),
            image_path: None,
            saliency_map_path: None,
            attention_map_paths: BTreeMap::new(),
            fixation_path: None,
            density_path: None,
            gt_mask_path: None,
            label: None,
            split: None,
            task_score: None,
            correct: None,
        }
    }

    /// An entry must be scorable by at least one pipeline.
    fn scorable(&self) -> bool {
        let saliency = self.saliency_map_path.is_some() && self.gt_mask_path.is_some();
        let gaze = self.fixation_path.is_some()
            && (self.saliency_map_path.is_some()
                || !self.attention_map_paths.is_empty()
                || self.density_path.is_some());
        let classification = self.image_path.is_some() && self.label.is_some();
        saliency || gaze || classification
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestGlobal {
    pub grid_height: usize,
    pub grid_width: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_classes: Option<usize>,
    /// Gaussian blur sigma for the IG shuffled baseline; defaults to
    /// min(grid)/16 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blur_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity_range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub global: ManifestGlobal,
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    root: PathBuf,
}

impl Manifest {
    pub fn new(global: ManifestGlobal, entries: Vec<ManifestEntry>) -> Self {
        Manifest {
            version: MANIFEST_VERSION,
            global,
            entries,
            root: PathBuf::new(),
        }
    }

    /// Directory all entry paths are relative to.
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.root.join(relative)
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: format!("invalid manifest JSON: {e}"),
        })?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported manifest version {} (expected {MANIFEST_VERSION})",
                manifest.version
            )));
        }
        manifest.root = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidValue(format!("manifest serialization failed: {e}")))?;
        body.push('\n');
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.global.grid_height == 0 || self.global.grid_width == 0 {
            return Err(Error::Manifest("grid dims must be positive".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for entry in &self.entries {
            if !seen.insert(&entry.id) {
                return Err(Error::Manifest(format!("duplicate entry id {:?}", entry.id)));
            }
            if !entry.scorable() {
                return Err(Error::Manifest(format!(
                    "entry {:?} is not scorable by any metric (needs saliency+mask, fixations+map, or image+label)",
                    entry.id
                )));
            }
            for rel in self.entry_paths(entry) {
                let path = self.resolve(&rel);
                if !path.exists() {
                    return Err(Error::Manifest(format!(
                        "entry {:?} references missing file {}",
                        entry.id,
                        path.display()
                    )));
                }
            }
        }
        Ok(())
    }

    fn entry_paths(&self, entry: &ManifestEntry) -> Vec<String> {
        let mut paths = Vec::new();
        for p in [
            &entry.image_path,
            &entry.saliency_map_path,
            &entry.fixation_path,
            &entry.density_path,
            &entry.gt_mask_path,
        ]
        .into_iter()
        .flatten()
        {
            paths.push(p.clone());
        }
        paths.extend(entry.attention_map_paths.values().cloned());
        paths
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn pgm_p2_mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.pgm");
        fs::write(&path, "P2\n2 2\n255\n0 0\n255 255\n").unwrap();
        let mask = load_mask(&path, "m").unwrap();
        assert_eq!(mask.cells(), &[false, false, true, true]);
    }

    #[test]
    fn pgm_rejects_nonbinary_mask_and_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        fs::write(&path, "P2\n2 1\n255\n0 128\n").unwrap();
        assert!(load_mask(&path, "m").is_err());
        let path2 = dir.path().join("range.pgm");
        fs::write(&path2, "P2\n2 1\n255\n0 300\n").unwrap();
        assert!(matches!(load_grid(&path2), Err(Error::Parse { .. })));
    }

    #[test]
    fn csv_matrix_parses_and_rejects_ragged() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        fs::write(&path, "0.5,0.5\n0.5,0.5\n").unwrap();
        let (grid, fmt) = load_grid(&path).unwrap();
        assert_eq!(fmt, MatrixFormat::Csv);
        assert!(grid.values().iter().all(|&v| v == 0.5));

        let ragged = dir.path().join("ragged.csv");
        fs::write(&ragged, "1,2\n3\n").unwrap();
        match load_grid(&ragged) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn matrix_round_trips() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let grid = Grid::new(16, 16, (0..256).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();

        let csv = dir.path().join("g.csv");
        save_grid_csv(&grid, &csv).unwrap();
        let (back, _) = load_grid(&csv).unwrap();
        for (a, b) in grid.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1e-12);
        }

        let pgm = dir.path().join("g.pgm");
        save_grid_pgm(&grid, &pgm, 65535).unwrap();
        let (back, fmt) = load_grid(&pgm).unwrap();
        assert_eq!(fmt, MatrixFormat::Pgm { maxval: 65535 });
        for (a, b) in grid.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1.0 / 65535.0);
        }
    }

    #[test]
    fn binary_pgm_two_byte_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p5.pgm");
        let mut bytes = b"P5\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0x00, 0x00, 0xff, 0xff]);
        fs::write(&path, bytes).unwrap();
        let (grid, _) = load_grid(&path).unwrap();
        assert_eq!(grid.values(), &[0.0, 1.0]);
    }

    #[test]
    fn fixation_csv_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fix.csv");
        let set = FixationSet::new("img1", vec![(0, 0), (3, 5), (0, 0)], 8, 8).unwrap();
        save_fixations(&[&set], &path).unwrap();
        let loaded = load_fixations(&path, None).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].points(), set.points());
        assert_eq!(loaded[0].grid_dims(), (8, 8));

        // out-of-bounds points carry the line number
        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "# grid 4 4\nimage_id,row,col\nimg,9,0\n").unwrap();
        match load_fixations(&bad, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_fixation_body_is_unscorable_not_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        fs::write(&path, "# grid 4 4\nimage_id,row,col\n").unwrap();
        let sets = load_fixations(&path, None).unwrap();
        assert!(sets.is_empty());
    }

    #[test]
    fn manifest_round_trip_is_fixed_point() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img.csv");
        fs::write(&img, "0.1,0.2\n0.3,0.4\n").unwrap();

        let mut entry = ManifestEntry::new("a");
        entry.image_path = Some("img.csv".into());
        entry.label = Some(1);
        let manifest = Manifest::new(
            ManifestGlobal {
                grid_height: 2,
                grid_width: 2,
                seed: 7,
                num_classes: Some(4),
                blur_sigma: None,
                intensity_range: Some((-3.0, 3.0)),
            },
            vec![entry],
        );
        let path = dir.path().join("manifest.json");
        manifest.save(&path).unwrap();
        let loaded = Manifest::load(&path).unwrap();
        let path2 = dir.path().join("manifest2.json");
        loaded.save(&path2).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn manifest_rejects_duplicates_missing_files_and_unscorable() {
        let dir = tempfile::tempdir().unwrap();
        let global = ManifestGlobal {
            grid_height: 2,
            grid_width: 2,
            seed: 0,
            num_classes: None,
            blur_sigma: None,
            intensity_range: None,
        };

        let mut a = ManifestEntry::new("a");
        a.image_path = Some("missing.csv".into());
        a.label = Some(0);
        let manifest = Manifest::new(global.clone(), vec![a.clone(), a.clone()]);
        let path = dir.path().join("m.json");
        manifest.save(&path).unwrap();
        assert!(matches!(Manifest::load(&path), Err(Error::Manifest(_))));

        let unscorable = ManifestEntry::new("b");
        let manifest = Manifest::new(global.clone(), vec![unscorable]);
        manifest.save(&path).unwrap();
        assert!(matches!(Manifest::load(&path), Err(Error::Manifest(_))));

        let img = dir.path().join("img.csv");
        fs::write(&img, "0.5\n").unwrap();
        let mut ok = ManifestEntry::new("c");
        ok.image_path = Some("img.csv".into());
        ok.label = Some(0);
        let manifest = Manifest::new(global, vec![ok]);
        manifest.save(&path).unwrap();
        assert!(Manifest::load(&path).is_ok());
    }
}
