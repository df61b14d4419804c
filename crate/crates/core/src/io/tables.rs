use std::collections::BTreeMap;
use std::path::Path;

use super::{io_err, IoError, Manifest};
use crate::autodiff::Matrix;
use crate::features::{patch_feature_values, CellRecord, FeatureError, FeatureParams, N_ATTRS, N_FEATURES};
use crate::geometry::{ClipRect, Point2D};
use crate::parallel::Exec;
use crate::synth::SynthImage;
use crate::train::{Dataset, Sample};

fn csv_err(path: &Path, e: csv::Error) -> IoError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => IoError::Io { path: path.to_path_buf(), source },
        kind => IoError::Malformed { path: path.to_path_buf(), line, msg: format!("{kind:?}") },
    }
}

fn cell_header() -> Vec<String> {
    let mut h = vec!["patch_id".to_string(), "cx".into(), "cy".into()];
    h.extend((1..=N_ATTRS).map(|k| format!("a{k:02}")));
    h
}

/// Cells of every patch, in patch order; values use the shortest exact
/// round-trip representation.
pub fn write_cells_csv(path: &Path, image: &SynthImage) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(cell_header()).map_err(|e| csv_err(path, e))?;
    for p in &image.patches {
        for c in &p.cells {
            let mut rec = vec![p.patch_id.to_string(), c.centroid.x.to_string(), c.centroid.y.to_string()];
            rec.extend(c.attrs.iter().map(f64::to_string));
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Cells grouped by patch ID.
pub fn read_cells_csv(path: &Path) -> Result<BTreeMap<u32, Vec<CellRecord>>, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
    if header != cell_header() {
        return Err(IoError::Malformed { path: path.to_path_buf(), line: 1, msg: format!("unexpected header {header:?}") });
    }
    let mut out: BTreeMap<u32, Vec<CellRecord>> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |msg: String| IoError::Malformed { path: path.to_path_buf(), line, msg };
        let patch_id: u32 = rec[0].trim().parse().map_err(|_| bad(format!("bad patch_id '{}'", &rec[0])))?;
        let mut vals = [0.0f64; 2 + N_ATTRS];
        for (k, v) in vals.iter_mut().enumerate() {
            let field = &rec[k + 1];
            *v = field.trim().parse().map_err(|_| bad(format!("bad number '{field}'")))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite value '{field}'")));
            }
        }
        let mut attrs = [0.0; N_ATTRS];
        attrs.copy_from_slice(&vals[2..]);
        out.entry(patch_id).or_default().push(CellRecord { centroid: Point2D::new(vals[0], vals[1]), attrs });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub image_id: String,
    pub patch_id: u32,
    pub row: u32,
    pub col: u32,
    pub values: Vec<f64>,
}

/// Computes the 69-vector of every patch of every image listed in the
/// manifest. Rows come back sorted by (image_id, patch_id).
pub fn extract_features(
    manifest: &Manifest,
    root: &Path,
    params: FeatureParams,
    exec: Exec,
) -> Result<Vec<FeatureRow>, IoError> {
    let per_image = exec.map(&manifest.images, |img| -> Result<Vec<FeatureRow>, IoError> {
        let path = root.join(&img.cells);
        let cells = read_cells_csv(&path)?;
        let mut rows = Vec::with_capacity(img.patches.len());
        for p in &img.patches {
            let clip = ClipRect::new(p.x0, p.y0, p.x0 + p.size, p.y0 + p.size)
                .map_err(|e| IoError::Invalid { path: path.clone(), msg: format!("patch {}: {e}", p.patch_id) })?;
            let patch_cells = cells.get(&p.patch_id).map_or(&[][..], Vec::as_slice);
            let values = patch_feature_values(patch_cells, params, clip).map_err(|e: FeatureError| IoError::Invalid {
                path: path.clone(),
                msg: format!("patch {}: {e}", p.patch_id),
            })?;
            rows.push(FeatureRow { image_id: img.image_id.clone(), patch_id: p.patch_id, row: p.row, col: p.col, values: values.to_vec() });
        }
        Ok(rows)
    });
    let mut rows = Vec::new();
    for r in per_image {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| (a.image_id.as_str(), a.patch_id).cmp(&(b.image_id.as_str(), b.patch_id)));
    Ok(rows)
}

fn feature_header() -> Vec<String> {
    let mut h = vec!["image_id".to_string(), "patch_id".into(), "row".into(), "col".into()];
    h.extend((1..=N_FEATURES).map(|k| format!("f{k:03}")));
    h
}

/// Numbers are written in scientific notation with 17 significant digits.
pub fn write_features_csv(path: &Path, rows: &[FeatureRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(feature_header()).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let mut rec = vec![r.image_id.clone(), r.patch_id.to_string(), r.row.to_string(), r.col.to_string()];
        rec.extend(r.values.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureRow>, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
    if header != feature_header() {
        return Err(IoError::Malformed { path: path.to_path_buf(), line: 1, msg: "unexpected header".into() });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |msg: String| IoError::Malformed { path: path.to_path_buf(), line, msg };
        let int = |k: usize| rec[k].trim().parse::<u32>().map_err(|_| bad(format!("bad integer '{}'", &rec[k])));
        let values = (4..4 + N_FEATURES)
            .map(|k| rec[k].trim().parse::<f64>().map_err(|_| bad(format!("bad number '{}'", &rec[k]))))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(FeatureRow { image_id: rec[0].to_string(), patch_id: int(1)?, row: int(2)?, col: int(3)?, values });
    }
    Ok(rows)
}

/// Joins feature rows with manifest labels. Samples follow manifest order;
/// rows within a sample follow patch ID.
pub fn dataset_from_features(manifest: &Manifest, rows: &[FeatureRow], path: &Path) -> Result<Dataset, IoError> {
    let mut by_image: BTreeMap<&str, Vec<&FeatureRow>> = BTreeMap::new();
    for r in rows {
        by_image.entry(r.image_id.as_str()).or_default().push(r);
    }
    let mut samples = Vec::with_capacity(manifest.images.len());
    for img in &manifest.images {
        let mut rs = by_image.remove(img.image_id.as_str()).ok_or_else(|| IoError::Invalid {
            path: path.to_path_buf(),
            msg: format!("no feature rows for image {}", img.image_id),
        })?;
        rs.sort_by_key(|r| r.patch_id);
        let data: Vec<f64> = rs.iter().flat_map(|r| r.values.iter().copied()).collect();
        samples.push(Sample { image_id: img.image_id.clone(), label: img.label, features: Matrix::from_vec(rs.len(), N_FEATURES, data) });
    }
    if let Some(extra) = by_image.keys().next() {
        return Err(IoError::Invalid { path: path.to_path_buf(), msg: format!("image {extra} is not in the manifest") });
    }
    Ok(Dataset { class_names: manifest.class_names.clone(), samples })
}

/// Feature matrices straight from generated images, skipping the files.
pub fn dataset_from_synth(
    images: &[SynthImage],
    class_names: Vec<String>,
    params: FeatureParams,
    exec: Exec,
) -> Result<Dataset, FeatureError> {
    let mats = exec.map(images, |img| -> Result<Matrix, FeatureError> {
        let mut data = Vec::with_capacity(img.patches.len() * N_FEATURES);
        for p in &img.patches {
            data.extend(patch_feature_values(&p.cells, params, p.rect)?);
        }
        Ok(Matrix::from_vec(img.patches.len(), N_FEATURES, data))
    });
    let mut samples = Vec::with_capacity(images.len());
    for (img, m) in images.iter().zip(mats) {
        samples.push(Sample { image_id: img.image_id.clone(), label: img.label, features: m? });
    }
    Ok(Dataset { class_names, samples })
}
