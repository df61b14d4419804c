//! Voronoi, Delaunay, MST and nearest-neighbor feature families.

use super::{FeatureError, SummaryStats};
use crate::geometry::{
    count_within_radius, k_nearest_distances, polygon_area, polygon_perimeter, Point2D, Triangulation,
    VoronoiPartition, WeightedEdgeList,
};

pub const NN_KS: [usize; 3] = [3, 5, 7];
pub const NN_RADII: [f64; 5] = [10.0, 20.0, 30.0, 40.0, 50.0];

/// `[total area, area stats(4), chord stats(4), perimeter stats(4)]`.
/// Chords of a cell are all pairwise distances between its polygon vertices,
/// pooled over cells.
pub fn voronoi_features(vp: &VoronoiPartition) -> [f64; 13] {
    let areas: Vec<f64> = vp.cells.iter().map(|c| polygon_area(c)).collect();
    let perimeters: Vec<f64> = vp.cells.iter().map(|c| polygon_perimeter(c)).collect();
    let mut chords = Vec::new();
    for cell in &vp.cells {
        for (i, &a) in cell.iter().enumerate() {
            for &b in &cell[i + 1..] {
                chords.push(a.distance(b));
            }
        }
    }
    let mut out = [0.0; 13];
    out[0] = areas.iter().sum();
    out[1..5].copy_from_slice(&SummaryStats::of(&areas).to_array());
    out[5..9].copy_from_slice(&SummaryStats::of(&chords).to_array());
    out[9..13].copy_from_slice(&SummaryStats::of(&perimeters).to_array());
    out
}

/// Triangle-area stats followed by side-length stats, three sides per
/// triangle (shared sides counted once per incident triangle).
pub fn delaunay_features(t: &Triangulation) -> Result<[f64; 8], FeatureError> {
    if t.triangles.is_empty() {
        return Err(FeatureError::NoTriangles);
    }
    let areas: Vec<f64> = t.triangles.iter().map(|&tri| t.triangle_area(tri)).collect();
    let sides: Vec<f64> = t.triangles.iter().flat_map(|&tri| t.triangle_sides(tri)).collect();
    let mut out = [0.0; 8];
    out[..4].copy_from_slice(&SummaryStats::of(&areas).to_array());
    out[4..].copy_from_slice(&SummaryStats::of(&sides).to_array());
    Ok(out)
}

pub fn mst_features(e: &WeightedEdgeList) -> Result<[f64; 4], FeatureError> {
    if e.edges.is_empty() {
        return Err(FeatureError::EmptyEdgeList);
    }
    Ok(SummaryStats::of(&e.weights()).to_array())
}

/// `[density, count, k-NN distance (k = 3, 5, 7) x (mean, sd, disorder),
///   neighbor count within r = 10..50 px x (mean, sd, disorder)]`
pub fn nn_features(points: &[Point2D], patch_area: f64) -> Result<[f64; 26], FeatureError> {
    if !(patch_area > 0.0) {
        return Err(FeatureError::InvalidParameter(format!("patch area must be positive, got {patch_area}")));
    }
    let mut out = [0.0; 26];
    let n = points.len();
    out[0] = n as f64 / patch_area;
    out[1] = n as f64;
    let knn = k_nearest_distances(points, *NN_KS.iter().max().unwrap_or(&1));
    for (b, &k) in NN_KS.iter().enumerate() {
        let kth: Vec<f64> = knn.iter().map(|d| d[k - 1]).collect();
        out[2 + 3 * b..5 + 3 * b].copy_from_slice(&SummaryStats::of(&kth).mean_sd_disorder());
    }
    for (b, &r) in NN_RADII.iter().enumerate() {
        let counts: Vec<f64> = count_within_radius(points, r)?.into_iter().map(|c| c as f64).collect();
        out[11 + 3 * b..14 + 3 * b].copy_from_slice(&SummaryStats::of(&counts).mean_sd_disorder());
    }
    Ok(out)
}
