//! The 69-value patch descriptor: cell-graph (18), Voronoi (13),
//! Delaunay (8), MST (4) and nearest-neighbor (26) families, in feature-ID
//! order 1–69.

mod cell_graph;
mod spatial;
mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cell_graph::{
    build_cell_graph, connectivity_features, distance_features, spectral_features, spectral_features_with,
    symmetric_eigenvalues, CellGraph, CellRecord, N_ATTRS,
};
pub use spatial::{delaunay_features, mst_features, nn_features, voronoi_features, NN_KS, NN_RADII};
pub use stats::SummaryStats;

use crate::geometry::{
    delaunay_triangulate, euclidean_mst, voronoi_partition, ClipRect, GeometryError, Point2D,
};

pub const N_FEATURES: usize = 69;
/// Widths of the cell-graph, Voronoi, Delaunay, MST and NN blocks.
pub const BLOCK_WIDTHS: [usize; 5] = [18, 13, 8, 4, 26];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("cell {0} has an all-zero attribute vector")]
    ZeroAttrVector(usize),
    #[error("cell {0} has a non-finite value")]
    NonFinite(usize),
    #[error("triangulation has no triangles")]
    NoTriangles,
    #[error("edge list is empty")]
    EmptyEdgeList,
    #[error("{0}")]
    InvalidParameter(String),
}

/// Patch-level graph parameters: centroid distance threshold and attribute
/// cosine-similarity threshold for cell-graph edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    pub d_p: f64,
    pub theta_sim: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self { d_p: 64.0, theta_sim: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchFeatureVector {
    pub patch_id: u32,
    pub grid_pos: (u32, u32),
    pub values: Vec<f64>,
}

impl PatchFeatureVector {
    /// Value for a 1-based feature ID.
    pub fn feature(&self, id: usize) -> f64 {
        self.values[id - 1]
    }
}

/// Computes the full descriptor of one patch.
///
/// With fewer than three cells the Voronoi, Delaunay and MST blocks are zero,
/// except that the total Voronoi area equals the clip area when at least one
/// cell is present. Three or more collinear cells keep their Voronoi and MST
/// blocks and only the Delaunay block is zeroed.
pub fn patch_feature_values(
    cells: &[CellRecord],
    params: FeatureParams,
    clip: ClipRect,
) -> Result<[f64; N_FEATURES], FeatureError> {
    let points: Vec<Point2D> = cells.iter().map(|c| c.centroid).collect();
    if let Some(i) = points.iter().position(|&p| !clip.contains_strictly(p)) {
        return Err(GeometryError::PointOutsideClip { index: i, x: points[i].x, y: points[i].y }.into());
    }

    let mut out = [0.0; N_FEATURES];
    let g = build_cell_graph(cells, params.d_p, params.theta_sim)?;
    out[0..4].copy_from_slice(&connectivity_features(&g));
    out[4..12].copy_from_slice(&distance_features(&g));
    out[12..18].copy_from_slice(&spectral_features(&g));

    if points.len() >= 3 {
        out[18..31].copy_from_slice(&voronoi_features(&voronoi_partition(&points, clip)?));
        match delaunay_triangulate(&points) {
            Ok(t) => out[31..39].copy_from_slice(&delaunay_features(&t)?),
            Err(GeometryError::DegenerateInput) => {}
            Err(e) => return Err(e.into()),
        }
        out[39..43].copy_from_slice(&mst_features(&euclidean_mst(&points)?)?);
    } else if !points.is_empty() {
        out[18] = clip.area();
    }

    out[43..69].copy_from_slice(&nn_features(&points, clip.area())?);
    Ok(out)
}

pub fn aggregate_patch_vector(
    patch_id: u32,
    grid_pos: (u32, u32),
    cells: &[CellRecord],
    params: FeatureParams,
    clip: ClipRect,
) -> Result<PatchFeatureVector, FeatureError> {
    Ok(PatchFeatureVector {
        patch_id,
        grid_pos,
        values: patch_feature_values(cells, params, clip)?.to_vec(),
    })
}

/// Short names for feature IDs 1–69.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = [
        "clustering_coef", "avg_degree", "n_components", "giant_ratio",
        "n_vertices", "n_edges", "avg_eccentricity", "radius", "diameter",
        "n_central", "pct_central", "avg_closeness",
        "lap_energy", "lap_trace", "upper_slope", "lower_slope", "adj_max_eig", "adj_energy",
        "vor_total_area",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let four = ["mean", "sd", "minmax", "disorder"];
    for fam in ["vor_area", "vor_chord", "vor_perimeter", "del_area", "del_side", "mst_edge"] {
        names.extend(four.iter().map(|s| format!("{fam}_{s}")));
    }
    names.push("nn_density".into());
    names.push("nn_count".into());
    for k in NN_KS {
        names.extend(["mean", "sd", "disorder"].iter().map(|s| format!("knn{k}_{s}")));
    }
    for r in NN_RADII {
        names.extend(["mean", "sd", "disorder"].iter().map(|s| format!("within{r}_{s}")));
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_cover_all_ids() {
        assert_eq!(feature_names().len(), N_FEATURES);
        assert_eq!(BLOCK_WIDTHS.iter().sum::<usize>(), N_FEATURES);
    }

    #[test]
    fn two_cell_fallback() {
        let a = [1.0; 12];
        let cells = [CellRecord::new(10.0, 10.0, a), CellRecord::new(22.0, 10.0, a)];
        let clip = ClipRect::new(0.0, 0.0, 100.0, 100.0).unwrap();
        let v = patch_feature_values(&cells, FeatureParams::default(), clip).unwrap();
        assert_eq!(v[18], 10000.0);
        assert!(v[19..43].iter().all(|&x| x == 0.0));
        assert_eq!(v[44], 2.0);
        assert_eq!(v[45], 12.0);
        assert_eq!(v[5], 1.0, "one cell-graph edge");
    }

    #[test]
    fn empty_patch_is_zero() {
        let clip = ClipRect::new(0.0, 0.0, 50.0, 50.0).unwrap();
        let v = patch_feature_values(&[], FeatureParams::default(), clip).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn outside_clip_rejected() {
        let clip = ClipRect::new(0.0, 0.0, 50.0, 50.0).unwrap();
        let cells = [CellRecord::new(60.0, 10.0, [1.0; 12])];
        assert!(matches!(
            patch_feature_values(&cells, FeatureParams::default(), clip),
            Err(FeatureError::Geometry(GeometryError::PointOutsideClip { .. }))
        ));
    }
}
