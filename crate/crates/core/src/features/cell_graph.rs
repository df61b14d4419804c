use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::geometry::Point2D;

pub const N_ATTRS: usize = 12;

/// One detected cell: centroid plus the 12 per-cell attributes (area, major
/// and minor axis, eccentricity, perimeter, diameter, mean intensity,
/// contrast, energy, correlation, homogeneity, ASM).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub centroid: Point2D,
    pub attrs: [f64; N_ATTRS],
}

impl CellRecord {
    pub fn new(x: f64, y: f64, attrs: [f64; N_ATTRS]) -> Self {
        Self { centroid: Point2D::new(x, y), attrs }
    }
}

/// Undirected simple graph over cells, stored as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGraph {
    pub positions: Vec<Point2D>,
    pub neighbors: Vec<Vec<usize>>,
}

impl CellGraph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b && !neighbors[a].contains(&b) {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        Self { positions: vec![Point2D::new(0.0, 0.0); n], neighbors }
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut a = DMatrix::zeros(n, n);
        for (u, nb) in self.neighbors.iter().enumerate() {
            for &v in nb {
                a[(u, v)] = 1.0;
            }
        }
        a
    }

    /// Connected components as sorted vertex lists, ordered by smallest
    /// member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut comps = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.neighbors[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    /// Hop distances from `s`; unreachable vertices are `usize::MAX`.
    pub fn bfs(&self, s: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n()];
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

fn cosine(a: &[f64; N_ATTRS], b: &[f64; N_ATTRS]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Cells `u`, `v` are joined iff their centroids are closer than `d_p` and
/// the cosine similarity of their attribute vectors exceeds `theta_sim`.
pub fn build_cell_graph(cells: &[CellRecord], d_p: f64, theta_sim: f64) -> Result<CellGraph, FeatureError> {
    if !(d_p > 0.0) {
        return Err(FeatureError::InvalidParameter(format!("d_p must be positive, got {d_p}")));
    }
    if !(-1.0..=1.0).contains(&theta_sim) {
        return Err(FeatureError::InvalidParameter(format!("theta_sim must lie in [-1, 1], got {theta_sim}")));
    }
    for (i, c) in cells.iter().enumerate() {
        if c.attrs.iter().any(|v| !v.is_finite()) || !c.centroid.is_finite() {
            return Err(FeatureError::NonFinite(i));
        }
        if c.attrs.iter().all(|&v| v == 0.0) {
            return Err(FeatureError::ZeroAttrVector(i));
        }
    }
    let n = cells.len();
    let mut neighbors = vec![Vec::new(); n];
    for u in 0..n {
        for v in u + 1..n {
            if cells[u].centroid.distance(cells[v].centroid) < d_p
                && cosine(&cells[u].attrs, &cells[v].attrs) > theta_sim
            {
                neighbors[u].push(v);
                neighbors[v].push(u);
            }
        }
    }
    for nb in &mut neighbors {
        nb.sort_unstable();
    }
    Ok(CellGraph { positions: cells.iter().map(|c| c.centroid).collect(), neighbors })
}

/// `[avg clustering coefficient, avg degree, #components, giant component ratio]`
pub fn connectivity_features(g: &CellGraph) -> [f64; 4] {
    let n = g.n();
    if n == 0 {
        return [0.0; 4];
    }
    let clustering: f64 = (0..n)
        .map(|u| {
            let nb = &g.neighbors[u];
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    if g.has_edge(a, b) {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (k * (k - 1)) as f64
        })
        .sum::<f64>()
        / n as f64;
    let comps = g.components();
    let giant = comps.iter().map(Vec::len).max().unwrap_or(0);
    [
        clustering,
        2.0 * g.edge_count() as f64 / n as f64,
        comps.len() as f64,
        giant as f64 / n as f64,
    ]
}

/// `[|V|, |E|, avg eccentricity, radius, diameter, #central, %central, avg closeness]`
///
/// Eccentricity-based values are taken over the largest connected component
/// (ties go to the component holding the lowest vertex index) and the
/// percentage is relative to that component. Closeness of a vertex is the
/// inverse mean hop distance to the other members of its own component, 0 for
/// isolated vertices, averaged over all vertices.
pub fn distance_features(g: &CellGraph) -> [f64; 8] {
    let n = g.n();
    if n == 0 {
        return [0.0; 8];
    }
    let comps = g.components();
    let mut closeness_sum = 0.0;
    let mut ecc_of = vec![0usize; n];
    for comp in &comps {
        for &s in comp {
            let dist = g.bfs(s);
            let mut total = 0usize;
            let mut ecc = 0usize;
            for &v in comp {
                total += dist[v];
                ecc = ecc.max(dist[v]);
            }
            ecc_of[s] = ecc;
            if comp.len() > 1 {
                closeness_sum += (comp.len() - 1) as f64 / total as f64;
            }
        }
    }
    let giant = comps
        .iter()
        .fold(&comps[0], |best, c| if c.len() > best.len() { c } else { best });
    let eccs: Vec<usize> = giant.iter().map(|&v| ecc_of[v]).collect();
    let radius = *eccs.iter().min().unwrap_or(&0);
    let diameter = *eccs.iter().max().unwrap_or(&0);
    let central = eccs.iter().filter(|&&e| e == radius).count();
    [
        n as f64,
        g.edge_count() as f64,
        eccs.iter().sum::<usize>() as f64 / eccs.len() as f64,
        radius as f64,
        diameter as f64,
        central as f64,
        100.0 * central as f64 / giant.len() as f64,
        closeness_sum / n as f64,
    ]
}

/// Eigenvalues within this distance of 0, 1 or 2 are snapped onto them before
/// the normalized-Laplacian slopes are fitted, so that range membership does
/// not depend on solver round-off.
const SNAP: f64 = 1e-9;

/// `[Laplacian energy, Laplacian trace, upper slope, lower slope,
///   largest adjacency eigenvalue, adjacency energy]`
pub fn spectral_features(g: &CellGraph) -> [f64; 6] {
    spectral_features_with(g, symmetric_eigenvalues)
}

/// Same as [`spectral_features`] with a caller-supplied symmetric
/// eigensolver (returns eigenvalues in any order).
pub fn spectral_features_with<F>(g: &CellGraph, eig: F) -> [f64; 6]
where
    F: Fn(DMatrix<f64>) -> Vec<f64>,
{
    let n = g.n();
    if n == 0 {
        return [0.0; 6];
    }
    let adj = g.adjacency_matrix();
    let deg: Vec<f64> = (0..n).map(|v| g.degree(v) as f64).collect();
    let avg_deg = deg.iter().sum::<f64>() / n as f64;

    let lap = DMatrix::from_fn(n, n, |i, j| if i == j { deg[i] } else { -adj[(i, j)] });
    let lap_eig = eig(lap);
    let lap_energy: f64 = lap_eig.iter().map(|l| (l - avg_deg).abs()).sum();
    let trace: f64 = deg.iter().sum();

    let inv_sqrt: Vec<f64> = deg.iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect();
    let norm = DMatrix::from_fn(n, n, |i, j| {
        let off = adj[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
        if i == j {
            if deg[i] > 0.0 { 1.0 - off } else { 0.0 }
        } else {
            -off
        }
    });
    let mut norm_eig: Vec<f64> = eig(norm).into_iter().map(snap).collect();
    norm_eig.sort_unstable_by(f64::total_cmp);
    let upper = range_slope(&norm_eig, 1.0, 2.0);
    let lower = range_slope(&norm_eig, 0.0, 1.0);

    let adj_eig = eig(adj);
    let largest = adj_eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let adj_energy: f64 = adj_eig.iter().map(|m| m.abs()).sum();

    [lap_energy, trace, upper, lower, largest, adj_energy]
}

fn snap(v: f64) -> f64 {
    for target in [0.0, 1.0, 2.0] {
        if (v - target).abs() <= SNAP {
            return target;
        }
    }
    v
}

/// Least-squares slope of sorted eigenvalue against `rank / n`, over the
/// eigenvalues inside `[lo, hi]`; 0 with fewer than two of them.
fn range_slope(sorted: &[f64], lo: f64, hi: f64) -> f64 {
    let n = sorted.len() as f64;
    let pts: Vec<(f64, f64)> = sorted
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= lo && v <= hi)
        .map(|(i, &v)| (i as f64 / n, v))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

pub fn symmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    SymmetricEigen::new(m).eigenvalues.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k3() -> CellGraph {
        CellGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)])
    }

    fn path3() -> CellGraph {
        CellGraph::from_edges(3, &[(0, 1), (1, 2)])
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn cell_graph_gates() {
        let a = [1.0; 12];
        let mut orth = [0.0; 12];
        orth[0] = 1.0;
        let mut other = [0.0; 12];
        other[1] = 1.0;
        let g = build_cell_graph(&[CellRecord::new(0.0, 0.0, a), CellRecord::new(10.0, 0.0, a)], 64.0, 0.8).unwrap();
        assert_eq!(g.edge_count(), 1);
        let g = build_cell_graph(
            &[CellRecord::new(0.0, 0.0, orth), CellRecord::new(10.0, 0.0, other)],
            64.0,
            0.8,
        )
        .unwrap();
        assert_eq!(g.edge_count(), 0);
        let g = build_cell_graph(&[CellRecord::new(0.0, 0.0, a), CellRecord::new(64.0, 0.0, a)], 64.0, 0.8).unwrap();
        assert_eq!(g.edge_count(), 0, "distance gate is strict");
    }

    #[test]
    fn cell_graph_errors() {
        let z = [0.0; 12];
        assert!(matches!(
            build_cell_graph(&[CellRecord::new(0.0, 0.0, z)], 64.0, 0.8),
            Err(FeatureError::ZeroAttrVector(0))
        ));
        assert!(build_cell_graph(&[], 0.0, 0.8).is_err());
        assert!(build_cell_graph(&[], 1.0, 1.5).is_err());
    }

    #[test]
    fn connectivity_examples() {
        assert_eq!(connectivity_features(&k3()), [1.0, 2.0, 1.0, 1.0]);
        close(&connectivity_features(&path3()), &[0.0, 4.0 / 3.0, 1.0, 1.0], 1e-15);
        let two = CellGraph::from_edges(4, &[(0, 1), (2, 3)]);
        assert_eq!(connectivity_features(&two), [0.0, 1.0, 2.0, 0.5]);
        assert_eq!(connectivity_features(&CellGraph::from_edges(0, &[])), [0.0; 4]);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance_features(&k3()), [3.0, 3.0, 1.0, 1.0, 1.0, 3.0, 100.0, 1.0]);
        let expect_close = (1.0 / 1.5 + 1.0 + 1.0 / 1.5) / 3.0;
        close(
            &distance_features(&path3()),
            &[3.0, 2.0, 5.0 / 3.0, 1.0, 2.0, 1.0, 100.0 / 3.0, expect_close],
            1e-12,
        );
        // isolated vertices: giant component is a single vertex
        assert_eq!(distance_features(&CellGraph::from_edges(2, &[])), [2.0, 0.0, 0.0, 0.0, 0.0, 1.0, 100.0, 0.0]);
    }

    #[test]
    fn spectral_examples() {
        let s = spectral_features(&k3());
        close(&[s[0], s[1], s[4], s[5]], &[4.0, 6.0, 2.0, 4.0], 1e-12);
        assert_eq!(spectral_features(&CellGraph::from_edges(5, &[])), [0.0; 6]);
        // K3 normalized Laplacian spectrum {0, 1.5, 1.5}: upper slope over
        // ranks 1/3, 2/3 with equal values is 0; lower has one value.
        close(&[s[2], s[3]], &[0.0, 0.0], 1e-12);
    }

    #[test]
    fn path_slopes() {
        // P3 normalized Laplacian spectrum {0, 1, 2}
        let s = spectral_features(&path3());
        // upper: (1/3, 1), (2/3, 2) -> slope 3 ; lower: (0, 0), (1/3, 1) -> slope 3
        close(&[s[2], s[3]], &[3.0, 3.0], 1e-9);
    }
}
