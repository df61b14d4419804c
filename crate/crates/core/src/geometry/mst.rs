use serde::{Deserialize, Serialize};

use super::{check_finite, GeometryError, Point2D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEdgeList {
    /// `(i, j, length)` with `i < j`.
    pub edges: Vec<(usize, usize, f64)>,
}

impl WeightedEdgeList {
    /// Sum of edge lengths in ascending order, so the total does not depend
    /// on the order in which the tree was grown.
    pub fn total_weight(&self) -> f64 {
        let mut w = self.weights();
        w.sort_by(f64::total_cmp);
        w.iter().sum()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.2).collect()
    }
}

/// Dense Prim's algorithm over the complete Euclidean graph, O(n²).
/// Ties go to the lowest vertex index.
pub fn euclidean_mst(points: &[Point2D]) -> Result<WeightedEdgeList, GeometryError> {
    let n = points.len();
    if n < 2 {
        return Err(GeometryError::TooFewPoints { needed: 2, got: n });
    }
    check_finite(points)?;

    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);

    in_tree[0] = true;
    for j in 1..n {
        best[j] = points[0].distance(points[j]);
    }
    for _ in 1..n {
        let mut next = usize::MAX;
        for j in 0..n {
            if !in_tree[j] && (next == usize::MAX || best[j] < best[next]) {
                next = j;
            }
        }
        in_tree[next] = true;
        let p = parent[next];
        edges.push((p.min(next), p.max(next), best[next]));
        for j in 0..n {
            if !in_tree[j] {
                let d = points[next].distance(points[j]);
                if d < best[j] {
                    best[j] = d;
                    parent[j] = next;
                }
            }
        }
    }
    Ok(WeightedEdgeList { edges })
}
