use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::predicates::{incircle, orient2d};
use super::{check_finite, GeometryError, Point2D};

/// Marker for the vertex at infinity closing hull edges into ghost triangles.
const GHOST: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triangulation {
    pub points: Vec<Point2D>,
    /// Counterclockwise vertex-index triples, each rotated so the smallest
    /// index comes first, sorted lexicographically.
    pub triangles: Vec<[usize; 3]>,
}

impl Triangulation {
    /// Undirected edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut set = HashSet::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                set.insert((a.min(b), a.max(b)));
            }
        }
        let mut edges: Vec<_> = set.into_iter().collect();
        edges.sort_unstable();
        edges
    }

    pub fn triangle_area(&self, t: [usize; 3]) -> f64 {
        let [a, b, c] = t.map(|i| self.points[i]);
        0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs()
    }

    pub fn triangle_sides(&self, t: [usize; 3]) -> [f64; 3] {
        let [a, b, c] = t.map(|i| self.points[i]);
        [a.distance(b), b.distance(c), c.distance(a)]
    }
}

/// Incremental Bowyer–Watson triangulation.
///
/// Hull edges are closed by ghost triangles sharing a vertex at infinity, so
/// no finite super-triangle is needed. Points are inserted in index order and
/// a point lying exactly on a circumcircle does not invalidate that triangle,
/// which makes co-circular ties resolve deterministically by index. Exact
/// duplicates of an earlier point are skipped.
pub fn delaunay_triangulate(points: &[Point2D]) -> Result<Triangulation, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::TooFewPoints { needed: 3, got: points.len() });
    }
    check_finite(points)?;

    let (i0, i1, i2) = initial_triangle(points).ok_or(GeometryError::DegenerateInput)?;
    let mut tris: Vec<[usize; 3]> = vec![[i0, i1, i2], [i1, i0, GHOST], [i2, i1, GHOST], [i0, i2, GHOST]];

    let mut bad = Vec::new();
    let mut directed: HashSet<(usize, usize)> = HashSet::new();
    for (idx, &p) in points.iter().enumerate() {
        if idx == i0 || idx == i1 || idx == i2 {
            continue;
        }
        bad.clear();
        bad.extend((0..tris.len()).filter(|&t| conflicts(points, tris[t], p)));
        if bad.is_empty() {
            // coincides with an existing vertex
            continue;
        }
        directed.clear();
        for &t in &bad {
            let tri = tris[t];
            for k in 0..3 {
                directed.insert((tri[k], tri[(k + 1) % 3]));
            }
        }
        let mut boundary: Vec<(usize, usize)> = directed
            .iter()
            .copied()
            .filter(|&(a, b)| !directed.contains(&(b, a)))
            .collect();
        boundary.sort_unstable();

        for &t in bad.iter().rev() {
            tris.swap_remove(t);
        }
        for (a, b) in boundary {
            tris.push(normalize_ghost([a, b, idx]));
        }
    }

    let mut triangles: Vec<[usize; 3]> = tris
        .into_iter()
        .filter(|t| !t.contains(&GHOST))
        .map(rotate_min_first)
        .collect();
    triangles.sort_unstable();
    Ok(Triangulation { points: points.to_vec(), triangles })
}

fn initial_triangle(points: &[Point2D]) -> Option<(usize, usize, usize)> {
    let i0 = 0;
    let i1 = (1..points.len()).find(|&i| points[i] != points[i0])?;
    let (i2, o) = (i1 + 1..points.len())
        .map(|i| (i, orient2d(points[i0], points[i1], points[i])))
        .find(|&(_, o)| o != Ordering::Equal)?;
    Some(if o == Ordering::Greater { (i0, i1, i2) } else { (i0, i2, i1) })
}

/// Whether `p` invalidates triangle `t`. A ghost triangle `(u, v, GHOST)`
/// stands for the open half-plane left of `u -> v` (outside the hull) plus the
/// open segment `uv`.
fn conflicts(points: &[Point2D], t: [usize; 3], p: Point2D) -> bool {
    if t[2] == GHOST {
        let (u, v) = (points[t[0]], points[t[1]]);
        match orient2d(u, v, p) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => strictly_between(u, v, p),
        }
    } else {
        incircle(points[t[0]], points[t[1]], points[t[2]], p) == Ordering::Greater
    }
}

fn strictly_between(u: Point2D, v: Point2D, p: Point2D) -> bool {
    let dot = (p.x - u.x) * (v.x - u.x) + (p.y - u.y) * (v.y - u.y);
    let len = (v.x - u.x) * (v.x - u.x) + (v.y - u.y) * (v.y - u.y);
    dot > 0.0 && dot < len
}

fn normalize_ghost(t: [usize; 3]) -> [usize; 3] {
    match t.iter().position(|&v| v == GHOST) {
        Some(0) => [t[1], t[2], t[0]],
        Some(1) => [t[2], t[0], t[1]],
        _ => t,
    }
}

fn rotate_min_first(t: [usize; 3]) -> [usize; 3] {
    let k = (0..3).min_by_key(|&k| t[k]).unwrap_or(0);
    [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
}
