use serde::{Deserialize, Serialize};

use super::{check_finite, delaunay_triangulate, ClipRect, GeometryError, Point2D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiPartition {
    pub points: Vec<Point2D>,
    /// One counterclockwise polygon per input point. A point that exactly
    /// duplicates an earlier one gets an empty polygon.
    pub cells: Vec<Vec<Point2D>>,
    pub clip_rect: ClipRect,
}

impl VoronoiPartition {
    pub fn cell_area(&self, i: usize) -> f64 {
        polygon_area(&self.cells[i])
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| polygon_area(c)).sum()
    }
}

/// Voronoi cells clipped to `clip`.
///
/// Each cell is the clip rectangle cut by the bisector half-planes of the
/// point's Delaunay neighbors (Sutherland–Hodgman, one half-plane at a time).
/// When no triangulation exists (fewer than three points, or all collinear)
/// every other point is treated as a neighbor.
pub fn voronoi_partition(points: &[Point2D], clip: ClipRect) -> Result<VoronoiPartition, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    check_finite(points)?;
    if let Some(i) = points.iter().position(|&p| !clip.contains_strictly(p)) {
        return Err(GeometryError::PointOutsideClip { index: i, x: points[i].x, y: points[i].y });
    }

    let n = points.len();
    // first occurrence of each coordinate pair
    let mut canonical: Vec<usize> = (0..n).collect();
    for i in 0..n {
        if let Some(j) = (0..i).find(|&j| points[j] == points[i]) {
            canonical[i] = canonical[j];
        }
    }

    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    match delaunay_triangulate(points) {
        Ok(t) => {
            for (a, b) in t.edges() {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        Err(_) => {
            for (i, nb) in neighbors.iter_mut().enumerate() {
                nb.extend((0..n).filter(|&j| j != i && canonical[j] == j && points[j] != points[i]));
            }
        }
    }

    let cells = (0..n)
        .map(|i| {
            if canonical[i] != i {
                return Vec::new();
            }
            let mut poly = clip.corners();
            for &j in &neighbors[i] {
                poly = clip_halfplane(&poly, points[i], points[j]);
                if poly.is_empty() {
                    break;
                }
            }
            poly
        })
        .collect();

    Ok(VoronoiPartition { points: points.to_vec(), cells, clip_rect: clip })
}

/// Keeps the part of `poly` closer to `own` than to `other`.
fn clip_halfplane(poly: &[Point2D], own: Point2D, other: Point2D) -> Vec<Point2D> {
    let (dx, dy) = (other.x - own.x, other.y - own.y);
    let c = 0.5 * ((other.x * other.x + other.y * other.y) - (own.x * own.x + own.y * own.y));
    let f = |p: Point2D| dx * p.x + dy * p.y - c;

    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let s = poly[k];
        let e = poly[(k + 1) % poly.len()];
        let (fs, fe) = (f(s), f(e));
        if fs <= 0.0 {
            out.push(s);
        }
        if (fs < 0.0 && fe > 0.0) || (fs > 0.0 && fe < 0.0) {
            let t = fs / (fs - fe);
            out.push(Point2D::new(s.x + t * (e.x - s.x), s.y + t * (e.y - s.y)));
        }
    }
    if out.len() < 3 {
        out.clear();
    }
    out
}

/// Shoelace area; positive for counterclockwise polygons.
pub fn polygon_area(poly: &[Point2D]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        s += a.x * b.y - b.x * a.y;
    }
    0.5 * s
}

pub fn polygon_perimeter(poly: &[Point2D]) -> f64 {
    let n = poly.len();
    if n < 2 {
        return 0.0;
    }
    (0..n).map(|k| poly[k].distance(poly[(k + 1) % n])).sum()
}
