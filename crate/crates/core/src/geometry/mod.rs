//! Planar geometry over cell centroids: Delaunay triangulation, clipped
//! Voronoi cells, Euclidean minimum spanning trees and neighbor queries.
//!
//! Everything here is a pure function of its inputs.

mod delaunay;
mod mst;
mod neighbors;
pub mod predicates;
mod voronoi;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use delaunay::{delaunay_triangulate, Triangulation};
pub use mst::{euclidean_mst, WeightedEdgeList};
pub use neighbors::{count_within_radius, k_nearest_distances};
pub use voronoi::{polygon_area, polygon_perimeter, voronoi_partition, VoronoiPartition};

/// Predicate tolerance in squared-pixel units.
pub const EPS_GEO: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate input: all points are collinear or coincident")]
    DegenerateInput,
    #[error("point {index} ({x}, {y}) is not strictly inside the clip rectangle")]
    PointOutsideClip { index: usize, x: f64, y: f64 },
    #[error("empty point set")]
    EmptyInput,
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("invalid clip rectangle")]
    InvalidClipRect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2D) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn distance_sq(self, other: Point2D) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned rectangle `(xmin, ymin, xmax, ymax)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipRect {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl ClipRect {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self, GeometryError> {
        let r = Self { xmin, ymin, xmax, ymax };
        if [xmin, ymin, xmax, ymax].iter().all(|v| v.is_finite()) && xmax > xmin && ymax > ymin {
            Ok(r)
        } else {
            Err(GeometryError::InvalidClipRect)
        }
    }

    pub fn unit() -> Self {
        Self { xmin: 0.0, ymin: 0.0, xmax: 1.0, ymax: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains_strictly(&self, p: Point2D) -> bool {
        p.x > self.xmin && p.x < self.xmax && p.y > self.ymin && p.y < self.ymax
    }

    /// Corners in counterclockwise order starting at `(xmin, ymin)`.
    pub fn corners(&self) -> Vec<Point2D> {
        vec![
            Point2D::new(self.xmin, self.ymin),
            Point2D::new(self.xmax, self.ymin),
            Point2D::new(self.xmax, self.ymax),
            Point2D::new(self.xmin, self.ymax),
        ]
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            xmin: self.xmin + dx,
            ymin: self.ymin + dy,
            xmax: self.xmax + dx,
            ymax: self.ymax + dy,
        }
    }
}

pub(crate) fn check_finite(points: &[Point2D]) -> Result<(), GeometryError> {
    match points.iter().position(|p| !p.is_finite()) {
        Some(i) => Err(GeometryError::NonFinite(i)),
        None => Ok(()),
    }
}
