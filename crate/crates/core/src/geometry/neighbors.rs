use super::{GeometryError, Point2D};

/// For every point, the distances to its `k` nearest other points in
/// ascending order. Short lists are padded by repeating the farthest
/// available distance; a point with no others gets `k` zeros.
pub fn k_nearest_distances(points: &[Point2D], k: usize) -> Vec<Vec<f64>> {
    let mut scratch = Vec::with_capacity(points.len());
    points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            scratch.clear();
            scratch.extend(points.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &q)| p.distance(q)));
            scratch.sort_unstable_by(f64::total_cmp);
            let pad = scratch.last().copied().unwrap_or(0.0);
            (0..k).map(|r| scratch.get(r).copied().unwrap_or(pad)).collect()
        })
        .collect()
}

/// Number of other points within distance `r` (closed ball) of each point.
pub fn count_within_radius(points: &[Point2D], r: f64) -> Result<Vec<usize>, GeometryError> {
    if !(r > 0.0) {
        return Err(GeometryError::NonPositiveRadius(r));
    }
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            points
                .iter()
                .enumerate()
                .filter(|&(j, &q)| j != i && p.distance(q) <= r)
                .count()
        })
        .collect())
}
