//! Brute-force reference implementations, deliberately written without the
//! library's algorithms: Kruskal instead of Prim, empty-circumcircle triple
//! enumeration instead of Bowyer–Watson, all-sites half-plane clipping for
//! Voronoi cells, Floyd–Warshall for hop distances and cyclic Jacobi for
//! eigenvalues.

use abig::features::{CellRecord, N_FEATURES};
use abig::geometry::{ClipRect, Point2D};
use rand::Rng;

pub fn dist(a: Point2D, b: Point2D) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Kruskal over all pairs; returns the MST edge lengths in ascending order.
pub fn kruskal_weights(points: &[Point2D]) -> Vec<f64> {
    let n = points.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((dist(points[i], points[j]), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    for (w, i, j) in pairs {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a] = b;
            out.push(w);
        }
    }
    out
}

/// Circumcenter and radius of a non-degenerate triangle.
pub fn circumcircle(a: Point2D, b: Point2D, c: Point2D) -> Option<(Point2D, f64)> {
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    if d.abs() < 1e-12 {
        return None;
    }
    let (a2, b2, c2) = (a.x * a.x + a.y * a.y, b.x * b.x + b.y * b.y, c.x * c.x + c.y * c.y);
    let ux = (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d;
    let uy = (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d;
    let center = Point2D::new(ux, uy);
    Some((center, dist(center, a)))
}

/// Smallest `dist(p, center) - radius` over points not on the triangle.
pub fn empty_circle_margin(points: &[Point2D], t: [usize; 3]) -> f64 {
    let (c, r) = circumcircle(points[t[0]], points[t[1]], points[t[2]]).expect("degenerate triangle");
    points
        .iter()
        .enumerate()
        .filter(|(i, _)| !t.contains(i))
        .map(|(_, &p)| dist(p, c) - r)
        .fold(f64::INFINITY, f64::min)
}

/// All triples with an empty circumcircle, as sorted index triples. For
/// points in general position this is exactly the Delaunay triangulation.
pub fn brute_delaunay(points: &[Point2D]) -> Vec<[usize; 3]> {
    let n = points.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let Some((c, r)) = circumcircle(points[i], points[j], points[k]) else { continue };
                let empty = (0..n).all(|m| m == i || m == j || m == k || dist(points[m], c) > r * (1.0 + 1e-12));
                if empty {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

pub fn triangle_area(a: Point2D, b: Point2D, c: Point2D) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)).abs()
}

/// Shoelace area of a simple polygon.
pub fn shoelace(poly: &[Point2D]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        s += p.x * q.y - q.x * p.y;
    }
    0.5 * s.abs()
}

/// Clip a convex polygon to `{q : |q - a| <= |q - b|}`.
fn clip_bisector(poly: &[Point2D], a: Point2D, b: Point2D) -> Vec<Point2D> {
    // signed value: positive on a's side
    let f = |q: Point2D| (b.x - a.x) * (q.x - 0.5 * (a.x + b.x)) + (b.y - a.y) * (q.y - 0.5 * (a.y + b.y));
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (fp, fq) = (-f(p), -f(q));
        if fp >= 0.0 {
            out.push(p);
        }
        if (fp >= 0.0) != (fq >= 0.0) {
            let t = fp / (fp - fq);
            out.push(Point2D::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)));
        }
    }
    out
}

/// Voronoi cell of every site: the clip rectangle cut by the bisector with
/// every other site.
pub fn brute_voronoi(points: &[Point2D], clip: ClipRect) -> Vec<Vec<Point2D>> {
    points
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let mut poly = vec![
                Point2D::new(clip.xmin, clip.ymin),
                Point2D::new(clip.xmax, clip.ymin),
                Point2D::new(clip.xmax, clip.ymax),
                Point2D::new(clip.xmin, clip.ymax),
            ];
            for (j, &b) in points.iter().enumerate() {
                if j != i && !poly.is_empty() {
                    poly = clip_bisector(&poly, a, b);
                }
            }
            poly
        })
        .collect()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let total: f64 = a.iter().flatten().map(|v| v * v).sum();
        if off <= 1e-30 * total.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// `[mean, population sd, min/max, sd/mean]` with x/0 = 0.
pub fn stats4(v: &[f64]) -> [f64; 4] {
    if v.is_empty() {
        return [0.0; 4];
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    [mean, sd, div(min, max), div(sd, mean)]
}

fn cos_sim(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
}

fn snap(v: f64) -> f64 {
    for t in [0.0, 1.0, 2.0] {
        if (v - t).abs() <= 1e-9 {
            return t;
        }
    }
    v
}

fn slope(sorted: &[f64], lo: f64, hi: f64) -> f64 {
    let n = sorted.len() as f64;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, &v) in sorted.iter().enumerate() {
        if v >= lo && v <= hi {
            xs.push(i as f64 / n);
            ys.push(v);
        }
    }
    if xs.len() < 2 {
        return 0.0;
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// The full 69-vector recomputed from scratch (at least three cells in
/// general position).
pub fn brute_features(cells: &[CellRecord], d_p: f64, theta_sim: f64, clip: ClipRect) -> [f64; N_FEATURES] {
    let n = cells.len();
    let pts: Vec<Point2D> = cells.iter().map(|c| c.centroid).collect();
    let mut out = [0.0; N_FEATURES];

    // cell graph as a dense 0/1 matrix
    let mut adj = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dist(pts[i], pts[j]) < d_p && cos_sim(&cells[i].attrs, &cells[j].attrs) > theta_sim {
                adj[i][j] = 1.0;
            }
        }
    }
    let deg: Vec<f64> = adj.iter().map(|r| r.iter().sum()).collect();
    let edges = deg.iter().sum::<f64>() / 2.0;

    // clustering via closed walks of length three
    let mut clustering = 0.0;
    for i in 0..n {
        let mut tri = 0.0;
        for j in 0..n {
            for k in 0..n {
                tri += adj[i][j] * adj[j][k] * adj[k][i];
            }
        }
        if deg[i] >= 2.0 {
            clustering += tri / (deg[i] * (deg[i] - 1.0));
        }
    }
    out[0] = clustering / n as f64;
    out[1] = 2.0 * edges / n as f64;

    // hop distances by Floyd–Warshall
    let inf = usize::MAX / 4;
    let mut hop = vec![vec![inf; n]; n];
    for i in 0..n {
        hop[i][i] = 0;
        for j in 0..n {
            if adj[i][j] == 1.0 {
                hop[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if hop[i][k] + hop[k][j] < hop[i][j] {
                    hop[i][j] = hop[i][k] + hop[k][j];
                }
            }
        }
    }
    let comp_of: Vec<usize> = (0..n).map(|i| (0..n).find(|&j| hop[i][j] < inf).unwrap()).collect();
    let mut roots: Vec<usize> = comp_of.clone();
    roots.sort_unstable();
    roots.dedup();
    let size = |r: usize| comp_of.iter().filter(|&&c| c == r).count();
    let giant_size = roots.iter().map(|&r| size(r)).max().unwrap();
    let giant_root = *roots.iter().find(|&&r| size(r) == giant_size).unwrap();
    out[2] = roots.len() as f64;
    out[3] = giant_size as f64 / n as f64;

    let members: Vec<usize> = (0..n).filter(|&i| comp_of[i] == giant_root).collect();
    let ecc: Vec<usize> = members.iter().map(|&i| members.iter().map(|&j| hop[i][j]).max().unwrap()).collect();
    let radius = *ecc.iter().min().unwrap();
    let central = ecc.iter().filter(|&&e| e == radius).count();
    let mut closeness = 0.0;
    for i in 0..n {
        let same: Vec<usize> = (0..n).filter(|&j| j != i && comp_of[j] == comp_of[i]).collect();
        if !same.is_empty() {
            closeness += same.len() as f64 / same.iter().map(|&j| hop[i][j]).sum::<usize>() as f64;
        }
    }
    out[4] = n as f64;
    out[5] = edges;
    out[6] = ecc.iter().sum::<usize>() as f64 / ecc.len() as f64;
    out[7] = radius as f64;
    out[8] = *ecc.iter().max().unwrap() as f64;
    out[9] = central as f64;
    out[10] = 100.0 * central as f64 / members.len() as f64;
    out[11] = closeness / n as f64;

    // spectra
    let avg_deg = out[1];
    let lap: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { deg[i] } else { -adj[i][j] }).collect()).collect();
    out[12] = jacobi_eigenvalues(lap).iter().map(|l| (l - avg_deg).abs()).sum();
    out[13] = deg.iter().sum();
    let norm: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        if deg[i] > 0.0 { 1.0 } else { 0.0 }
                    } else if adj[i][j] == 1.0 {
                        -1.0 / (deg[i] * deg[j]).sqrt()
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let mut ne: Vec<f64> = jacobi_eigenvalues(norm).into_iter().map(snap).collect();
    ne.sort_by(f64::total_cmp);
    out[14] = slope(&ne, 1.0, 2.0);
    out[15] = slope(&ne, 0.0, 1.0);
    let ae = jacobi_eigenvalues(adj.clone());
    out[16] = ae.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    out[17] = ae.iter().map(|v| v.abs()).sum();

    // Voronoi
    let cells_v = brute_voronoi(&pts, clip);
    let areas: Vec<f64> = cells_v.iter().map(|c| shoelace(c)).collect();
    let perims: Vec<f64> = cells_v.iter().map(|c| (0..c.len()).map(|i| dist(c[i], c[(i + 1) % c.len()])).sum()).collect();
    let mut chords = Vec::new();
    for c in &cells_v {
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                chords.push(dist(c[i], c[j]));
            }
        }
    }
    out[18] = areas.iter().sum();
    out[19..23].copy_from_slice(&stats4(&areas));
    out[23..27].copy_from_slice(&stats4(&chords));
    out[27..31].copy_from_slice(&stats4(&perims));

    // Delaunay
    let tris = brute_delaunay(&pts);
    let t_areas: Vec<f64> = tris.iter().map(|t| triangle_area(pts[t[0]], pts[t[1]], pts[t[2]])).collect();
    let sides: Vec<f64> = tris
        .iter()
        .flat_map(|t| [dist(pts[t[0]], pts[t[1]]), dist(pts[t[1]], pts[t[2]]), dist(pts[t[2]], pts[t[0]])])
        .collect();
    out[31..35].copy_from_slice(&stats4(&t_areas));
    out[35..39].copy_from_slice(&stats4(&sides));

    // MST
    out[39..43].copy_from_slice(&stats4(&kruskal_weights(&pts)));

    // nearest neighbors
    out[43] = n as f64 / ((clip.xmax - clip.xmin) * (clip.ymax - clip.ymin));
    out[44] = n as f64;
    for (b, k) in [3usize, 5, 7].into_iter().enumerate() {
        let kth: Vec<f64> = (0..n)
            .map(|i| {
                let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist(pts[i], pts[j])).collect();
                d.sort_by(f64::total_cmp);
                d[(k - 1).min(d.len() - 1)]
            })
            .collect();
        let s = stats4(&kth);
        out[45 + 3 * b..48 + 3 * b].copy_from_slice(&[s[0], s[1], s[3]]);
    }
    for (b, r) in [10.0, 20.0, 30.0, 40.0, 50.0].into_iter().enumerate() {
        let counts: Vec<f64> =
            (0..n).map(|i| (0..n).filter(|&j| j != i && dist(pts[i], pts[j]) <= r).count() as f64).collect();
        let s = stats4(&counts);
        out[54 + 3 * b..57 + 3 * b].copy_from_slice(&[s[0], s[1], s[3]]);
    }
    out
}

/// Random patch: `n` cells uniform in `clip`, attributes drawn around one of
/// two prototypes so the cosine rule prunes some pairs.
pub fn random_patch<R: Rng>(rng: &mut R, n: usize, clip: ClipRect) -> Vec<CellRecord> {
    let protos = [[1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 2.0, 3.0], [3.0, 1.0, 1.0, 3.0, 1.0, 1.0, 3.0, 1.0, 1.0, 3.0, 1.0, 1.0]];
    (0..n)
        .map(|_| {
            let x = rng.random_range(clip.xmin + 1e-6..clip.xmax);
            let y = rng.random_range(clip.ymin + 1e-6..clip.ymax);
            let p = protos[rng.random_range(0..2)];
            let attrs = p.map(|v| v + rng.random_range(-0.8..0.8));
            CellRecord::new(x, y, attrs)
        })
        .collect()
}
