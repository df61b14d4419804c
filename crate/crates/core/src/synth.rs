//! Labeled synthetic images built from simple spatial point processes.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{CellRecord, N_ATTRS};
use crate::geometry::{ClipRect, Point2D};
use crate::parallel::Exec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid dataset spec: {0}")]
    SpecInvalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PointProcess {
    /// Homogeneous Poisson.
    Poisson,
    /// Square lattice at spacing `1/sqrt(intensity)`, each point displaced by
    /// isotropic Gaussian noise with standard deviation `jitter` times the
    /// spacing, so regularity does not depend on intensity.
    Lattice { jitter: f64 },
    /// Matérn cluster process: Poisson parents, Poisson(`offspring`)
    /// children uniform in a disk of `radius`.
    Clustered { radius: f64, offspring: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub process: PointProcess,
    /// Cells per square pixel.
    pub intensity: f64,
    /// Per-attribute mean of the 12 cell attributes.
    pub attr_mean: Vec<f64>,
    /// Standard deviation of the Gaussian noise added to each attribute.
    pub attr_noise: f64,
}

impl PatternSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::SpecInvalid(m));
        if !(self.intensity > 0.0 && self.intensity.is_finite()) {
            return bad(format!("intensity must be positive, got {}", self.intensity));
        }
        if !(self.attr_noise >= 0.0 && self.attr_noise.is_finite()) {
            return bad(format!("attr_noise must be non-negative, got {}", self.attr_noise));
        }
        if self.attr_mean.len() != N_ATTRS {
            return bad(format!("attr_mean needs {N_ATTRS} values, got {}", self.attr_mean.len()));
        }
        match self.process {
            PointProcess::Poisson => {}
            PointProcess::Lattice { jitter } if jitter >= 0.0 => {}
            PointProcess::Clustered { radius, offspring } if radius > 0.0 && offspring > 0.0 => {}
            other => return bad(format!("invalid process parameters {other:?}")),
        }
        Ok(())
    }
}

/// Per-patch intensity factors across the grid. Factors come in `1 ± delta`
/// pairs so the expected cell count per image does not depend on the layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Layout {
    Uniform,
    /// One half of the grid at `1 + delta`, the other at `1 - delta`; the split
    /// direction and sign are drawn per image.
    Halves { delta: f64 },
    /// Checkerboard of `1 ± delta` with a random phase per image.
    Checker { delta: f64 },
}

impl Layout {
    fn delta(self) -> f64 {
        match self {
            Layout::Uniform => 0.0,
            Layout::Halves { delta } | Layout::Checker { delta } => delta,
        }
    }

    fn factors<R: Rng + ?Sized>(self, rows: usize, cols: usize, rng: &mut R) -> Vec<f64> {
        match self {
            Layout::Uniform => vec![1.0; rows * cols],
            Layout::Halves { delta } => {
                let by_rows = rng.random::<bool>();
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                (0..rows * cols)
                    .map(|p| {
                        let (r, c) = (p / cols, p % cols);
                        let first = if by_rows { 2 * r < rows } else { 2 * c < cols };
                        if first {
                            1.0 + sign * delta
                        } else {
                            1.0 - sign * delta
                        }
                    })
                    .collect()
            }
            Layout::Checker { delta } => {
                let phase = usize::from(rng.random::<bool>());
                (0..rows * cols).map(|p| if (p / cols + p % cols + phase) % 2 == 0 { 1.0 + delta } else { 1.0 - delta }).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    pub pattern: PatternSpec,
    #[serde(default = "uniform_layout")]
    pub layout: Layout,
}

fn uniform_layout() -> Layout {
    Layout::Uniform
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub classes: Vec<ClassSpec>,
    pub images_per_class: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub patch_size: f64,
    pub stride: f64,
    pub seed: u64,
    /// Class is carried by the layout alone: every class must share one
    /// pattern, and image mean intensity is scrambled by `nuisance`.
    #[serde(default)]
    pub long_range: bool,
    /// Half-width of the per-image uniform log-intensity shift.
    #[serde(default)]
    pub nuisance: f64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::SpecInvalid(m));
        if self.classes.len() < 2 {
            return bad("at least two classes are required".into());
        }
        if self.images_per_class == 0 {
            return bad("images_per_class must be positive".into());
        }
        if self.grid_rows < 2 || self.grid_cols < 2 {
            return bad(format!("grid must be at least 2x2, got {}x{}", self.grid_rows, self.grid_cols));
        }
        if !(self.patch_size > 0.0 && self.stride > 0.0 && self.stride <= self.patch_size) {
            return bad(format!("need 0 < stride <= patch_size, got {} and {}", self.stride, self.patch_size));
        }
        if !(self.nuisance >= 0.0 && self.nuisance.is_finite()) {
            return bad(format!("nuisance must be non-negative, got {}", self.nuisance));
        }
        for c in &self.classes {
            c.pattern.validate()?;
            let d = c.layout.delta();
            if !(0.0..1.0).contains(&d) {
                return bad(format!("layout delta must lie in [0, 1), got {d}"));
            }
        }
        if self.long_range && self.classes.iter().any(|c| c.pattern != self.classes[0].pattern) {
            return bad("long-range classes must share one pattern".into());
        }
        Ok(())
    }

    pub fn image_count(&self) -> usize {
        self.classes.len() * self.images_per_class
    }

    pub fn patch_rect(&self, row: usize, col: usize) -> ClipRect {
        let (x0, y0) = (col as f64 * self.stride, row as f64 * self.stride);
        ClipRect { xmin: x0, ymin: y0, xmax: x0 + self.patch_size, ymax: y0 + self.patch_size }
    }

    fn extent(&self) -> (f64, f64) {
        (
            (self.grid_cols - 1) as f64 * self.stride + self.patch_size,
            (self.grid_rows - 1) as f64 * self.stride + self.patch_size,
        )
    }
}

/// One patch of one synthetic image.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPatch {
    pub patch_id: u32,
    pub row: u32,
    pub col: u32,
    pub rect: ClipRect,
    pub cells: Vec<CellRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub image_id: String,
    pub label: usize,
    pub patches: Vec<SynthPatch>,
}

fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Open01.sample(rng)
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map_or(0, |d| d.sample(rng) as usize)
}

/// Points of one process realization strictly inside `rect`. Lattice and
/// cluster displacements wrap around the rectangle so intensity stays
/// uniform up to the edges.
pub fn sample_points<R: Rng + ?Sized>(process: PointProcess, intensity: f64, rect: ClipRect, rng: &mut R) -> Vec<Point2D> {
    let (w, h) = (rect.width(), rect.height());
    let wrap = |x: f64, y: f64| {
        let mut px = x.rem_euclid(w);
        let mut py = y.rem_euclid(h);
        // rem_euclid can return exactly w for tiny negative inputs
        if px >= w || px <= 0.0 {
            px = w * 0.5f64.powi(40);
        }
        if py >= h || py <= 0.0 {
            py = h * 0.5f64.powi(40);
        }
        Point2D::new(rect.xmin + px, rect.ymin + py)
    };
    match process {
        PointProcess::Poisson => (0..poisson(intensity * w * h, rng))
            .map(|_| Point2D::new(rect.xmin + open01(rng) * w, rect.ymin + open01(rng) * h))
            .collect(),
        PointProcess::Lattice { jitter } => {
            let spacing = 1.0 / intensity.sqrt();
            let (nx, ny) = ((w / spacing).round().max(1.0) as usize, (h / spacing).round().max(1.0) as usize);
            let (sx, sy) = (w / nx as f64, h / ny as f64);
            let normal = Normal::new(0.0, jitter.max(0.0) * spacing).ok();
            let mut pts = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    let (mut x, mut y) = ((i as f64 + 0.5) * sx, (j as f64 + 0.5) * sy);
                    if jitter > 0.0 {
                        if let Some(nd) = &normal {
                            x += nd.sample(rng);
                            y += nd.sample(rng);
                        }
                        pts.push(wrap(x, y));
                    } else {
                        pts.push(Point2D::new(rect.xmin + x, rect.ymin + y));
                    }
                }
            }
            pts
        }
        PointProcess::Clustered { radius, offspring } => {
            let parents = poisson(intensity / offspring * w * h, rng);
            let mut pts = Vec::new();
            for _ in 0..parents {
                let (px, py) = (open01(rng) * w, open01(rng) * h);
                for _ in 0..poisson(offspring, rng) {
                    let r = radius * open01(rng).sqrt();
                    let a = std::f64::consts::TAU * open01(rng);
                    pts.push(wrap(px + r * a.cos(), py + r * a.sin()));
                }
            }
            pts
        }
    }
}

fn sample_attrs<R: Rng + ?Sized>(pattern: &PatternSpec, rng: &mut R) -> [f64; N_ATTRS] {
    let mut out = [0.0; N_ATTRS];
    for (o, &m) in out.iter_mut().zip(&pattern.attr_mean) {
        let z: f64 = if pattern.attr_noise > 0.0 {
            Normal::new(0.0, 1.0).map_or(0.0, |d| d.sample(rng))
        } else {
            0.0
        };
        *o = m + pattern.attr_noise * z;
    }
    out
}

/// Cells for one patch-sized rectangle.
pub fn generate_patch<R: Rng + ?Sized>(pattern: &PatternSpec, rect: ClipRect, rng: &mut R) -> Vec<CellRecord> {
    sample_points(pattern.process, pattern.intensity, rect, rng)
        .into_iter()
        .map(|p| CellRecord { centroid: p, attrs: sample_attrs(pattern, rng) })
        .collect()
}

fn image_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generates image `index` (class `index / images_per_class`).
pub fn generate_image(spec: &DatasetSpec, index: usize) -> SynthImage {
    let label = index / spec.images_per_class;
    let class = &spec.classes[label];
    let mut rng = ChaCha8Rng::seed_from_u64(image_seed(spec.seed, index));
    let (rows, cols) = (spec.grid_rows, spec.grid_cols);
    let shift = if spec.nuisance > 0.0 { rng.random_range(-spec.nuisance..=spec.nuisance) } else { 0.0 };
    let factors = class.layout.factors(rows, cols, &mut rng);

    // cells are generated per stride-sized tile, each tile taking the
    // pattern of the patch whose origin it is (clamped at the far edges)
    let (ew, eh) = spec.extent();
    let tiles_x = (ew / spec.stride).ceil() as usize;
    let tiles_y = (eh / spec.stride).ceil() as usize;
    let mut all = Vec::new();
    for ty in 0..tiles_y {
        for tx in 0..tiles_x {
            let (pr, pc) = (ty.min(rows - 1), tx.min(cols - 1));
            let mut pattern = class.pattern.clone();
            pattern.intensity *= shift.exp() * factors[pr * cols + pc];
            let x0 = tx as f64 * spec.stride;
            let y0 = ty as f64 * spec.stride;
            let rect = ClipRect { xmin: x0, ymin: y0, xmax: (x0 + spec.stride).min(ew), ymax: (y0 + spec.stride).min(eh) };
            all.extend(generate_patch(&pattern, rect, &mut rng));
        }
    }

    let patches = (0..rows * cols)
        .map(|p| {
            let (r, c) = (p / cols, p % cols);
            let rect = spec.patch_rect(r, c);
            let cells = all.iter().filter(|cell| rect.contains_strictly(cell.centroid)).cloned().collect();
            SynthPatch { patch_id: p as u32, row: r as u32, col: c as u32, rect, cells }
        })
        .collect();
    SynthImage { image_id: format!("img_{index:04}"), label, patches }
}

pub fn generate_dataset(spec: &DatasetSpec, exec: Exec) -> Result<Vec<SynthImage>, SynthError> {
    spec.validate()?;
    Ok(exec.map_indexed(spec.image_count(), |i| generate_image(spec, i)))
}

/// Clark–Evans aggregation index `R = mean NN distance / E[NN distance]`
/// under complete spatial randomness, with Donnelly's edge correction for
/// a rectangular window. `R < 1` clustered, `R > 1` regular.
pub fn clark_evans(points: &[Point2D], window: ClipRect) -> Option<f64> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let d = points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, q)| p.distance(*q))
            .fold(f64::INFINITY, f64::min);
        total += d;
    }
    let observed = total / n as f64;
    let (area, perimeter) = (window.area(), 2.0 * (window.width() + window.height()));
    let nf = n as f64;
    let expected = 0.5 * (area / nf).sqrt() + (0.0514 + 0.041 / nf.sqrt()) * perimeter / nf;
    Some(observed / expected)
}

fn attrs(base: f64) -> Vec<f64> {
    (0..N_ATTRS).map(|k| base + 0.25 * k as f64).collect()
}

/// Three classes: regular, random and clustered cell layouts.
pub fn default_spec() -> DatasetSpec {
    let intensity = 0.0016;
    DatasetSpec {
        name: "default3".into(),
        classes: vec![
            ClassSpec {
                name: "regular".into(),
                pattern: PatternSpec { process: PointProcess::Lattice { jitter: 0.12 }, intensity, attr_mean: attrs(2.0), attr_noise: 0.4 },
                layout: Layout::Uniform,
            },
            ClassSpec {
                name: "random".into(),
                pattern: PatternSpec { process: PointProcess::Poisson, intensity, attr_mean: attrs(2.0), attr_noise: 0.8 },
                layout: Layout::Uniform,
            },
            ClassSpec {
                name: "clustered".into(),
                pattern: PatternSpec {
                    process: PointProcess::Clustered { radius: 20.0, offspring: 8.0 },
                    intensity,
                    attr_mean: attrs(2.0),
                    attr_noise: 1.2,
                },
                layout: Layout::Uniform,
            },
        ],
        images_per_class: 40,
        grid_rows: 4,
        grid_cols: 4,
        patch_size: 256.0,
        stride: 256.0,
        seed: 7,
        long_range: false,
        nuisance: 0.0,
    }
}

/// Same pattern everywhere; classes differ only in how intensity varies
/// between patches of an image.
pub fn long_range_spec() -> DatasetSpec {
    let pattern = PatternSpec { process: PointProcess::Poisson, intensity: 0.004, attr_mean: attrs(2.0), attr_noise: 0.6 };
    let class = |name: &str, layout| ClassSpec { name: name.into(), pattern: pattern.clone(), layout };
    DatasetSpec {
        name: "long_range".into(),
        classes: vec![
            class("uniform", Layout::Uniform),
            class("halves", Layout::Halves { delta: 0.25 }),
            class("checker", Layout::Checker { delta: 0.5 }),
        ],
        images_per_class: 40,
        grid_rows: 4,
        grid_cols: 4,
        patch_size: 128.0,
        stride: 128.0,
        seed: 11,
        long_range: true,
        nuisance: 0.6,
    }
}
