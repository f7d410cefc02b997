//! SLIC superpixels: grid-seeded centers nudged off edges, localized
//! k-means in joint CIELAB + image-plane space, then a connectivity pass.
//!
//! Pixel `(x, y)` sits at the continuous position `(x + 0.5, y + 0.5)`, so a
//! grid cell's centroid and its seed coincide and centers live in
//! `[0, width) × [0, height)`.

use crate::error::{Error, Result};
use crate::labels::SuperpixelMap;
use crate::raster::{Lab, LabImage, RasterImage};

const DEFAULT_COMPACTNESS: f64 = 10.0;
const DEFAULT_MAX_ITERS: usize = 10;
const DEFAULT_RESIDUAL_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicParams {
    /// Requested number of superpixels.
    pub k: usize,
    /// Weight of spatial proximity against color similarity, in `[1, 40]`.
    pub compactness: f64,
    pub max_iters: usize,
    /// Stop once the summed center displacement (pixels) drops to this.
    pub residual_threshold: f64,
}

impl SlicParams {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            compactness: DEFAULT_COMPACTNESS,
            max_iters: DEFAULT_MAX_ITERS,
            residual_threshold: DEFAULT_RESIDUAL_THRESHOLD,
        }
    }

    pub fn with_compactness(mut self, m: f64) -> Self {
        self.compactness = m;
        self
    }

    pub fn validate(&self, num_pixels: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Param("superpixel count must be at least 1".into()));
        }
        if self.k > num_pixels {
            return Err(Error::Param(format!(
                "requested {} superpixels but the image has only {num_pixels} pixels",
                self.k
            )));
        }
        if !(1.0..=40.0).contains(&self.compactness) {
            return Err(Error::Param(format!(
                "compactness {} outside [1, 40]",
                self.compactness
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Param("max_iters must be at least 1".into()));
        }
        if !(self.residual_threshold >= 0.0) {
            return Err(Error::Param("residual threshold must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterCenter {
    pub l: f64,
    pub a: f64,
    pub b: f64,
    pub x: f64,
    pub y: f64,
}

impl ClusterCenter {
    fn color(&self) -> Lab {
        Lab { l: self.l, a: self.a, b: self.b }
    }
}

// sRGB primaries, D65. White is taken as the image of (1, 1, 1) so that
// neutral grays map to a = b = 0 exactly.
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412453, 0.357580, 0.180423],
    [0.212671, 0.715160, 0.072169],
    [0.019334, 0.119193, 0.950227],
];

fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Converts one sRGB pixel to CIELAB under D65.
pub fn srgb_to_lab(rgb: [u8; 3]) -> Lab {
    let lin = rgb.map(srgb_to_linear);
    let mut f = [0.0; 3];
    for (row, out) in SRGB_TO_XYZ.iter().zip(f.iter_mut()) {
        let white: f64 = row.iter().sum();
        let v: f64 = row.iter().zip(&lin).map(|(m, c)| m * c).sum();
        *out = lab_f(v / white);
    }
    Lab {
        l: 116.0 * f[1] - 16.0,
        a: 500.0 * (f[0] - f[1]),
        b: 200.0 * (f[1] - f[2]),
    }
}

pub fn rgb_to_lab(img: &RasterImage) -> LabImage {
    let data = img.pixels().iter().map(|&p| srgb_to_lab(p)).collect();
    LabImage::new(img.width(), img.height(), data).expect("dimensions come from a valid raster")
}

/// Column/row counts of the seeding grid: `cols = ceil(sqrt(k * w / h))`,
/// `rows = ceil(k / cols)`; the first `k` cells in row-major order are used.
pub fn grid_shape(k: usize, width: u32, height: u32) -> (usize, usize) {
    let aspect = width as f64 / height as f64;
    let cols = ((k as f64 * aspect).sqrt().ceil() as usize).clamp(1, k.min(width as usize));
    let rows = k.div_ceil(cols);
    (cols, rows)
}

/// Squared-difference gradient at `(x, y)`, replicating edge pixels.
pub fn gradient(lab: &LabImage, x: u32, y: u32) -> f64 {
    let (w, h) = (lab.width(), lab.height());
    let left = lab.at(x.saturating_sub(1), y);
    let right = lab.at((x + 1).min(w - 1), y);
    let up = lab.at(x, y.saturating_sub(1));
    let down = lab.at(x, (y + 1).min(h - 1));
    right.distance_sq(&left) + down.distance_sq(&up)
}

/// Seeds `k` centers on a regular grid, then moves each to the lowest
/// gradient interior pixel of its 3×3 neighbourhood. A seed only moves on a
/// strict improvement, so flat regions keep exact grid positions.
pub fn init_centers(lab: &LabImage, k: usize) -> Result<Vec<ClusterCenter>> {
    let (w, h) = (lab.width(), lab.height());
    let n = w as usize * h as usize;
    if k == 0 || k > n {
        return Err(Error::Param(format!("cannot seed {k} centers on {n} pixels")));
    }
    let (cols, rows) = grid_shape(k, w, h);
    let step_x = w as f64 / cols as f64;
    let step_y = h as f64 / rows as f64;

    let mut centers = Vec::with_capacity(k);
    'grid: for j in 0..rows {
        for i in 0..cols {
            if centers.len() == k {
                break 'grid;
            }
            let gx = (i as f64 + 0.5) * step_x;
            let gy = (j as f64 + 0.5) * step_y;
            let px = (gx.floor() as u32).min(w - 1);
            let py = (gy.floor() as u32).min(h - 1);

            let mut best = (px, py);
            let mut best_grad = gradient(lab, px, py);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (cx, cy) = (px as i64 + dx, py as i64 + dy);
                    let interior = cx > 0 && cy > 0 && cx < w as i64 - 1 && cy < h as i64 - 1;
                    if (dx, dy) == (0, 0) || !interior {
                        continue;
                    }
                    let g = gradient(lab, cx as u32, cy as u32);
                    if g < best_grad {
                        best_grad = g;
                        best = (cx as u32, cy as u32);
                    }
                }
            }

            let (x, y) = if best == (px, py) {
                (gx, gy)
            } else {
                (best.0 as f64 + 0.5, best.1 as f64 + 0.5)
            };
            let color = lab.at(best.0, best.1);
            centers.push(ClusterCenter { l: color.l, a: color.a, b: color.b, x, y });
        }
    }
    Ok(centers)
}

/// Normalized color + space distance `sqrt(dc² + (ds/S)² · m²)`.
pub fn distance(center: &ClusterCenter, pixel: &ClusterCenter, grid_interval: f64, compactness: f64) -> f64 {
    distance_sq(center, pixel.color(), pixel.x, pixel.y, grid_interval, compactness).sqrt()
}

#[inline]
fn distance_sq(center: &ClusterCenter, color: Lab, x: f64, y: f64, s: f64, m: f64) -> f64 {
    let dc2 = center.color().distance_sq(&color);
    let dx = center.x - x;
    let dy = center.y - y;
    let ds2 = dx * dx + dy * dy;
    dc2 + ds2 / (s * s) * m * m
}

/// Result of a segmentation together with loop diagnostics.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub map: SuperpixelMap,
    pub centers: Vec<ClusterCenter>,
    pub iterations: usize,
    pub final_residual: f64,
}

pub fn segment(img: &RasterImage, params: &SlicParams) -> Result<SuperpixelMap> {
    segment_detailed(img, params).map(|s| s.map)
}

pub fn segment_detailed(img: &RasterImage, params: &SlicParams) -> Result<Segmentation> {
    let (w, h) = img.dimensions();
    let n = img.len();
    params.validate(n)?;
    let lab = rgb_to_lab(img);
    let mut centers = init_centers(&lab, params.k)?;
    let s = (n as f64 / params.k as f64).sqrt();
    let m = params.compactness;

    let mut labels: Vec<Option<u32>> = vec![None; n];
    let mut best_dist = vec![f64::INFINITY; n];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;

    while iterations < params.max_iters {
        iterations += 1;
        labels.fill(None);
        best_dist.fill(f64::INFINITY);

        for (ci, c) in centers.iter().enumerate() {
            let x0 = (c.x - s - 0.5).ceil().max(0.0) as u32;
            let y0 = (c.y - s - 0.5).ceil().max(0.0) as u32;
            let x1 = ((c.x + s - 0.5).floor().min(w as f64 - 1.0)) as i64;
            let y1 = ((c.y + s - 0.5).floor().min(h as f64 - 1.0)) as i64;
            for y in y0 as i64..=y1 {
                for x in x0 as i64..=x1 {
                    let idx = y as usize * w as usize + x as usize;
                    let color = lab.pixels()[idx];
                    let d = distance_sq(c, color, x as f64 + 0.5, y as f64 + 0.5, s, m);
                    if d < best_dist[idx] {
                        best_dist[idx] = d;
                        labels[idx] = Some(ci as u32);
                    }
                }
            }
        }

        let mut sums = vec![[0.0f64; 6]; centers.len()];
        for (idx, label) in labels.iter().enumerate() {
            if let Some(ci) = label {
                let p = lab.pixels()[idx];
                let acc = &mut sums[*ci as usize];
                acc[0] += p.l;
                acc[1] += p.a;
                acc[2] += p.b;
                acc[3] += (idx % w as usize) as f64 + 0.5;
                acc[4] += (idx / w as usize) as f64 + 0.5;
                acc[5] += 1.0;
            }
        }
        residual = 0.0;
        for (c, acc) in centers.iter_mut().zip(&sums) {
            let count = acc[5];
            if count == 0.0 {
                continue;
            }
            let next = ClusterCenter {
                l: acc[0] / count,
                a: acc[1] / count,
                b: acc[2] / count,
                x: acc[3] / count,
                y: acc[4] / count,
            };
            residual += (next.x - c.x).hypot(next.y - c.y);
            *c = next;
        }
        if residual <= params.residual_threshold {
            break;
        }
    }

    let min_size = n.div_ceil(4 * params.k);
    let map = enforce_connectivity(&labels, w, h, min_size)?;
    Ok(Segmentation { map, centers, iterations, final_residual: residual })
}

/// Makes every label 4-connected and renumbers labels densely.
///
/// Per label, only its largest 4-connected component survives, and only if
/// it holds at least `min_size` pixels; unlabeled pixels (`None`) never
/// survive. Every other component takes the label of an adjacent surviving
/// region: its pixels are scanned row-major, neighbours in left, up, right,
/// down order, and the last already-final neighbour label seen is adopted.
/// Components with no final neighbour yet are retried on later passes.
/// Final labels are renumbered by first row-major appearance.
pub fn enforce_connectivity(
    labels: &[Option<u32>],
    width: u32,
    height: u32,
    min_size: usize,
) -> Result<SuperpixelMap> {
    let (w, h) = (width as usize, height as usize);
    if w == 0 || h == 0 || labels.len() != w * h {
        return Err(Error::Input(format!(
            "label buffer of {} entries does not fit {width}x{height}",
            labels.len()
        )));
    }

    // Components in order of their first (row-major) pixel; pixel lists
    // are sorted row-major.
    let mut component_of = vec![usize::MAX; labels.len()];
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..labels.len() {
        if component_of[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let label = labels[start];
        let mut pixels = vec![start];
        component_of[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            for j in neighbours(i, w, h).into_iter().flatten() {
                if component_of[j] == usize::MAX && labels[j] == label {
                    component_of[j] = id;
                    pixels.push(j);
                    stack.push(j);
                }
            }
        }
        pixels.sort_unstable();
        components.push(pixels);
    }

    let mut largest: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
    for (id, pixels) in components.iter().enumerate() {
        if let Some(label) = labels[pixels[0]] {
            let entry = largest.entry(label).or_insert(id);
            if pixels.len() > components[*entry].len() {
                *entry = id;
            }
        }
    }
    let mut kept: Vec<bool> = vec![false; components.len()];
    for &id in largest.values() {
        if components[id].len() >= min_size {
            kept[id] = true;
        }
    }
    if !kept.iter().any(|&k| k) {
        // Degenerate: nothing is large enough. Keep the single largest
        // labeled component, earliest on ties.
        let fallback = (0..components.len())
            .filter(|&id| labels[components[id][0]].is_some())
            .chain(0..components.len())
            .fold(None, |best: Option<usize>, id| match best {
                Some(b) if components[b].len() >= components[id].len() => Some(b),
                _ => Some(id),
            })
            .expect("at least one component");
        kept[fallback] = true;
    }

    let mut final_label: Vec<Option<u32>> = vec![None; labels.len()];
    for (id, pixels) in components.iter().enumerate() {
        if kept[id] {
            // unlabeled fallback regions get a fresh label past any real one
            let label = labels[pixels[0]].unwrap_or(u32::MAX);
            for &p in pixels {
                final_label[p] = Some(label);
            }
        }
    }

    let mut pending: Vec<usize> = (0..components.len()).filter(|&id| !kept[id]).collect();
    while !pending.is_empty() {
        let before = pending.len();
        pending.retain(|&id| {
            let mut adopted = None;
            for &p in &components[id] {
                for q in neighbours(p, w, h).into_iter().flatten() {
                    if component_of[q] != id {
                        if let Some(l) = final_label[q] {
                            adopted = Some(l);
                        }
                    }
                }
            }
            match adopted {
                Some(l) => {
                    for &p in &components[id] {
                        final_label[p] = Some(l);
                    }
                    false
                }
                None => true,
            }
        });
        if pending.len() == before {
            return Err(Error::Numeric("connectivity pass made no progress".into()));
        }
    }

    let sparse: Vec<u32> = final_label.into_iter().map(|l| l.expect("all resolved")).collect();
    SuperpixelMap::from_sparse_labels(width, height, &sparse)
}

/// Left, up, right, down.
fn neighbours(i: usize, w: usize, h: usize) -> [Option<usize>; 4] {
    let (x, y) = (i % w, i / w);
    [
        (x > 0).then(|| i - 1),
        (y > 0).then(|| i - w),
        (x + 1 < w).then(|| i + 1),
        (y + 1 < h).then(|| i + w),
    ]
}
