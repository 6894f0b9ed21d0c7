//! Class-probability masks, thresholding, connected components and
//! per-component geometry (moment ellipses and static boxes).

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};
use crate::grid::Grid;
use crate::sensor::SensorModel;

pub const DEFAULT_THRESHOLD: u8 = 128;
pub const DEFAULT_MIN_AREA_PX: usize = 2;
pub const DEFAULT_MAX_AREA_PX: usize = 2000;

/// Physical side of the box drawn around a static vehicle.
pub const STATIC_BOX_SIDE_M: f64 = 3.0;

/// Per-class 8-bit score planes sharing one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMask {
    labels: Vec<String>,
    planes: Vec<Grid<u8>>,
}

impl ProbMask {
    pub fn new(labels: Vec<String>, planes: Vec<Grid<u8>>) -> Result<Self> {
        if labels.len() != planes.len() || planes.is_empty() {
            return Err(Error::InvalidInput(format!(
                "mask needs one label per plane ({} labels, {} planes)",
                labels.len(),
                planes.len()
            )));
        }
        if planes.iter().any(|p| !p.same_shape(&planes[0])) {
            return Err(Error::InvalidInput("mask planes differ in size".into()));
        }
        let unique: BTreeSet<&String> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(Error::InvalidInput(format!("duplicate mask labels in {labels:?}")));
        }
        Ok(ProbMask { labels, planes })
    }

    pub fn zeros(labels: &[&str], width: usize, height: usize) -> Self {
        ProbMask {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            planes: labels.iter().map(|_| Grid::filled(width, height, 0u8)).collect(),
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn planes(&self) -> &[Grid<u8>] {
        &self.planes
    }

    pub fn width(&self) -> usize {
        self.planes[0].width()
    }

    pub fn height(&self) -> usize {
        self.planes[0].height()
    }

    pub fn plane(&self, label: &str) -> Option<&Grid<u8>> {
        self.labels.iter().position(|l| l == label).map(|i| &self.planes[i])
    }

    pub fn plane_mut(&mut self, label: &str) -> Option<&mut Grid<u8>> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(move |i| &mut self.planes[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub labels: Vec<String>,
    pub planes: Vec<Grid<bool>>,
}

/// A pixel is kept when its score is nonzero and at least the threshold.
pub fn threshold_plane(plane: &Grid<u8>, threshold: u8) -> Grid<bool> {
    plane.map(|&s| s > 0 && s >= threshold)
}

pub fn threshold_mask(mask: &ProbMask, thresholds: &BTreeMap<String, u8>) -> Result<BinaryMask> {
    let planes = mask
        .labels
        .iter()
        .zip(&mask.planes)
        .map(|(label, plane)| {
            let t = thresholds
                .get(label)
                .ok_or_else(|| Error::Config(format!("no threshold configured for mask class `{label}`")))?;
            Ok(threshold_plane(plane, *t))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BinaryMask {
        labels: mask.labels.clone(),
        planes,
    })
}

/// An 8-connected region of kept pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub label: String,
    /// `(row, col)`, row-major order.
    pub pixels: Vec<(usize, usize)>,
    /// Optional per-pixel weights aligned with `pixels`; empty means uniform.
    pub weights: Vec<f64>,
    pub area_px: usize,
    pub centroid_px: (f64, f64),
}

impl Component {
    pub fn from_pixels(label: impl Into<String>, mut pixels: Vec<(usize, usize)>) -> Self {
        pixels.sort_unstable();
        let centroid_px = pixel_centroid(&pixels);
        Component {
            label: label.into(),
            area_px: pixels.len(),
            pixels,
            weights: Vec::new(),
            centroid_px,
        }
    }

    /// Attaches the plane's scores as moment weights.
    pub fn with_scores(mut self, plane: &Grid<u8>) -> Self {
        self.weights = self.pixels.iter().map(|&(r, c)| plane.at(r, c) as f64).collect();
        self
    }

    /// Attaches weights computed per pixel; negatives become zero.
    pub fn with_weights(mut self, f: impl Fn(usize, usize) -> f64) -> Self {
        self.weights = self.pixels.iter().map(|&(r, c)| f(r, c).max(0.0)).collect();
        self
    }

    pub fn bbox(&self) -> (usize, usize, usize, usize) {
        let (mut r0, mut c0, mut r1, mut c1) = (usize::MAX, usize::MAX, 0, 0);
        for &(r, c) in &self.pixels {
            r0 = r0.min(r);
            c0 = c0.min(c);
            r1 = r1.max(r);
            c1 = c1.max(c);
        }
        (r0, c0, r1, c1)
    }
}

fn pixel_centroid(pixels: &[(usize, usize)]) -> (f64, f64) {
    let n = pixels.len().max(1) as f64;
    let (sr, sc) = pixels
        .iter()
        .fold((0u64, 0u64), |(a, b), &(r, c)| (a + r as u64, b + c as u64));
    (sr as f64 / n, sc as f64 / n)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub kept: usize,
    pub undersize: usize,
    pub oversize: usize,
}

impl std::ops::AddAssign for Tally {
    fn add_assign(&mut self, o: Tally) {
        self.kept += o.kept;
        self.undersize += o.undersize;
        self.oversize += o.oversize;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub components: Vec<Component>,
    pub tally: Tally,
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        parent[x as usize] = parent[parent[x as usize] as usize];
        x = parent[x as usize];
    }
    x
}

/// Two-pass union-find labeling; returns every 8-connected region, unfiltered.
fn label_regions(bin: &Grid<bool>) -> Vec<Vec<(usize, usize)>> {
    let (w, h) = (bin.width(), bin.height());
    let mut labels = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];
    for r in 0..h {
        for c in 0..w {
            if !bin.at(r, c) {
                continue;
            }
            let mut neigh = [0u32; 4];
            let mut n = 0;
            let mut push = |l: u32| {
                if l != 0 {
                    neigh[n] = l;
                    n += 1;
                }
            };
            if c > 0 {
                push(labels[r * w + c - 1]);
            }
            if r > 0 {
                if c > 0 {
                    push(labels[(r - 1) * w + c - 1]);
                }
                push(labels[(r - 1) * w + c]);
                if c + 1 < w {
                    push(labels[(r - 1) * w + c + 1]);
                }
            }
            let label = if n == 0 {
                let l = parent.len() as u32;
                parent.push(l);
                l
            } else {
                let mut root = find(&mut parent, neigh[0]);
                for &l in &neigh[1..n] {
                    let other = find(&mut parent, l);
                    if other != root {
                        let (lo, hi) = (root.min(other), root.max(other));
                        parent[hi as usize] = lo;
                        root = lo;
                    }
                }
                root
            };
            labels[r * w + c] = label;
        }
    }
    let mut index: BTreeMap<u32, usize> = BTreeMap::new();
    let mut regions: Vec<Vec<(usize, usize)>> = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let l = labels[r * w + c];
            if l == 0 {
                continue;
            }
            let root = find(&mut parent, l);
            let slot = *index.entry(root).or_insert_with(|| {
                regions.push(Vec::new());
                regions.len() - 1
            });
            regions[slot].push((r, c));
        }
    }
    regions
}

fn sort_components(components: &mut [Component]) {
    components.sort_by(|a, b| {
        a.centroid_px
            .0
            .total_cmp(&b.centroid_px.0)
            .then(a.centroid_px.1.total_cmp(&b.centroid_px.1))
            .then(a.pixels[0].cmp(&b.pixels[0]))
    });
}

fn check_limits(min_area: usize, max_area: usize) -> Result<()> {
    if min_area > max_area {
        return Err(Error::Config(format!(
            "component area limits inverted: min {min_area} > max {max_area}"
        )));
    }
    Ok(())
}

/// 8-connected components with `min_area <= area <= max_area`, sorted by
/// centroid `(row, col)`. Dropped components are only counted.
pub fn extract_components(bin: &Grid<bool>, label: &str, min_area: usize, max_area: usize) -> Result<Extraction> {
    check_limits(min_area, max_area)?;
    let mut tally = Tally::default();
    let mut components = Vec::new();
    for pixels in label_regions(bin) {
        match pixels.len() {
            n if n < min_area => tally.undersize += 1,
            n if n > max_area => tally.oversize += 1,
            _ => {
                tally.kept += 1;
                components.push(Component::from_pixels(label, pixels));
            }
        }
    }
    sort_components(&mut components);
    Ok(Extraction { components, tally })
}

/// Tile-parallel variant of [`extract_components`].
///
/// Each `tile`-sized core is labeled inside a window grown by `overlap`. A
/// region belongs to the tile whose core holds its centroid. Regions that
/// reach an interior window edge are wider than the overlap and are counted as
/// oversize. With `overlap` above the largest component diameter the result
/// equals the untiled extraction.
pub fn extract_components_tiled(
    bin: &Grid<bool>,
    label: &str,
    min_area: usize,
    max_area: usize,
    tile: usize,
    overlap: usize,
) -> Result<Extraction> {
    check_limits(min_area, max_area)?;
    if tile == 0 {
        return Err(Error::Config("tile size must be positive".into()));
    }
    let (w, h) = (bin.width(), bin.height());
    let cores: Vec<(usize, usize)> = (0..h)
        .step_by(tile)
        .flat_map(|r| (0..w).step_by(tile).map(move |c| (r, c)))
        .collect();
    let per_tile: Vec<Extraction> = cores
        .par_iter()
        .map(|&(r0, c0)| {
            let (wr0, wc0) = (r0.saturating_sub(overlap), c0.saturating_sub(overlap));
            let (wr1, wc1) = ((r0 + tile + overlap).min(h), (c0 + tile + overlap).min(w));
            let window = bin.crop(wr0, wc0, wr1 - wr0, wc1 - wc0);
            let mut tally = Tally::default();
            let mut components = Vec::new();
            for local in label_regions(&window) {
                let pixels: Vec<(usize, usize)> = local.iter().map(|&(r, c)| (r + wr0, c + wc0)).collect();
                let (cr, cc) = pixel_centroid(&pixels);
                let in_core = cr >= r0 as f64 - 0.5
                    && cr < (r0 + tile) as f64 - 0.5
                    && cc >= c0 as f64 - 0.5
                    && cc < (c0 + tile) as f64 - 0.5;
                if !in_core {
                    continue;
                }
                let truncated = pixels.iter().any(|&(r, c)| {
                    (r == wr0 && wr0 > 0)
                        || (r + 1 == wr1 && wr1 < h)
                        || (c == wc0 && wc0 > 0)
                        || (c + 1 == wc1 && wc1 < w)
                });
                match pixels.len() {
                    _ if truncated => tally.oversize += 1,
                    n if n < min_area => tally.undersize += 1,
                    n if n > max_area => tally.oversize += 1,
                    _ => {
                        tally.kept += 1;
                        components.push(Component::from_pixels(label, pixels));
                    }
                }
            }
            Extraction { components, tally }
        })
        .collect();
    let mut tally = Tally::default();
    let mut components = Vec::new();
    for e in per_tile {
        tally += e.tally;
        components.extend(e.components);
    }
    sort_components(&mut components);
    Ok(Extraction { components, tally })
}

/// Moment ellipse of a component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseFit {
    /// `(row, col)`.
    pub center_px: (f64, f64),
    pub semi_major_px: f64,
    pub semi_minor_px: f64,
    /// Compass direction of the major axis, modulo 180 degrees.
    pub orientation_deg: f64,
}

/// Unit `(drow, dcol)` vector for a compass angle (0 = up, clockwise).
pub fn compass_unit(deg: f64) -> (f64, f64) {
    let t = deg.to_radians();
    (-t.cos(), t.sin())
}

/// Compass angle in `[0, 360)` of a `(drow, dcol)` displacement.
pub fn compass_of(drow: f64, dcol: f64) -> f64 {
    normalize_deg(dcol.atan2(-drow).to_degrees(), 360.0)
}

pub(crate) fn normalize_deg(deg: f64, modulus: f64) -> f64 {
    let v = deg.rem_euclid(modulus);
    if v >= modulus {
        0.0
    } else {
        v
    }
}

impl EllipseFit {
    pub fn axis(&self) -> (f64, f64) {
        compass_unit(self.orientation_deg)
    }

    /// `a / b`, infinite for a zero minor axis.
    pub fn aspect_ratio(&self) -> f64 {
        if self.semi_minor_px == 0.0 {
            f64::INFINITY
        } else {
            self.semi_major_px / self.semi_minor_px
        }
    }

    /// Half extents `(rows, cols)` of the axis-aligned bounding box.
    pub fn half_extents(&self) -> (f64, f64) {
        let (dr, dc) = self.axis();
        let (a, b) = (self.semi_major_px, self.semi_minor_px);
        (
            (a * a * dr * dr + b * b * dc * dc).sqrt(),
            (a * a * dc * dc + b * b * dr * dr).sqrt(),
        )
    }

    /// Outline polygon in pixel space (`x = col`, `y = row`).
    pub fn outline(&self, vertices: usize) -> Polygon {
        let (dr, dc) = self.axis();
        Polygon::ellipse(
            Point::rc(self.center_px.0, self.center_px.1),
            Point::new(dc, dr),
            self.semi_major_px,
            self.semi_minor_px,
            vertices,
        )
    }
}

/// Ellipse from the second moments of the component's pixel squares.
///
/// Each pixel contributes a unit square, so the covariance is the covariance
/// of pixel centers plus `1/12` on the diagonal. For covariance eigenvalues
/// `l1 >= l2` the semi-axes are `2 * sqrt(l)`, the exact values for a uniform
/// filled ellipse. Needs at least 3 pixels.
pub fn fit_ellipse(c: &Component) -> Result<EllipseFit> {
    if c.pixels.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "ellipse fit needs at least 3 pixels, component has {}",
            c.pixels.len()
        )));
    }
    let (mr, mc) = pixel_centroid(&c.pixels);
    let n = c.pixels.len() as f64;
    let (mut srr, mut scc, mut src) = (0.0, 0.0, 0.0);
    for &(r, col) in &c.pixels {
        let (dr, dc) = (r as f64 - mr, col as f64 - mc);
        srr += dr * dr;
        scc += dc * dc;
        src += dr * dc;
    }
    Ok(ellipse_from_cov(
        (mr, mc),
        srr / n + 1.0 / 12.0,
        scc / n + 1.0 / 12.0,
        src / n,
    ))
}

/// As [`fit_ellipse`], with the component's weights applied to each pixel
/// square. Without weights this is identical to [`fit_ellipse`].
pub fn fit_ellipse_weighted(c: &Component) -> Result<EllipseFit> {
    if c.weights.is_empty() {
        return fit_ellipse(c);
    }
    if c.weights.len() != c.pixels.len() || c.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidInput(
            "component weights must be finite, non-negative, one per pixel".into(),
        ));
    }
    let total: f64 = c.weights.iter().sum();
    if c.pixels.len() < 3 || total <= 0.0 {
        return Err(Error::InvalidInput(
            "weighted ellipse fit needs at least 3 pixels with positive weight".into(),
        ));
    }
    let (mut mr, mut mc) = (0.0, 0.0);
    for (&(r, col), &w) in c.pixels.iter().zip(&c.weights) {
        mr += w * r as f64;
        mc += w * col as f64;
    }
    let (mr, mc) = (mr / total, mc / total);
    let (mut srr, mut scc, mut src) = (0.0, 0.0, 0.0);
    for (&(r, col), &w) in c.pixels.iter().zip(&c.weights) {
        let (dr, dc) = (r as f64 - mr, col as f64 - mc);
        srr += w * dr * dr;
        scc += w * dc * dc;
        src += w * dr * dc;
    }
    Ok(ellipse_from_cov(
        (mr, mc),
        srr / total + 1.0 / 12.0,
        scc / total + 1.0 / 12.0,
        src / total,
    ))
}

fn ellipse_from_cov(center: (f64, f64), srr: f64, scc: f64, src: f64) -> EllipseFit {
    let mean = (srr + scc) / 2.0;
    let half_diff = (srr - scc) / 2.0;
    let root = half_diff.hypot(src);
    let l1 = mean + root;
    let l2 = (mean - root).max(0.0);
    // Major-axis angle from the +row axis towards +col.
    let theta = if root == 0.0 {
        0.0
    } else {
        0.5 * (2.0 * src).atan2(srr - scc)
    };
    let orientation = if root == 0.0 {
        0.0
    } else {
        normalize_deg(180.0 - theta.to_degrees(), 180.0)
    };
    EllipseFit {
        center_px: center,
        semi_major_px: 2.0 * l1.sqrt(),
        semi_minor_px: 2.0 * l2.sqrt(),
        orientation_deg: orientation,
    }
}

/// Axis-aligned square of `3 / gsd_m` pixels around the centroid, clipped
/// to the image.
pub fn static_box(c: &Component, sensor: &SensorModel, width: usize, height: usize) -> Polygon {
    static_box_at(c.centroid_px, sensor, width, height)
}

pub fn static_box_at(center: (f64, f64), sensor: &SensorModel, width: usize, height: usize) -> Polygon {
    let half = STATIC_BOX_SIDE_M / sensor.gsd_m / 2.0;
    let (r, c) = center;
    Polygon::rect(c - half, r - half, c + half, r + half).clip_to_box(
        -0.5,
        -0.5,
        width as f64 - 0.5,
        height as f64 - 0.5,
    )
}
