//! From fitted components to detections: band-peak heading disambiguation,
//! rainbow-length speed and the post-processing chain run on any class mask.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detection::{Detection, HeadingConfidence, ObjectClass, Schema, VelocityVector};
use crate::error::{Error, Result};
use crate::filters::gaussian_blur;
use crate::grid::Grid;
use crate::mask::{
    compass_of, extract_components, extract_components_tiled, fit_ellipse, fit_ellipse_weighted, normalize_deg,
    static_box_at, threshold_plane, Component, EllipseFit, ProbMask, Tally, DEFAULT_MAX_AREA_PX, DEFAULT_MIN_AREA_PX,
    DEFAULT_THRESHOLD,
};
use crate::raster::RasterBundle;
use crate::sensor::{Band, SensorModel};

const OUTLINE_VERTICES: usize = 32;

/// Per-band patch cut from a raster around an ellipse.
#[derive(Debug, Clone, PartialEq)]
pub struct Chip {
    /// `(row, col)` of the chip's top-left pixel in the parent raster.
    pub origin: (usize, usize),
    pub planes: [Grid<f32>; 3],
}

impl Chip {
    pub fn width(&self) -> usize {
        self.planes[0].width()
    }

    pub fn height(&self) -> usize {
        self.planes[0].height()
    }

    pub fn band(&self, band: Band) -> &Grid<f32> {
        &self.planes[band.index()]
    }
}

/// Cuts the ellipse's bounding box plus `pad_px`, clipped to the raster and
/// grown to at least 3x3 where the raster allows.
pub fn extract_chip(raster: &RasterBundle, e: &EllipseFit, pad_px: usize) -> Result<Chip> {
    let (cr, cc) = e.center_px;
    if !raster.contains(cr, cc) {
        return Err(Error::InvalidInput(format!(
            "ellipse center ({cr:.2}, {cc:.2}) lies outside the {}x{} raster",
            raster.width(),
            raster.height()
        )));
    }
    let (hr, hc) = e.half_extents();
    let span = |center: f64, half: f64, len: usize| -> (usize, usize) {
        let max = len as isize - 1;
        let mut lo = ((center - half).floor() as isize - pad_px as isize).clamp(0, max);
        let mut hi = ((center + half).ceil() as isize + pad_px as isize).clamp(0, max);
        while hi - lo < 2 && (lo > 0 || hi < max) {
            if lo > 0 {
                lo -= 1;
            }
            if hi - lo < 2 && hi < max {
                hi += 1;
            }
        }
        (lo as usize, hi as usize)
    };
    let (r0, r1) = span(cr, hr, raster.height());
    let (c0, c1) = span(cc, hc, raster.width());
    let planes = Band::ALL.map(|b| raster.band(b).crop(r0, c0, r1 - r0 + 1, c1 - c0 + 1).map(|&v| v as f32));
    Ok(Chip {
        origin: (r0, c0),
        planes,
    })
}

/// Sub-pixel location, in parent-raster `(row, col)`, of the maximum of the
/// smoothed band. Ties go to the smallest `(row, col)`. `None` when the
/// plane is constant.
pub fn band_peak(chip: &Chip, band: Band, smooth_sigma_px: f64) -> Option<(f64, f64)> {
    let plane = gaussian_blur(chip.band(band), smooth_sigma_px);
    let (w, h) = (plane.width(), plane.height());
    if w == 0 || h == 0 {
        return None;
    }
    let data = plane.as_slice();
    let (lo, hi) = data.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if hi - lo <= f32::EPSILON * hi.abs().max(1.0) {
        return None;
    }
    // First index wins, which is the smallest (row, col) in row-major order.
    let idx = data.iter().position(|&v| v == hi)?;
    let (r, c) = (idx / w, idx % w);
    let refine = |prev: Option<f32>, next: Option<f32>| -> f64 {
        match (prev, next) {
            (Some(l), Some(n)) => {
                let denom = l as f64 - 2.0 * hi as f64 + n as f64;
                if denom < 0.0 {
                    (0.5 * (l as f64 - n as f64) / denom).clamp(-0.5, 0.5)
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    };
    let dr = refine(
        (r > 0).then(|| plane.at(r - 1, c)),
        (r + 1 < h).then(|| plane.at(r + 1, c)),
    );
    let dc = refine(
        (c > 0).then(|| plane.at(r, c - 1)),
        (c + 1 < w).then(|| plane.at(r, c + 1)),
    );
    Some(((chip.origin.0 + r) as f64 + dr, (chip.origin.1 + c) as f64 + dc))
}

fn default_sigma() -> f64 {
    1.0
}
fn default_min_sep() -> f64 {
    1.0
}
fn default_alignment() -> f64 {
    0.5
}
fn default_pad() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorizeConfig {
    /// Gaussian sigma applied before locating band peaks.
    #[serde(default = "default_sigma")]
    pub smooth_sigma_px: f64,
    /// Red-to-blue peak distances below this leave the heading ambiguous.
    #[serde(default = "default_min_sep")]
    pub min_peak_sep_px: f64,
    /// Minimum `|cos|` between the peak displacement and the major axis.
    #[serde(default = "default_alignment")]
    pub alignment_cos: f64,
    /// Subtracted from the major-axis length before converting to speed.
    #[serde(default)]
    pub body_length_correction_px: f64,
    #[serde(default = "default_pad")]
    pub chip_pad_px: usize,
}

impl Default for VectorizeConfig {
    fn default() -> Self {
        VectorizeConfig {
            smooth_sigma_px: default_sigma(),
            min_peak_sep_px: default_min_sep(),
            alignment_cos: default_alignment(),
            body_length_correction_px: 0.0,
            chip_pad_px: default_pad(),
        }
    }
}

impl VectorizeConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("smooth_sigma_px", self.smooth_sigma_px >= 0.0),
            ("min_peak_sep_px", self.min_peak_sep_px >= 0.0),
            ("alignment_cos", (0.0..=1.0).contains(&self.alignment_cos)),
            ("body_length_correction_px", self.body_length_correction_px >= 0.0),
        ];
        for (field, ok) in checks {
            if !ok {
                return Err(Error::field(format!("vector.{field}"), "out of range"));
            }
        }
        Ok(())
    }
}

/// Picks the end of the major axis the red-to-blue displacement points to.
pub fn resolve_heading(
    e: &EllipseFit,
    red_peak: Option<(f64, f64)>,
    blue_peak: Option<(f64, f64)>,
    cfg: &VectorizeConfig,
) -> (f64, HeadingConfidence) {
    let ambiguous = (e.orientation_deg, HeadingConfidence::Ambiguous);
    let (Some(red), Some(blue)) = (red_peak, blue_peak) else {
        return ambiguous;
    };
    let (dr, dc) = (blue.0 - red.0, blue.1 - red.1);
    let sep = dr.hypot(dc);
    if sep < cfg.min_peak_sep_px || sep == 0.0 {
        return ambiguous;
    }
    let (ar, ac) = e.axis();
    let cos = (dr * ar + dc * ac) / sep;
    if cos.abs() < cfg.alignment_cos {
        return ambiguous;
    }
    let heading = if cos > 0.0 {
        e.orientation_deg
    } else {
        e.orientation_deg + 180.0
    };
    (normalize_deg(heading, 360.0), HeadingConfidence::Resolved)
}

/// Speed from the full major axis and heading from the band peaks.
pub fn infer_vector(
    raster: &RasterBundle,
    e: &EllipseFit,
    sensor: &SensorModel,
    cfg: &VectorizeConfig,
) -> Result<VelocityVector> {
    sensor.kmh_per_pixel()?;
    let d_pix = (2.0 * e.semi_major_px - cfg.body_length_correction_px).max(0.0);
    let speed = sensor.speed_from_rainbow(d_pix)?;
    let isotropic = (e.semi_major_px - e.semi_minor_px).abs() <= 1e-9 * e.semi_major_px.max(1.0);
    let (heading_deg, heading_confidence) = if isotropic {
        (e.orientation_deg, HeadingConfidence::Ambiguous)
    } else {
        let chip = extract_chip(raster, e, cfg.chip_pad_px)?;
        let red = band_peak(&chip, Band::Red, cfg.smooth_sigma_px);
        let blue = band_peak(&chip, Band::Blue, cfg.smooth_sigma_px);
        resolve_heading(e, red, blue, cfg)
    };
    Ok(VelocityVector {
        speed,
        heading_deg,
        heading_confidence,
    })
}

fn default_thresholds() -> BTreeMap<String, u8> {
    ObjectClass::ALL
        .iter()
        .map(|c| (c.as_str().to_string(), DEFAULT_THRESHOLD))
        .collect()
}
fn default_min_area() -> usize {
    DEFAULT_MIN_AREA_PX
}
fn default_max_area() -> usize {
    DEFAULT_MAX_AREA_PX
}
fn default_min_ecc() -> f64 {
    1.3
}
fn default_true() -> bool {
    true
}
fn default_tile() -> usize {
    512
}
fn default_overlap() -> usize {
    128
}

/// Settings for turning a class mask into detections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostprocessConfig {
    /// Score threshold per mask label.
    #[serde(default = "default_thresholds")]
    pub thresholds: BTreeMap<String, u8>,
    #[serde(default = "default_min_area")]
    pub min_area_px: usize,
    #[serde(default = "default_max_area")]
    pub max_area_px: usize,
    /// High-resolution movers rounder than this `a / b` are treated as static.
    #[serde(default = "default_min_ecc")]
    pub min_eccentricity: f64,
    /// Weight the moment fit by mask scores.
    #[serde(default = "default_true")]
    pub weighted_fit: bool,
    /// Masks larger than one tile are labeled tile-parallel.
    #[serde(default = "default_tile")]
    pub tile_px: usize,
    /// Must exceed the widest component of interest; wider ones are counted
    /// as oversize.
    #[serde(default = "default_overlap")]
    pub tile_overlap_px: usize,
    #[serde(default)]
    pub vector: VectorizeConfig,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        PostprocessConfig {
            thresholds: default_thresholds(),
            min_area_px: default_min_area(),
            max_area_px: default_max_area(),
            min_eccentricity: default_min_ecc(),
            weighted_fit: true,
            tile_px: default_tile(),
            tile_overlap_px: default_overlap(),
            vector: VectorizeConfig::default(),
        }
    }
}

impl PostprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_area_px > self.max_area_px {
            return Err(Error::field("min_area_px", "exceeds max_area_px"));
        }
        if !(self.min_eccentricity.is_finite() && self.min_eccentricity >= 1.0) {
            return Err(Error::field("min_eccentricity", "must be at least 1"));
        }
        if self.tile_px == 0 {
            return Err(Error::field("tile_px", "must be positive"));
        }
        self.vector.validate()
    }
}

/// Counters describing what post-processing dropped or changed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PostprocessDiagnostics {
    pub components: BTreeMap<String, Tally>,
    /// Movers reclassified as static by the eccentricity gate.
    pub demoted_to_static: usize,
    /// Components that could not be vectorized, with the reason.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Postprocessed {
    pub detections: Vec<Detection>,
    pub diagnostics: PostprocessDiagnostics,
}

fn components_of(plane: &Grid<bool>, label: &str, cfg: &PostprocessConfig) -> Result<crate::mask::Extraction> {
    if plane.width() > cfg.tile_px || plane.height() > cfg.tile_px {
        extract_components_tiled(
            plane,
            label,
            cfg.min_area_px,
            cfg.max_area_px,
            cfg.tile_px,
            cfg.tile_overlap_px,
        )
    } else {
        extract_components(plane, label, cfg.min_area_px, cfg.max_area_px)
    }
}

/// Centroid, class, footprint and velocity of one vectorized component.
type Found = (
    (f64, f64),
    ObjectClass,
    crate::geometry::Polygon,
    Option<VelocityVector>,
);

/// Threshold, label, fit and vectorize every plane of `mask`. Mask labels
/// must be class names. Per-component failures are recorded, not raised.
pub fn postprocess(mask: &ProbMask, raster: &RasterBundle, cfg: &PostprocessConfig) -> Result<Postprocessed> {
    cfg.validate()?;
    if mask.width() != raster.width() || mask.height() != raster.height() {
        return Err(Error::InvalidInput(format!(
            "mask is {}x{} but raster is {}x{}",
            mask.width(),
            mask.height(),
            raster.width(),
            raster.height()
        )));
    }
    let sensor = &raster.meta.sensor;
    let schema = Schema::for_sensor(sensor);
    let (w, h) = (raster.width(), raster.height());
    let mut diagnostics = PostprocessDiagnostics::default();
    let mut found: Vec<Found> = Vec::new();
    for (label, plane) in mask.labels().iter().zip(mask.planes()) {
        let class: ObjectClass = label
            .parse()
            .map_err(|_| Error::Config(format!("mask label `{label}` is not a known class")))?;
        let threshold = *cfg
            .thresholds
            .get(label)
            .ok_or_else(|| Error::Config(format!("no threshold configured for mask class `{label}`")))?;
        let extraction = components_of(&threshold_plane(plane, threshold), label, cfg)?;
        diagnostics.components.insert(label.clone(), extraction.tally);
        for comp in extraction.components {
            let comp = if cfg.weighted_fit {
                comp.with_scores(plane)
            } else {
                comp
            };
            if !class.is_moving() {
                found.push((
                    comp.centroid_px,
                    class,
                    static_box_at(comp.centroid_px, sensor, w, h),
                    None,
                ));
                continue;
            }
            match vectorize_component(&comp, class, raster, schema, cfg) {
                Ok(Some((fit, v))) => {
                    let footprint =
                        fit.outline(OUTLINE_VERTICES)
                            .clip_to_box(-0.5, -0.5, w as f64 - 0.5, h as f64 - 0.5);
                    found.push((comp.centroid_px, class, footprint, Some(v)));
                }
                Ok(None) => {
                    diagnostics.demoted_to_static += 1;
                    found.push((
                        comp.centroid_px,
                        ObjectClass::StaticCar,
                        static_box_at(comp.centroid_px, sensor, w, h),
                        None,
                    ));
                }
                Err(err) => {
                    let (r, c) = comp.centroid_px;
                    diagnostics
                        .failures
                        .push(format!("{label} component at ({r:.1}, {c:.1}): {err}"));
                }
            }
        }
    }
    found.sort_by(|a, b| {
        a.0 .0
            .total_cmp(&b.0 .0)
            .then(a.0 .1.total_cmp(&b.0 .1))
            .then(a.1.cmp(&b.1))
    });
    let detections = found
        .into_iter()
        .enumerate()
        .map(|(i, (_, class, footprint, velocity))| Detection {
            id: i as u32 + 1,
            class,
            footprint,
            velocity,
            timestamp: raster.meta.timestamp,
            scene_id: raster.meta.scene_id.clone(),
        })
        .collect();
    Ok(Postprocessed {
        detections,
        diagnostics,
    })
}

/// `Ok(None)` means the eccentricity gate demoted the component.
fn vectorize_component(
    comp: &Component,
    class: ObjectClass,
    raster: &RasterBundle,
    schema: Schema,
    cfg: &PostprocessConfig,
) -> Result<Option<(EllipseFit, VelocityVector)>> {
    let fit = if cfg.weighted_fit {
        fit_ellipse_weighted(comp)?
    } else {
        fit_ellipse(comp)?
    };
    if schema == Schema::Skysat && class.is_moving() && fit.aspect_ratio() < cfg.min_eccentricity {
        return Ok(None);
    }
    let v = infer_vector(raster, &fit, &raster.meta.sensor, &cfg.vector)?;
    Ok(Some((fit, v)))
}

/// Compass heading of the red-to-blue displacement between two points.
pub fn displacement_heading(red: (f64, f64), blue: (f64, f64)) -> f64 {
    compass_of(blue.0 - red.0, blue.1 - red.1)
}

/// Smallest absolute difference between two compass angles, in `[0, 180]`.
pub fn angle_diff_deg(a: f64, b: f64) -> f64 {
    let d = normalize_deg(a - b, 360.0);
    d.min(360.0 - d)
}
