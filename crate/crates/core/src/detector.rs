//! Classical mask source: moving vehicles from the red/blue discrepancy their
//! rainbow leaves, parked bright vehicles from a white top-hat.
//!
//! The red band sees a mover where the blue band does not and vice versa, so
//! `red - blue` has a positive blob at the vehicle's red-band position and a
//! negative one at its blue-band position. Pairing the two, confirmed by the
//! green band image between them, gives the rainbow. Drifting clouds also
//! leave signed blobs, but their edges are soft, which a gradient test
//! rejects.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{Detection, Schema};
use crate::error::{Error, Result};
use crate::filters::{box_mean, dilate, disk_offsets, gaussian_blur, gradient_magnitude, white_tophat};
use crate::grid::Grid;
use crate::mask::{extract_components, fit_ellipse_weighted, Component, ProbMask, Tally};
use crate::raster::RasterBundle;
use crate::sensor::{Band, SensorModel};
use crate::vectorize::{postprocess, PostprocessConfig, PostprocessDiagnostics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// Gaussian sigma applied to each band before differencing.
    pub blur_sigma_px: f64,
    /// Side of the window whose mean luminance normalizes the discrepancy.
    pub local_norm_window_px: usize,
    /// Score per unit of normalized discrepancy.
    pub anomaly_gain: f64,
    pub anomaly_thresh: u8,
    /// The blob threshold is raised to this many robust standard deviations
    /// of the discrepancy field, so noisy scenes do not flood the pairing.
    pub noise_k: f64,
    pub min_blob_area_px: usize,
    /// Cloud gate: larger signed blobs are dropped.
    pub max_area_px: usize,
    /// Cloud gate: peak over mean edge gradient, in pixels. Soft blobs
    /// exceed it.
    pub max_softness: f64,
    /// Longest rainbow searched for when pairing blobs.
    pub max_speed_kmh: f64,
    /// Largest area ratio between the two blobs of a pair.
    pub max_area_ratio: f64,
    /// Green excess at the interpolated position, relative to the pair's
    /// discrepancy, needed to accept a pair.
    pub min_green_support: f64,
    /// Pairs whose mean blob area reaches this are trucks; `None` when the
    /// schema has no truck class.
    pub truck_min_area_px: Option<f64>,
    pub tophat_radius_px: usize,
    pub tophat_gain: f64,
    pub tophat_thresh: u8,
    pub static_min_area_px: usize,
    pub static_max_area_px: usize,
    /// Static candidates within this distance of a moving blob are dropped.
    pub motion_exclusion_px: usize,
    pub postprocess: PostprocessConfig,
}

impl DetectorConfig {
    pub fn for_sensor(sensor: &SensorModel) -> Self {
        Self::for_schema(Schema::for_sensor(sensor))
    }

    pub fn for_schema(schema: Schema) -> Self {
        let mut post = PostprocessConfig::default();
        for label in schema.labels() {
            post.thresholds.insert(label, 128);
        }
        // Moving planes are rendered anti-aliased; every covered pixel counts.
        for label in ["moving_car", "moving_truck"] {
            post.thresholds.insert(label.into(), 1);
        }
        match schema {
            Schema::Skysat => DetectorConfig {
                blur_sigma_px: 1.0,
                local_norm_window_px: 31,
                anomaly_gain: 100.0,
                anomaly_thresh: 40,
                noise_k: 4.0,
                min_blob_area_px: 6,
                max_area_px: 2000,
                max_softness: 4.0,
                max_speed_kmh: 200.0,
                max_area_ratio: 3.0,
                min_green_support: 0.3,
                truck_min_area_px: None,
                tophat_radius_px: 3,
                tophat_gain: 2.0,
                tophat_thresh: 100,
                static_min_area_px: 10,
                static_max_area_px: 400,
                motion_exclusion_px: 3,
                postprocess: post,
            },
            Schema::Planetscope => {
                post.min_area_px = 2;
                DetectorConfig {
                    blur_sigma_px: 0.7,
                    local_norm_window_px: 15,
                    anomaly_gain: 100.0,
                    anomaly_thresh: 15,
                    noise_k: 3.5,
                    min_blob_area_px: 2,
                    max_area_px: 400,
                    max_softness: 6.0,
                    max_speed_kmh: 200.0,
                    max_area_ratio: 4.0,
                    min_green_support: 0.3,
                    truck_min_area_px: Some(8.0),
                    tophat_radius_px: 1,
                    tophat_gain: 2.0,
                    tophat_thresh: 100,
                    static_min_area_px: 2,
                    static_max_area_px: 50,
                    motion_exclusion_px: 1,
                    postprocess: post,
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("blur_sigma_px", self.blur_sigma_px >= 0.0),
            ("local_norm_window_px", self.local_norm_window_px >= 1),
            ("anomaly_gain", self.anomaly_gain > 0.0),
            ("noise_k", self.noise_k >= 0.0),
            ("max_softness", self.max_softness > 0.0),
            ("max_speed_kmh", self.max_speed_kmh > 0.0),
            ("max_area_ratio", self.max_area_ratio >= 1.0),
            ("min_green_support", self.min_green_support >= 0.0),
            ("truck_min_area_px", self.truck_min_area_px.is_none_or(|t| t > 0.0)),
            ("tophat_radius_px", self.tophat_radius_px >= 1),
            ("tophat_gain", self.tophat_gain > 0.0),
            ("min_blob_area_px", self.min_blob_area_px <= self.max_area_px),
            ("static_min_area_px", self.static_min_area_px <= self.static_max_area_px),
        ];
        for (field, ok) in positive {
            if !ok {
                return Err(Error::field(field, "out of range"));
            }
        }
        self.postprocess.validate()
    }
}

fn window_radius(window_px: usize) -> usize {
    window_px / 2
}

/// Signed red-minus-blue discrepancy over the local mean luminance.
fn normalized_discrepancy(raster: &RasterBundle, cfg: &DetectorConfig) -> Result<Grid<f32>> {
    raster.meta.sensor.kmh_per_pixel()?;
    let (red, blue) = rayon::join(
        || gaussian_blur(&raster.band_f32(Band::Red), cfg.blur_sigma_px),
        || gaussian_blur(&raster.band_f32(Band::Blue), cfg.blur_sigma_px),
    );
    let level = box_mean(&raster.luminance(), window_radius(cfg.local_norm_window_px));
    let data = red
        .as_slice()
        .iter()
        .zip(blue.as_slice())
        .zip(level.as_slice())
        .map(|((&r, &b), &l)| (r - b) / l.max(1.0))
        .collect();
    Ok(Grid::from_vec(raster.width(), raster.height(), data))
}

fn to_score(v: f32, gain: f64) -> u8 {
    (v as f64 * gain).round().clamp(0.0, 255.0) as u8
}

/// Locally normalized `|red - blue|`, scaled to 0..=255. Static content and
/// uniform regions score 0.
pub fn chromatic_anomaly_mask(raster: &RasterBundle, cfg: &DetectorConfig) -> Result<ProbMask> {
    let field = normalized_discrepancy(raster, cfg)?;
    let plane = field.map(|&v| to_score(v.abs(), cfg.anomaly_gain));
    ProbMask::new(vec!["chromatic_anomaly".into()], vec![plane])
}

fn tophat_response(raster: &RasterBundle, cfg: &DetectorConfig) -> Grid<f32> {
    let lum = gaussian_blur(&raster.luminance(), cfg.blur_sigma_px.min(0.7));
    white_tophat(&lum, cfg.tophat_radius_px)
}

/// White top-hat of the luminance: bright objects narrower than the
/// structuring disk. Darker-than-background vehicles score 0. Only defined
/// for high-resolution imagery.
pub fn tophat_static_mask(raster: &RasterBundle, cfg: &DetectorConfig) -> Result<ProbMask> {
    let gsd = raster.meta.sensor.gsd_m;
    if gsd > 1.0 {
        return Err(Error::Config(format!(
            "static vehicles cannot be localized at {gsd} m GSD; top-hat detection needs 1 m or finer"
        )));
    }
    let plane = tophat_response(raster, cfg).map(|&v| to_score(v, cfg.tophat_gain));
    ProbMask::new(vec!["static_car".into()], vec![plane])
}

/// A signed discrepancy blob that passed the cloud gates.
#[derive(Debug, Clone)]
struct Blob {
    comp: Component,
    peak: f32,
    minor_px: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectorDiagnostics {
    pub positive_blobs: Tally,
    pub negative_blobs: Tally,
    pub soft_rejected: usize,
    pub pairs: usize,
    pub unpaired_blobs: usize,
    pub static_candidates: Tally,
    pub motion_excluded: usize,
    pub postprocess: PostprocessDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorOutput {
    pub detections: Vec<Detection>,
    pub mask: ProbMask,
    pub diagnostics: DetectorDiagnostics,
}

/// Peak `|field|` over the blob divided by the mean gradient on its boundary.
fn softness(comp: &Component, field: &Grid<f32>, grad: &Grid<f32>, inside: &Grid<bool>) -> (f32, f64) {
    let mut peak = 0.0f32;
    let (mut gsum, mut n) = (0.0f64, 0usize);
    for &(r, c) in &comp.pixels {
        peak = peak.max(field.at(r, c).abs());
        let edge = crate::grid::NEIGHBORS_8.iter().any(|&(dr, dc)| {
            let (rr, cc) = (r as isize + dr, c as isize + dc);
            !inside.in_bounds(rr, cc) || !inside.at(rr as usize, cc as usize)
        });
        if edge {
            gsum += grad.at(r, c) as f64;
            n += 1;
        }
    }
    let mean_grad = if n == 0 { 0.0 } else { gsum / n as f64 };
    let soft = if mean_grad > 0.0 {
        peak as f64 / mean_grad
    } else {
        f64::INFINITY
    };
    (peak, soft)
}

/// Robust standard deviation (scaled median absolute deviation).
fn robust_sigma(values: &[f32]) -> f32 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    let mid = v.len() / 2;
    let median = *v.select_nth_unstable_by(mid, f32::total_cmp).1;
    v.iter_mut().for_each(|x| *x = (*x - median).abs());
    1.4826 * *v.select_nth_unstable_by(mid, f32::total_cmp).1
}

/// Blob threshold in normalized-discrepancy units.
fn blob_threshold(field: &Grid<f32>, cfg: &DetectorConfig) -> f32 {
    let fixed = cfg.anomaly_thresh.max(1) as f64 / cfg.anomaly_gain;
    fixed.max(cfg.noise_k * robust_sigma(field.as_slice()) as f64) as f32
}

fn signed_blobs(
    field: &Grid<f32>,
    grad: &Grid<f32>,
    sign: f32,
    threshold: f32,
    cfg: &DetectorConfig,
    soft_rejected: &mut usize,
) -> Result<(Vec<Blob>, Tally)> {
    let inside = field.map(|&v| v * sign >= threshold);
    let label = if sign > 0.0 { "positive" } else { "negative" };
    let extraction = extract_components(&inside, label, cfg.min_blob_area_px, cfg.max_area_px)?;
    let mut blobs = Vec::new();
    for comp in extraction.components {
        let (peak, soft) = softness(&comp, field, grad, &inside);
        if soft > cfg.max_softness {
            *soft_rejected += 1;
            continue;
        }
        let weighted = comp.clone().with_weights(|r, c| (field.at(r, c) * sign) as f64);
        let minor_px = fit_ellipse_weighted(&weighted).map(|e| e.semi_minor_px).unwrap_or(0.5);
        blobs.push(Blob { comp, peak, minor_px });
    }
    Ok((blobs, extraction.tally))
}

/// Green-band excess at the position the vehicle occupies at green time,
/// relative to the local level.
fn green_excess(green: &Grid<f32>, level: &Grid<f32>, at: (f64, f64)) -> f32 {
    let r = at.0.round().clamp(0.0, green.height() as f64 - 1.0) as usize;
    let c = at.1.round().clamp(0.0, green.width() as f64 - 1.0) as usize;
    (green.at(r, c) - level.at(r, c)) / level.at(r, c).max(1.0)
}

/// Anti-aliased filled ellipse, max-composited into `plane`.
fn paint_ellipse(plane: &mut Grid<u8>, center: (f64, f64), axis: (f64, f64), a: f64, b: f64) {
    const S: usize = 4;
    let (w, h) = (plane.width(), plane.height());
    let ext = a + 1.0;
    let r0 = (center.0 - ext).floor().max(0.0) as usize;
    let c0 = (center.1 - ext).floor().max(0.0) as usize;
    let r1 = ((center.0 + ext).ceil().max(0.0) as usize).min(h - 1);
    let c1 = ((center.1 + ext).ceil().max(0.0) as usize).min(w - 1);
    for r in r0..=r1 {
        for c in c0..=c1 {
            let mut hits = 0;
            for i in 0..S {
                for j in 0..S {
                    let dr = r as f64 + (i as f64 + 0.5) / S as f64 - 0.5 - center.0;
                    let dc = c as f64 + (j as f64 + 0.5) / S as f64 - 0.5 - center.1;
                    let u = dr * axis.0 + dc * axis.1;
                    let v = -dr * axis.1 + dc * axis.0;
                    if (u / a).powi(2) + (v / b).powi(2) <= 1.0 {
                        hits += 1;
                    }
                }
            }
            if hits > 0 {
                let score = ((255 * hits) as f64 / (S * S) as f64).round() as u8;
                let px = plane.get_mut(r, c);
                *px = (*px).max(score);
            }
        }
    }
}

/// Runs both mask sources, pairs the signed blobs into rainbows and
/// post-processes the resulting class mask into detections.
pub fn detect(raster: &RasterBundle, cfg: &DetectorConfig) -> Result<DetectorOutput> {
    cfg.validate()?;
    let sensor = &raster.meta.sensor;
    let schema = Schema::for_sensor(sensor);
    let (w, h) = (raster.width(), raster.height());
    let field = normalized_discrepancy(raster, cfg)?;
    let grad = gradient_magnitude(&field);
    let threshold = blob_threshold(&field, cfg);
    let mut diagnostics = DetectorDiagnostics::default();

    let (mut soft_p, mut soft_n) = (0, 0);
    let ((pos, neg), tophat) = rayon::join(
        || {
            rayon::join(
                || signed_blobs(&field, &grad, 1.0, threshold, cfg, &mut soft_p),
                || signed_blobs(&field, &grad, -1.0, threshold, cfg, &mut soft_n),
            )
        },
        || (schema == Schema::Skysat).then(|| tophat_response(raster, cfg)),
    );
    let (pos, pos_tally) = pos?;
    let (neg, neg_tally) = neg?;
    diagnostics.positive_blobs = pos_tally;
    diagnostics.negative_blobs = neg_tally;
    diagnostics.soft_rejected = soft_p + soft_n;

    // Pair positive (red-time) with negative (blue-time) blobs.
    let green = gaussian_blur(&raster.band_f32(Band::Green), cfg.blur_sigma_px);
    let level = box_mean(&raster.luminance(), window_radius(cfg.local_norm_window_px));
    let offsets = sensor.band_time_offsets_ms;
    let green_frac = (offsets.green - offsets.red) / (offsets.blue - offsets.red);
    let truck_len_px = crate::synth::VehicleKind::Truck.default_size_m().0 / sensor.gsd_m;
    let reach = sensor.rainbow_from_speed(cfg.max_speed_kmh)?.max(truck_len_px) + 2.0;
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in pos.iter().enumerate() {
        for (j, n) in neg.iter().enumerate() {
            let (pr, pc) = p.comp.centroid_px;
            let (nr, nc) = n.comp.centroid_px;
            let dist = (nr - pr).hypot(nc - pc);
            let ratio = p.comp.area_px.max(n.comp.area_px) as f64 / p.comp.area_px.min(n.comp.area_px) as f64;
            if dist > reach || dist == 0.0 || ratio > cfg.max_area_ratio {
                continue;
            }
            let mid = (pr + green_frac * (nr - pr), pc + green_frac * (nc - pc));
            let support = green_excess(&green, &level, mid) / ((p.peak + n.peak) / 2.0).max(f32::EPSILON);
            if (support as f64) < cfg.min_green_support {
                continue;
            }
            candidates.push((dist, i, j));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_p, mut used_n) = (vec![false; pos.len()], vec![false; neg.len()]);
    let classes = schema.classes();
    let mut planes: Vec<Grid<u8>> = classes.iter().map(|_| Grid::filled(w, h, 0u8)).collect();
    let moving_plane = |truck: bool| -> usize {
        let want = if truck && schema == Schema::Planetscope {
            crate::detection::ObjectClass::MovingTruck
        } else {
            crate::detection::ObjectClass::MovingCar
        };
        classes.iter().position(|&c| c == want).unwrap()
    };
    for (dist, i, j) in candidates {
        if used_p[i] || used_n[j] {
            continue;
        }
        used_p[i] = true;
        used_n[j] = true;
        diagnostics.pairs += 1;
        let (p, n) = (&pos[i], &neg[j]);
        let (pr, pc) = p.comp.centroid_px;
        let (nr, nc) = n.comp.centroid_px;
        let center = ((pr + nr) / 2.0, (pc + nc) / 2.0);
        let axis = ((nr - pr) / dist, (nc - pc) / dist);
        let a = dist / 2.0;
        let b = ((p.minor_px + n.minor_px) / 2.0).clamp(0.5, a);
        let mean_area = (p.comp.area_px + n.comp.area_px) as f64 / 2.0;
        paint_ellipse(
            &mut planes[moving_plane(cfg.truck_min_area_px.is_some_and(|t| mean_area >= t))],
            center,
            axis,
            a,
            b,
        );
    }
    diagnostics.unpaired_blobs = used_p.iter().chain(&used_n).filter(|u| !**u).count();

    if let Some(tophat) = tophat {
        let static_idx = classes.iter().position(|c| !c.is_moving()).unwrap();
        let mut motion = Grid::filled(w, h, 0.0f32);
        for blob in pos.iter().chain(&neg) {
            for &(r, c) in &blob.comp.pixels {
                motion.set(r, c, 1.0);
            }
        }
        for plane in &planes {
            for (m, &s) in motion.as_mut_slice().iter_mut().zip(plane.as_slice()) {
                if s > 0 {
                    *m = 1.0;
                }
            }
        }
        let motion = dilate(&motion, &disk_offsets(cfg.motion_exclusion_px));
        let bright = tophat.map(|&v| to_score(v, cfg.tophat_gain) >= cfg.tophat_thresh.max(1));
        let extraction = extract_components(&bright, "static_car", cfg.static_min_area_px, cfg.static_max_area_px)?;
        diagnostics.static_candidates = extraction.tally;
        for comp in extraction.components {
            if comp.pixels.iter().any(|&(r, c)| motion.at(r, c) > 0.0) {
                diagnostics.motion_excluded += 1;
                continue;
            }
            for &(r, c) in &comp.pixels {
                planes[static_idx].set(r, c, 255);
            }
        }
    }

    let mask = ProbMask::new(schema.labels(), planes)?;
    let post = postprocess(&mask, raster, &cfg.postprocess)?;
    diagnostics.postprocess = post.diagnostics;
    Ok(DetectorOutput {
        detections: post.detections,
        mask,
        diagnostics,
    })
}

/// Detects every raster in parallel; results keep the input order.
pub fn detect_many(rasters: &[RasterBundle], cfg: &DetectorConfig) -> Vec<Result<DetectorOutput>> {
    rasters.par_iter().map(|r| detect(r, cfg)).collect()
}
