//! Forward model: scenes in which every band images the moving objects at its
//! own capture time, plus the matching ground truth and truth masks.

use chrono::{DateTime, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::detection::{ObjectClass, Schema};
use crate::error::{Error, Result};
use crate::filters::gaussian_blur;
use crate::geometry::{convex_hull, segment_distance, Point, Polygon};
use crate::grid::Grid;
use crate::mask::{compass_unit, normalize_deg, ProbMask};
use crate::raster::{BundleMeta, GeoTransform, RasterBundle};
use crate::sensor::{Band, SensorModel};

pub const MIN_CLOUD_RADIUS_PX: f64 = 15.0;
pub const MIN_CLOUD_SOFTNESS_PX: f64 = 3.0;
pub const MIN_TRUCK_LENGTH_M: f64 = 8.0;

/// Truth-mask buffer radius for high-resolution imagery.
pub const SKYSAT_BUFFER_M: f64 = 0.75;
/// Truth-mask buffer radius for medium-resolution imagery.
pub const PLANETSCOPE_BUFFER_M: f64 = 2.0;

const SUPERSAMPLE: usize = 4;

/// A sensor given either by preset name or in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SensorSpec {
    Preset(String),
    Model(SensorModel),
}

impl SensorSpec {
    pub fn resolve(&self) -> Result<SensorModel> {
        match self {
            SensorSpec::Preset(name) => SensorModel::preset(name),
            SensorSpec::Model(m) => {
                m.validate()?;
                Ok(m.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleKind {
    #[default]
    Car,
    Truck,
}

impl VehicleKind {
    /// Default `(length_m, width_m)`.
    pub fn default_size_m(self) -> (f64, f64) {
        match self {
            VehicleKind::Car => (4.5, 2.0),
            VehicleKind::Truck => (12.0, 2.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Background {
    #[serde(default = "default_level")]
    pub level: [f64; 3],
    /// Standard deviation of the smooth texture shared by all bands.
    #[serde(default)]
    pub texture_sigma: f64,
}

fn default_level() -> [f64; 3] {
    [80.0; 3]
}

impl Default for Background {
    fn default() -> Self {
        Background {
            level: default_level(),
            texture_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    /// `(row, col)` at the first band's capture time.
    pub centroid_px: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_m: Option<f64>,
    #[serde(default = "default_vehicle_intensity")]
    pub intensity: [f64; 3],
    #[serde(default)]
    pub class: VehicleKind,
    #[serde(default)]
    pub speed_kmh: f64,
    #[serde(default)]
    pub heading_deg: f64,
}

fn default_vehicle_intensity() -> [f64; 3] {
    [230.0; 3]
}

impl VehicleSpec {
    pub fn size_m(&self) -> (f64, f64) {
        let (l, w) = self.class.default_size_m();
        (self.length_m.unwrap_or(l), self.width_m.unwrap_or(w))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudSpec {
    pub centroid_px: [f64; 2],
    pub radius_px: f64,
    #[serde(default = "default_cloud_intensity")]
    pub intensity: [f64; 3],
    #[serde(default)]
    pub drift_speed_kmh: f64,
    #[serde(default)]
    pub drift_heading_deg: f64,
    /// Gaussian edge sigma in pixels.
    pub softness: f64,
}

fn default_cloud_intensity() -> [f64; 3] {
    [240.0; 3]
}

fn default_scene_id() -> String {
    "scene".into()
}

pub fn default_timestamp() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 10, 30, 0).unwrap()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width_px: usize,
    pub height_px: usize,
    pub sensor: SensorSpec,
    #[serde(default = "default_scene_id")]
    pub scene_id: String,
    #[serde(default = "default_timestamp")]
    pub timestamp: DateTime<Utc>,
    /// Defaults to a north-up metric grid at the sensor's GSD.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geotransform: Option<GeoTransform>,
    #[serde(default)]
    pub background: Background,
    #[serde(default)]
    pub vehicles: Vec<VehicleSpec>,
    #[serde(default)]
    pub clouds: Vec<CloudSpec>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

fn finite_in(v: f64, lo: f64, hi: f64) -> bool {
    v.is_finite() && v >= lo && v < hi
}

impl SceneSpec {
    pub fn validate(&self) -> Result<SensorModel> {
        let sensor = self.sensor.resolve()?;
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::field("width_px", "scene must have at least one pixel"));
        }
        let (h, w) = (self.height_px as f64, self.width_px as f64);
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::field("noise_sigma", "must be non-negative"));
        }
        if !(self.background.texture_sigma.is_finite() && self.background.texture_sigma >= 0.0) {
            return Err(Error::field("background.texture_sigma", "must be non-negative"));
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            let at = |f: &str| format!("vehicles[{i}].{f}");
            let [r, c] = v.centroid_px;
            if !(finite_in(r, -0.5, h - 0.5) && finite_in(c, -0.5, w - 0.5)) {
                return Err(Error::field(at("centroid_px"), "must lie inside the image"));
            }
            let (len, wid) = v.size_m();
            if !(wid.is_finite() && wid > 0.0 && len.is_finite() && len >= wid) {
                return Err(Error::field(at("length_m"), "need length_m >= width_m > 0"));
            }
            if v.class == VehicleKind::Truck && len < MIN_TRUCK_LENGTH_M {
                return Err(Error::field(
                    at("length_m"),
                    format!("trucks are at least {MIN_TRUCK_LENGTH_M} m long"),
                ));
            }
            if !(v.speed_kmh.is_finite() && v.speed_kmh >= 0.0) {
                return Err(Error::field(at("speed_kmh"), "must be non-negative"));
            }
            if !finite_in(v.heading_deg, 0.0, 360.0) {
                return Err(Error::field(at("heading_deg"), "must be in [0, 360)"));
            }
            if v.intensity.iter().any(|x| !finite_in(*x, 0.0, 256.0)) {
                return Err(Error::field(at("intensity"), "must be in [0, 255]"));
            }
            if v.speed_kmh > 0.0 {
                sensor.rainbow_from_speed(v.speed_kmh)?;
            }
        }
        for (i, cl) in self.clouds.iter().enumerate() {
            let at = |f: &str| format!("clouds[{i}].{f}");
            if !(cl.radius_px.is_finite() && cl.radius_px >= MIN_CLOUD_RADIUS_PX) {
                return Err(Error::field(
                    at("radius_px"),
                    format!("must be at least {MIN_CLOUD_RADIUS_PX} px"),
                ));
            }
            if !(cl.softness.is_finite() && cl.softness >= MIN_CLOUD_SOFTNESS_PX) {
                return Err(Error::field(
                    at("softness"),
                    format!("must be at least {MIN_CLOUD_SOFTNESS_PX} px"),
                ));
            }
            if !(cl.drift_speed_kmh.is_finite() && cl.drift_speed_kmh >= 0.0) {
                return Err(Error::field(at("drift_speed_kmh"), "must be non-negative"));
            }
            if !cl.centroid_px.iter().all(|x| x.is_finite()) || !cl.drift_heading_deg.is_finite() {
                return Err(Error::field(at("centroid_px"), "must be finite"));
            }
        }
        if let Some(gt) = &self.geotransform {
            gt.validate()?;
        }
        Ok(sensor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub id: u32,
    pub class: ObjectClass,
    /// Envelope of the vehicle's images in all bands, pixel space, clipped
    /// to the image.
    pub footprint: Polygon,
    pub speed_kmh: f64,
    /// Absent for static vehicles.
    pub heading_deg: Option<f64>,
    pub timestamp: DateTime<Utc>,
    /// `(row, col)` of the vehicle in the red band.
    pub red_centroid_px: (f64, f64),
    pub blue_centroid_px: (f64, f64),
    pub body_length_px: f64,
    pub body_width_px: f64,
    /// Red-to-blue displacement in pixels.
    pub blur_length_px: f64,
    /// Some band images the vehicle entirely outside the frame.
    pub out_of_frame: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSet {
    pub scene_id: String,
    pub timestamp: DateTime<Utc>,
    pub width_px: usize,
    pub height_px: usize,
    pub records: Vec<TruthRecord>,
}

/// A vehicle's placement in one band.
struct BandPose {
    center: (f64, f64),
    axis: (f64, f64),
    half_len: f64,
    half_wid: f64,
}

impl BandPose {
    fn polygon(&self) -> Polygon {
        Polygon::oriented_rect(
            Point::rc(self.center.0, self.center.1),
            Point::new(self.axis.1, self.axis.0),
            2.0 * self.half_len,
            2.0 * self.half_wid,
        )
    }

    fn coverage(&self, r: usize, c: usize) -> f64 {
        let mut hits = 0;
        for i in 0..SUPERSAMPLE {
            for j in 0..SUPERSAMPLE {
                let dr = r as f64 + (i as f64 + 0.5) / SUPERSAMPLE as f64 - 0.5 - self.center.0;
                let dc = c as f64 + (j as f64 + 0.5) / SUPERSAMPLE as f64 - 0.5 - self.center.1;
                let u = dr * self.axis.0 + dc * self.axis.1;
                let v = -dr * self.axis.1 + dc * self.axis.0;
                if u.abs() <= self.half_len && v.abs() <= self.half_wid {
                    hits += 1;
                }
            }
        }
        hits as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64
    }

    fn bbox(&self, w: usize, h: usize) -> Option<(usize, usize, usize, usize)> {
        let ext = self.half_len + self.half_wid + 1.0;
        pixel_window(self.center, ext, w, h)
    }
}

fn pixel_window(center: (f64, f64), ext: f64, w: usize, h: usize) -> Option<(usize, usize, usize, usize)> {
    let r0 = (center.0 - ext).floor().max(0.0);
    let c0 = (center.1 - ext).floor().max(0.0);
    let r1 = (center.0 + ext).ceil().min(h as f64 - 1.0);
    let c1 = (center.1 + ext).ceil().min(w as f64 - 1.0);
    if r0 > r1 || c0 > c1 {
        return None;
    }
    Some((r0 as usize, c0 as usize, r1 as usize, c1 as usize))
}

fn vehicle_pose(v: &VehicleSpec, sensor: &SensorModel, band: Band) -> Result<BandPose> {
    let (len, wid) = v.size_m();
    let axis = compass_unit(v.heading_deg);
    let shift = if v.speed_kmh > 0.0 {
        sensor.band_displacement_px(band, v.speed_kmh)?
    } else {
        0.0
    };
    Ok(BandPose {
        center: (v.centroid_px[0] + shift * axis.0, v.centroid_px[1] + shift * axis.1),
        axis,
        half_len: len / sensor.gsd_m / 2.0,
        half_wid: wid / sensor.gsd_m / 2.0,
    })
}

/// Renders the scene and its ground truth. Output is a pure function of the spec.
pub fn render_scene(spec: &SceneSpec) -> Result<(RasterBundle, GroundTruthSet)> {
    let sensor = spec.validate()?;
    let (w, h) = (spec.width_px, spec.height_px);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    let texture = if spec.background.texture_sigma > 0.0 {
        // A sigma-2 blur scales white-noise deviation by 1 / (4 sqrt(pi)).
        let pre = spec.background.texture_sigma * 4.0 * std::f64::consts::PI.sqrt();
        let normal = Normal::new(0.0, pre).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let white = Grid::from_fn(w, h, |_, _| normal.sample(&mut rng) as f32);
        Some(gaussian_blur(&white, 2.0))
    } else {
        None
    };

    let mut planes: Vec<Grid<f64>> = Vec::with_capacity(3);
    for band in Band::ALL {
        let level = spec.background.level[band.index()];
        let mut plane = match &texture {
            Some(t) => t.map(|&v| level + v as f64),
            None => Grid::filled(w, h, level),
        };
        for v in &spec.vehicles {
            let pose = vehicle_pose(v, &sensor, band)?;
            let value = v.intensity[band.index()];
            if let Some((r0, c0, r1, c1)) = pose.bbox(w, h) {
                for r in r0..=r1 {
                    for c in c0..=c1 {
                        let cov = pose.coverage(r, c);
                        if cov > 0.0 {
                            let px = plane.get_mut(r, c);
                            *px = *px * (1.0 - cov) + value * cov;
                        }
                    }
                }
            }
        }
        for cl in &spec.clouds {
            let shift = if cl.drift_speed_kmh > 0.0 {
                sensor.band_displacement_px(band, cl.drift_speed_kmh)?
            } else {
                0.0
            };
            let axis = compass_unit(cl.drift_heading_deg);
            let center = (cl.centroid_px[0] + shift * axis.0, cl.centroid_px[1] + shift * axis.1);
            let value = cl.intensity[band.index()];
            let ext = cl.radius_px + 6.0 * cl.softness;
            if let Some((r0, c0, r1, c1)) = pixel_window(center, ext, w, h) {
                for r in r0..=r1 {
                    for c in c0..=c1 {
                        let d = (r as f64 - center.0).hypot(c as f64 - center.1);
                        let alpha = 0.5 * libm::erfc((d - cl.radius_px) / (cl.softness * std::f64::consts::SQRT_2));
                        let px = plane.get_mut(r, c);
                        *px = *px * (1.0 - alpha) + value * alpha;
                    }
                }
            }
        }
        planes.push(plane);
    }

    let noise = if spec.noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidInput(e.to_string()))?)
    } else {
        None
    };
    let mut bytes = planes.into_iter().map(|p| {
        let data: Vec<u8> = p
            .as_slice()
            .iter()
            .map(|&v| {
                let n = noise.as_ref().map_or(0.0, |d| d.sample(&mut rng));
                (v + n).round().clamp(0.0, 255.0) as u8
            })
            .collect();
        Grid::from_vec(w, h, data)
    });
    let (red, green, blue) = (bytes.next().unwrap(), bytes.next().unwrap(), bytes.next().unwrap());

    let meta = BundleMeta {
        scene_id: spec.scene_id.clone(),
        timestamp: spec.timestamp,
        geotransform: spec
            .geotransform
            .unwrap_or_else(|| GeoTransform::local_metric(sensor.gsd_m)),
        sensor: sensor.clone(),
    };
    let raster = RasterBundle::new(meta, red, green, blue)?;
    let truth = ground_truth(spec, &sensor)?;
    Ok((raster, truth))
}

fn ground_truth(spec: &SceneSpec, sensor: &SensorModel) -> Result<GroundTruthSet> {
    let (w, h) = (spec.width_px as f64, spec.height_px as f64);
    let mut records = Vec::with_capacity(spec.vehicles.len());
    for (i, v) in spec.vehicles.iter().enumerate() {
        let poses = Band::ALL
            .iter()
            .map(|&b| vehicle_pose(v, sensor, b))
            .collect::<Result<Vec<_>>>()?;
        let corners: Vec<Point> = poses.iter().flat_map(|p| p.polygon().0).collect();
        let hull = convex_hull(&corners);
        let footprint = hull.clip_to_box(-0.5, -0.5, w - 0.5, h - 0.5);
        let any_band_outside = poses
            .iter()
            .any(|p| p.polygon().clip_to_box(-0.5, -0.5, w - 0.5, h - 0.5).area() == 0.0);
        let moving = v.speed_kmh > 0.0;
        let class = match (moving, v.class) {
            (false, _) => ObjectClass::StaticCar,
            (true, VehicleKind::Car) => ObjectClass::MovingCar,
            (true, VehicleKind::Truck) => ObjectClass::MovingTruck,
        };
        let red = poses[Band::Red.index()].center;
        let blue = poses[Band::Blue.index()].center;
        records.push(TruthRecord {
            id: i as u32 + 1,
            class,
            footprint,
            speed_kmh: v.speed_kmh,
            heading_deg: moving.then_some(v.heading_deg),
            timestamp: spec.timestamp,
            red_centroid_px: red,
            blue_centroid_px: blue,
            body_length_px: 2.0 * poses[0].half_len,
            body_width_px: 2.0 * poses[0].half_wid,
            blur_length_px: (blue.0 - red.0).hypot(blue.1 - red.1),
            out_of_frame: any_band_outside,
        });
    }
    Ok(GroundTruthSet {
        scene_id: spec.scene_id.clone(),
        timestamp: spec.timestamp,
        width_px: spec.width_px,
        height_px: spec.height_px,
        records,
    })
}

/// Buffer radius in pixels for a schema's truth masks, at least one pixel.
pub fn truth_buffer_px(sensor: &SensorModel, schema: Schema) -> f64 {
    let meters = match schema {
        Schema::Skysat => SKYSAT_BUFFER_M,
        Schema::Planetscope => PLANETSCOPE_BUFFER_M,
    };
    let px = meters / sensor.gsd_m;
    if px < 1.0 {
        log::warn!(
            "{} m truth buffer is {px:.2} px at {} m GSD; clamping to 1 px",
            meters,
            sensor.gsd_m
        );
        1.0
    } else {
        px
    }
}

/// Training-style truth mask: static cars as buffered points and movers as
/// buffered red-to-blue line strings, one plane per schema class.
pub fn render_truth_mask(truth: &GroundTruthSet, sensor: &SensorModel, schema: Schema) -> Result<ProbMask> {
    if Schema::for_sensor(sensor) != schema {
        return Err(Error::InvalidInput(format!(
            "schema `{}` does not match sensor `{}` ({} m GSD)",
            schema.name(),
            sensor.name,
            sensor.gsd_m
        )));
    }
    let buffer = truth_buffer_px(sensor, schema);
    let (w, h) = (truth.width_px, truth.height_px);
    let classes = schema.classes();
    let mut planes: Vec<Grid<u8>> = classes.iter().map(|_| Grid::filled(w, h, 0u8)).collect();
    for rec in &truth.records {
        let Some(plane) = schema
            .scoring_class(rec.class)
            .and_then(|c| classes.iter().position(|&k| k == c))
        else {
            continue;
        };
        let a = Point::rc(rec.red_centroid_px.0, rec.red_centroid_px.1);
        let b = Point::rc(rec.blue_centroid_px.0, rec.blue_centroid_px.1);
        let center = ((a.y + b.y) / 2.0, (a.x + b.x) / 2.0);
        let ext = a.dist(b) / 2.0 + buffer + 1.0;
        if let Some((r0, c0, r1, c1)) = pixel_window(center, ext, w, h) {
            for r in r0..=r1 {
                for c in c0..=c1 {
                    if segment_distance(Point::rc(r as f64, c as f64), a, b) <= buffer {
                        planes[plane].set(r, c, 255);
                    }
                }
            }
        }
    }
    ProbMask::new(schema.labels(), planes)
}

/// Parameters for random scene generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSceneConfig {
    pub sensor: SensorModel,
    pub width_px: usize,
    pub height_px: usize,
    pub n_vehicles: usize,
    /// Share of vehicles parked; ignored for medium-resolution sensors.
    pub static_fraction: f64,
    pub truck_fraction: f64,
    pub speed_range_kmh: (f64, f64),
    pub n_clouds: usize,
    pub background_level: f64,
    pub texture_sigma: f64,
    /// Vehicle brightness above the background.
    pub vehicle_contrast: f64,
    pub noise_sigma: f64,
    /// Minimum clearance between vehicle envelopes, in pixels.
    pub spacing_px: f64,
    pub seed: u64,
    pub scene_id: String,
    pub timestamp: DateTime<Utc>,
}

impl RandomSceneConfig {
    /// Defaults per sensor family, with an image just large enough to hold
    /// `n_vehicles` at comfortable spacing.
    pub fn for_sensor(sensor: SensorModel, n_vehicles: usize, seed: u64) -> Self {
        let high_res = Schema::for_sensor(&sensor) == Schema::Skysat;
        let (per_vehicle, min_side, spacing) = if high_res { (72.0, 256, 12.0) } else { (24.0, 128, 8.0) };
        let side = ((n_vehicles as f64).sqrt() * per_vehicle).ceil() as usize;
        let side = side.max(min_side).div_ceil(32) * 32;
        RandomSceneConfig {
            static_fraction: if high_res { 1.0 / 3.0 } else { 0.0 },
            truck_fraction: if high_res { 0.0 } else { 0.25 },
            sensor,
            width_px: side,
            height_px: side,
            n_vehicles,
            speed_range_kmh: (40.0, 120.0),
            n_clouds: 0,
            background_level: 80.0,
            texture_sigma: 4.0,
            vehicle_contrast: 150.0,
            noise_sigma: 6.0,
            spacing_px: spacing,
            seed,
            scene_id: format!("scene-{seed}"),
            timestamp: default_timestamp(),
        }
    }

    /// `vehicle_contrast / noise_sigma`.
    pub fn snr(&self) -> f64 {
        self.vehicle_contrast / self.noise_sigma
    }
}

/// Points sampled along a vehicle's red-to-blue envelope axis.
fn envelope_samples(v: &VehicleSpec, sensor: &SensorModel) -> Result<(Vec<(f64, f64)>, f64)> {
    let (len, wid) = v.size_m();
    let axis = compass_unit(v.heading_deg);
    let d = if v.speed_kmh > 0.0 {
        sensor.rainbow_from_speed(v.speed_kmh)?
    } else {
        0.0
    };
    let half_len = len / sensor.gsd_m / 2.0;
    let start = -half_len;
    let end = d + half_len;
    let n = ((end - start).ceil() as usize).max(1);
    let pts = (0..=n)
        .map(|k| {
            let t = start + (end - start) * k as f64 / n as f64;
            (v.centroid_px[0] + t * axis.0, v.centroid_px[1] + t * axis.1)
        })
        .collect();
    Ok((pts, wid / sensor.gsd_m / 2.0))
}

/// Draws a random scene spec: uniform headings and speeds, envelopes kept
/// inside the frame and apart from each other.
pub fn random_scene(cfg: &RandomSceneConfig) -> Result<SceneSpec> {
    let sensor = &cfg.sensor;
    sensor.validate()?;
    let (lo, hi) = cfg.speed_range_kmh;
    if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
        return Err(Error::field("speed_range_kmh", "need 0 < min <= max"));
    }
    let high_res = Schema::for_sensor(sensor) == Schema::Skysat;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (w, h) = (cfg.width_px as f64, cfg.height_px as f64);
    let margin = 4.0;
    let vehicle_level = (cfg.background_level + cfg.vehicle_contrast).clamp(0.0, 255.0);
    let mut placed: Vec<(Vec<(f64, f64)>, f64)> = Vec::new();
    let mut vehicles = Vec::with_capacity(cfg.n_vehicles);
    for i in 0..cfg.n_vehicles {
        let mut attempt = 0;
        loop {
            attempt += 1;
            if attempt > 2000 {
                return Err(Error::Config(format!(
                    "could not place vehicle {} of {} in a {}x{} scene; enlarge it or lower the count",
                    i + 1,
                    cfg.n_vehicles,
                    cfg.width_px,
                    cfg.height_px
                )));
            }
            let parked = high_res && rng.random_bool(cfg.static_fraction.clamp(0.0, 1.0));
            let truck = rng.random_bool(cfg.truck_fraction.clamp(0.0, 1.0));
            let speed = if parked { 0.0 } else { rng.random_range(lo..=hi) };
            let heading = normalize_deg(rng.random_range(0.0..360.0), 360.0);
            let spec = VehicleSpec {
                centroid_px: [rng.random_range(0.0..h), rng.random_range(0.0..w)],
                length_m: None,
                width_m: None,
                intensity: [vehicle_level; 3],
                class: if truck { VehicleKind::Truck } else { VehicleKind::Car },
                speed_kmh: speed,
                heading_deg: heading,
            };
            let (samples, half_wid) = envelope_samples(&spec, sensor)?;
            let inside = samples.iter().all(|&(r, c)| {
                r - half_wid >= margin
                    && c - half_wid >= margin
                    && r + half_wid <= h - 1.0 - margin
                    && c + half_wid <= w - 1.0 - margin
            });
            if !inside {
                continue;
            }
            let clear = placed.iter().all(|(other, other_wid)| {
                samples.iter().all(|&(r, c)| {
                    other
                        .iter()
                        .all(|&(orow, ocol)| (r - orow).hypot(c - ocol) >= half_wid + other_wid + cfg.spacing_px)
                })
            });
            if !clear {
                continue;
            }
            placed.push((samples, half_wid));
            vehicles.push(spec);
            break;
        }
    }
    let clouds = (0..cfg.n_clouds)
        .map(|_| {
            let radius = if high_res {
                rng.random_range(20.0..60.0)
            } else {
                rng.random_range(15.0..30.0)
            };
            CloudSpec {
                centroid_px: [rng.random_range(0.0..h), rng.random_range(0.0..w)],
                radius_px: radius,
                intensity: [rng.random_range(225.0..250.0); 3],
                drift_speed_kmh: rng.random_range(20.0..80.0),
                drift_heading_deg: rng.random_range(0.0..360.0),
                softness: rng.random_range(MIN_CLOUD_SOFTNESS_PX..8.0),
            }
        })
        .collect();
    Ok(SceneSpec {
        width_px: cfg.width_px,
        height_px: cfg.height_px,
        sensor: SensorSpec::Model(sensor.clone()),
        scene_id: cfg.scene_id.clone(),
        timestamp: cfg.timestamp,
        geotransform: None,
        background: Background {
            level: [cfg.background_level; 3],
            texture_sigma: cfg.texture_sigma,
        },
        vehicles,
        clouds,
        noise_sigma: cfg.noise_sigma,
        rng_seed: rng.random(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{extract_components, threshold_plane};

    fn scene(sensor: &str, w: usize, h: usize, vehicles: Vec<VehicleSpec>) -> SceneSpec {
        SceneSpec {
            width_px: w,
            height_px: h,
            sensor: SensorSpec::Preset(sensor.into()),
            scene_id: "t".into(),
            timestamp: default_timestamp(),
            geotransform: None,
            background: Background::default(),
            vehicles,
            clouds: vec![],
            noise_sigma: 0.0,
            rng_seed: 1,
        }
    }

    fn car(row: f64, col: f64, speed: f64, heading: f64) -> VehicleSpec {
        VehicleSpec {
            centroid_px: [row, col],
            length_m: None,
            width_m: None,
            intensity: [230.0; 3],
            class: VehicleKind::Car,
            speed_kmh: speed,
            heading_deg: heading,
        }
    }

    /// Intensity-weighted centroid of the excess over the background level.
    fn excess_centroid(plane: &Grid<u8>, level: f64) -> (f64, f64) {
        let (mut s, mut sr, mut sc) = (0.0, 0.0, 0.0);
        for r in 0..plane.height() {
            for c in 0..plane.width() {
                let e = plane.at(r, c) as f64 - level;
                if e > 0.0 {
                    s += e;
                    sr += e * r as f64;
                    sc += e * c as f64;
                }
            }
        }
        (sr / s, sc / s)
    }

    #[test]
    fn static_car_is_identical_across_bands() {
        let (raster, truth) = render_scene(&scene("skysat", 40, 40, vec![car(20.0, 20.0, 0.0, 30.0)])).unwrap();
        assert_eq!(raster.band(Band::Red), raster.band(Band::Blue));
        assert_eq!(raster.band(Band::Red), raster.band(Band::Green));
        assert_eq!(truth.records[0].class, ObjectClass::StaticCar);
        assert_eq!(truth.records[0].heading_deg, None);
    }

    #[test]
    fn superdove_shift_at_54_kmh() {
        let (raster, truth) = render_scene(&scene("superdove", 32, 32, vec![car(16.0, 10.0, 54.0, 90.0)])).unwrap();
        let red = excess_centroid(raster.band(Band::Red), 80.0);
        let blue = excess_centroid(raster.band(Band::Blue), 80.0);
        assert!((blue.1 - red.1 - 4.0).abs() <= 0.5, "{red:?} -> {blue:?}");
        assert!((blue.0 - red.0).abs() <= 0.5);
        assert!((truth.records[0].blur_length_px - 4.0).abs() < 1e-9);
    }

    #[test]
    fn blue_leads_red_along_heading() {
        for heading in [0.0, 45.0, 135.0, 200.0, 300.0] {
            let (raster, _) = render_scene(&scene("skysat", 96, 96, vec![car(48.0, 48.0, 60.0, heading)])).unwrap();
            let red = excess_centroid(raster.band(Band::Red), 80.0);
            let blue = excess_centroid(raster.band(Band::Blue), 80.0);
            let (ur, uc) = compass_unit(heading);
            let along = (blue.0 - red.0) * ur + (blue.1 - red.1) * uc;
            let expected = SensorModel::skysat().rainbow_from_speed(60.0).unwrap();
            assert!(
                (along - expected).abs() <= 0.5,
                "heading {heading}: {along} vs {expected}"
            );
        }
    }

    #[test]
    fn seed_determines_output() {
        let mut s = scene("skysat", 64, 64, vec![car(30.0, 30.0, 50.0, 10.0)]);
        s.noise_sigma = 5.0;
        s.background.texture_sigma = 3.0;
        let a = render_scene(&s).unwrap();
        let b = render_scene(&s).unwrap();
        assert_eq!(a, b);
        s.rng_seed = 2;
        assert_ne!(render_scene(&s).unwrap().0, a.0);
    }

    #[test]
    fn validation_names_fields() {
        let mut s = scene("skysat", 10, 10, vec![car(50.0, 5.0, 0.0, 0.0)]);
        let err = render_scene(&s).unwrap_err().to_string();
        assert!(err.contains("vehicles[0].centroid_px"), "{err}");
        s.vehicles = vec![VehicleSpec {
            class: VehicleKind::Truck,
            length_m: Some(6.0),
            ..car(5.0, 5.0, 0.0, 0.0)
        }];
        assert!(render_scene(&s).unwrap_err().to_string().contains("length_m"));
        s.vehicles.clear();
        s.clouds = vec![CloudSpec {
            centroid_px: [5.0, 5.0],
            radius_px: 5.0,
            intensity: [240.0; 3],
            drift_speed_kmh: 0.0,
            drift_heading_deg: 0.0,
            softness: 3.0,
        }];
        assert!(render_scene(&s).unwrap_err().to_string().contains("radius_px"));
    }

    #[test]
    fn out_of_frame_flag() {
        // Blue image lands past the right edge.
        let (_, truth) = render_scene(&scene("skysat", 40, 40, vec![car(20.0, 35.0, 120.0, 90.0)])).unwrap();
        assert!(truth.records[0].out_of_frame);
        assert!(truth.records[0].footprint.points().iter().all(|p| p.x <= 39.5));
    }

    #[test]
    fn empty_truth_mask() {
        let (_, truth) = render_scene(&scene("skysat", 20, 20, vec![])).unwrap();
        let m = render_truth_mask(&truth, &SensorModel::skysat(), Schema::Skysat).unwrap();
        assert!(m.planes().iter().all(|p| p.as_slice().iter().all(|&v| v == 0)));
    }

    #[test]
    fn static_truth_mask_is_one_disk() {
        let (_, truth) = render_scene(&scene("skysat", 40, 40, vec![car(20.0, 20.0, 0.0, 0.0)])).unwrap();
        let m = render_truth_mask(&truth, &SensorModel::skysat(), Schema::Skysat).unwrap();
        let stat = extract_components(&threshold_plane(&m.planes()[0], 128), "s", 1, 10_000).unwrap();
        let mov = extract_components(&threshold_plane(&m.planes()[1], 128), "m", 1, 10_000).unwrap();
        assert_eq!(stat.components.len(), 1);
        assert!(mov.components.is_empty());
    }

    #[test]
    fn moving_truth_mask_extent() {
        let (_, truth) = render_scene(&scene("skysat", 80, 80, vec![car(40.0, 30.0, 54.0, 90.0)])).unwrap();
        let m = render_truth_mask(&truth, &SensorModel::skysat(), Schema::Skysat).unwrap();
        let e = extract_components(&threshold_plane(&m.planes()[1], 128), "m", 1, 10_000).unwrap();
        assert_eq!(e.components.len(), 1);
        let (_, c0, _, c1) = e.components[0].bbox();
        // Buffered segment: 16.8 px plus 1.5 px at either end, sampled at centers.
        let extent = (c1 - c0 + 1) as f64;
        assert!((extent - (16.8 + 3.0)).abs() <= 1.0, "{extent}");
    }

    #[test]
    fn planetscope_truth_mask_layers() {
        let mut s = scene("superdove", 40, 40, vec![car(10.0, 10.0, 80.0, 90.0)]);
        s.vehicles.push(VehicleSpec {
            class: VehicleKind::Truck,
            ..car(30.0, 10.0, 80.0, 90.0)
        });
        let (_, truth) = render_scene(&s).unwrap();
        let m = render_truth_mask(&truth, &SensorModel::superdove(), Schema::Planetscope).unwrap();
        assert_eq!(m.labels(), ["moving_car", "moving_truck"]);
        for plane in m.planes() {
            let e = extract_components(&threshold_plane(plane, 128), "x", 1, 10_000).unwrap();
            assert_eq!(e.components.len(), 1);
        }
        assert_eq!(truth_buffer_px(&SensorModel::superdove(), Schema::Planetscope), 1.0);
        assert!(render_truth_mask(&truth, &SensorModel::superdove(), Schema::Skysat).is_err());
    }

    #[test]
    fn random_scenes_are_valid_and_seeded() {
        for sensor in [SensorModel::skysat(), SensorModel::superdove()] {
            let cfg = RandomSceneConfig::for_sensor(sensor, 30, 9);
            let spec = random_scene(&cfg).unwrap();
            assert_eq!(spec.vehicles.len(), 30);
            spec.validate().unwrap();
            assert_eq!(random_scene(&cfg).unwrap(), spec);
            let (_, truth) = render_scene(&spec).unwrap();
            assert!(truth.records.iter().all(|r| !r.out_of_frame));
        }
    }

    #[test]
    fn spec_json_accepts_preset_names() {
        let json = r#"{"width_px": 8, "height_px": 8, "sensor": "superdove",
            "vehicles": [{"centroid_px": [4, 4], "speed_kmh": 54, "heading_deg": 90}]}"#;
        let spec: SceneSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.validate().unwrap(), SensorModel::superdove());
        assert_eq!(spec.vehicles[0].size_m(), (4.5, 2.0));
    }
}
