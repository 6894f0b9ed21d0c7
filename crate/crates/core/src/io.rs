//! On-disk formats: raster bundles (RGB PNG plus JSON sidecar), GeoJSON
//! detection and truth files, class-mask PNGs and atomic writes.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use image::{ColorType, DynamicImage, ImageEncoder};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::detection::{Detection, HeadingConfidence, ObjectClass, Schema, VelocityVector};
use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};
use crate::grid::Grid;
use crate::mask::ProbMask;
use crate::raster::{BundleMeta, GeoTransform, RasterBundle};
use crate::sensor::{Band, SensorModel, SpeedEstimate};
use crate::synth::{GroundTruthSet, TruthRecord};

pub const IMAGE_FILE: &str = "image.png";
pub const SIDECAR_FILE: &str = "bundle.json";
pub const TRUTH_FILE: &str = "truth.geojson";
/// Alternative single-band layout accepted by [`read_bundle`].
pub const PLANE_FILES: [&str; 3] = ["red.png", "green.png", "blue.png"];

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn format_err(path: &Path, what: &'static str, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        what,
        message: message.into(),
    }
}

pub fn encode_png(width: usize, height: usize, color: ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    image::codecs::png::PngEncoder::new(&mut buf).write_image(data, width as u32, height as u32, color.into())?;
    Ok(buf)
}

fn decode_png(path: &Path) -> Result<DynamicImage> {
    let bytes = read_file(path)?;
    image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| format_err(path, "PNG", e.to_string()))
}

fn interleave(planes: &[&Grid<u8>]) -> Vec<u8> {
    let n = planes[0].as_slice().len();
    let mut out = Vec::with_capacity(n * planes.len());
    for i in 0..n {
        out.extend(planes.iter().map(|p| p.as_slice()[i]));
    }
    out
}

fn deinterleave(width: usize, height: usize, channels: usize, data: &[u8]) -> Vec<Grid<u8>> {
    (0..channels)
        .map(|c| Grid::from_vec(width, height, data.iter().skip(c).step_by(channels).copied().collect()))
        .collect()
}

pub fn write_bundle(bundle: &RasterBundle, dir: &Path) -> Result<()> {
    let planes: Vec<&Grid<u8>> = Band::ALL.iter().map(|&b| bundle.band(b)).collect();
    let png = encode_png(bundle.width(), bundle.height(), ColorType::Rgb8, &interleave(&planes))?;
    write_atomic(&dir.join(IMAGE_FILE), &png)?;
    write_atomic(&dir.join(SIDECAR_FILE), &to_json_bytes(&bundle.meta)?)
}

/// Parses and validates a bundle sidecar; errors name the offending field.
pub fn read_sidecar(path: &Path) -> Result<BundleMeta> {
    let bytes = read_file(path)?;
    let meta: BundleMeta =
        serde_json::from_slice(&bytes).map_err(|e| format_err(path, "bundle sidecar", e.to_string()))?;
    meta.sensor
        .validate()
        .and_then(|_| meta.geotransform.validate())
        .map_err(|e| format_err(path, "bundle sidecar", e.to_string()))?;
    Ok(meta)
}

/// Reads `image.png`, or `red.png`/`green.png`/`blue.png` when the RGB image
/// is absent, plus `bundle.json`.
pub fn read_bundle(dir: &Path) -> Result<RasterBundle> {
    let meta = read_sidecar(&dir.join(SIDECAR_FILE))?;
    let rgb_path = dir.join(IMAGE_FILE);
    let planes = if rgb_path.exists() {
        let img = decode_png(&rgb_path)?;
        if img.color() != ColorType::Rgb8 {
            return Err(format_err(
                &rgb_path,
                "bundle image",
                format!("expected 8-bit RGB with three bands, found {:?}", img.color()),
            ));
        }
        let (w, h) = (img.width() as usize, img.height() as usize);
        deinterleave(w, h, 3, img.as_bytes())
    } else {
        let mut planes = Vec::with_capacity(3);
        for name in PLANE_FILES {
            let path = dir.join(name);
            if !path.exists() {
                return Err(format_err(
                    &path,
                    "bundle",
                    format!("missing plane `{name}` (and no `{IMAGE_FILE}`)"),
                ));
            }
            let img = decode_png(&path)?;
            if img.color() != ColorType::L8 {
                return Err(format_err(
                    &path,
                    "bundle plane",
                    format!("expected 8-bit grayscale, found {:?}", img.color()),
                ));
            }
            planes.push(Grid::from_vec(
                img.width() as usize,
                img.height() as usize,
                img.into_bytes(),
            ));
        }
        planes
    };
    let [r, g, b]: [Grid<u8>; 3] = planes.try_into().expect("three planes");
    RasterBundle::new(meta, r, g, b).map_err(|e| format_err(dir, "bundle", e.to_string()))
}

fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| Error::InvalidInput(format!("serializing JSON: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_atomic(path, &to_json_bytes(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &'static str) -> Result<T> {
    serde_json::from_slice(&read_file(path)?).map_err(|e| format_err(path, what, e.to_string()))
}

/// Scene-level members carried alongside the features of a collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionHeader {
    pub scene_id: String,
    pub timestamp: DateTime<Utc>,
    pub width_px: usize,
    pub height_px: usize,
    pub sensor: SensorModel,
    pub geotransform: GeoTransform,
}

impl CollectionHeader {
    pub fn for_bundle(bundle: &RasterBundle) -> Self {
        CollectionHeader {
            scene_id: bundle.meta.scene_id.clone(),
            timestamp: bundle.meta.timestamp,
            width_px: bundle.width(),
            height_px: bundle.height(),
            sensor: bundle.meta.sensor.clone(),
            geotransform: bundle.meta.geotransform,
        }
    }

    pub fn schema(&self) -> Schema {
        Schema::for_sensor(&self.sensor)
    }

    fn ring_to_geo(&self, poly: &Polygon) -> Vec<[f64; 2]> {
        poly.points()
            .iter()
            .map(|p| {
                let (x, y) = self.geotransform.pixel_to_geo(p.y, p.x);
                [x, y]
            })
            .collect()
    }

    fn ring_to_pixel(&self, ring: &[[f64; 2]]) -> Result<Polygon> {
        ring.iter()
            .map(|&[x, y]| self.geotransform.geo_to_pixel(x, y).map(|(r, c)| Point::rc(r, c)))
            .collect::<Result<Vec<_>>>()
            .map(Polygon::new)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionProps {
    pub id: u32,
    pub class: ObjectClass,
    pub speed_kmh: Option<f64>,
    pub speed_err_kmh: Option<f64>,
    pub rainbow_len_px: Option<f64>,
    pub heading_deg: Option<f64>,
    pub heading_confidence: Option<HeadingConfidence>,
    pub timestamp: DateTime<Utc>,
    pub scene_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthProps {
    pub id: u32,
    pub class: ObjectClass,
    pub speed_kmh: f64,
    pub heading_deg: Option<f64>,
    pub timestamp: DateTime<Utc>,
    pub red_centroid_px: (f64, f64),
    pub blue_centroid_px: (f64, f64),
    pub body_length_px: f64,
    pub body_width_px: f64,
    pub blur_length_px: f64,
    pub out_of_frame: bool,
}

/// One polygon feature; `ring` is open and in geographic coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature<P> {
    pub ring: Vec<[f64; 2]>,
    pub properties: P,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile<P> {
    pub header: CollectionHeader,
    pub features: Vec<Feature<P>>,
}

pub type DetectionFile = FeatureFile<DetectionProps>;
pub type TruthFile = FeatureFile<TruthProps>;

#[derive(Serialize, Deserialize)]
struct GeometryJson {
    #[serde(rename = "type")]
    kind: String,
    coordinates: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct FeatureJson<P> {
    #[serde(rename = "type")]
    kind: String,
    geometry: GeometryJson,
    properties: P,
}

#[derive(Serialize)]
struct CollectionOut<'a, P> {
    #[serde(rename = "type")]
    kind: &'static str,
    #[serde(flatten)]
    header: &'a CollectionHeader,
    features: Vec<FeatureJson<&'a P>>,
}

#[derive(Deserialize)]
struct CollectionIn {
    #[serde(rename = "type")]
    kind: String,
    #[serde(flatten)]
    header: CollectionHeader,
    features: Vec<serde_json::Value>,
}

impl<P: Serialize + DeserializeOwned> FeatureFile<P> {
    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let features = self
            .features
            .iter()
            .map(|f| {
                let mut ring = f.ring.clone();
                if let Some(&first) = ring.first() {
                    ring.push(first);
                }
                FeatureJson {
                    kind: "Feature".into(),
                    geometry: GeometryJson {
                        kind: "Polygon".into(),
                        coordinates: vec![ring],
                    },
                    properties: &f.properties,
                }
            })
            .collect();
        to_json_bytes(&CollectionOut {
            kind: "FeatureCollection",
            header: &self.header,
            features,
        })
    }

    /// Parses a collection; per-feature problems are reported with the
    /// feature's index.
    pub fn from_json_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        const WHAT: &str = "GeoJSON";
        let raw: CollectionIn = serde_json::from_slice(bytes).map_err(|e| format_err(path, WHAT, e.to_string()))?;
        if raw.kind != "FeatureCollection" {
            return Err(format_err(
                path,
                WHAT,
                format!("type is `{}`, expected `FeatureCollection`", raw.kind),
            ));
        }
        let mut problems = Vec::new();
        let mut features = Vec::with_capacity(raw.features.len());
        for (i, value) in raw.features.into_iter().enumerate() {
            match serde_json::from_value::<FeatureJson<P>>(value) {
                Err(e) => problems.push(format!("features[{i}]: {e}")),
                Ok(f) if f.kind != "Feature" => problems.push(format!("features[{i}]: type is `{}`", f.kind)),
                Ok(f) if f.geometry.kind != "Polygon" || f.geometry.coordinates.len() != 1 => {
                    problems.push(format!("features[{i}].geometry: expected a Polygon with one ring"))
                }
                Ok(mut f) => {
                    let mut ring = f.geometry.coordinates.swap_remove(0);
                    if ring.len() > 1 && ring.first() == ring.last() {
                        ring.pop();
                    }
                    features.push(Feature {
                        ring,
                        properties: f.properties,
                    });
                }
            }
        }
        if !problems.is_empty() {
            return Err(format_err(path, WHAT, problems.join("; ")));
        }
        raw.header
            .sensor
            .validate()
            .and_then(|_| raw.header.geotransform.validate())
            .map_err(|e| format_err(path, WHAT, e.to_string()))?;
        Ok(FeatureFile {
            header: raw.header,
            features,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_json_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json_bytes(&read_file(path)?, path)
    }
}

impl DetectionFile {
    pub fn from_detections(header: CollectionHeader, detections: &[Detection]) -> Self {
        let features = detections
            .iter()
            .map(|d| Feature {
                ring: header.ring_to_geo(&d.footprint),
                properties: DetectionProps {
                    id: d.id,
                    class: d.class,
                    speed_kmh: d.velocity.as_ref().map(|v| v.speed.speed_kmh),
                    speed_err_kmh: d.velocity.as_ref().map(|v| v.speed.speed_err_kmh),
                    rainbow_len_px: d.velocity.as_ref().map(|v| v.speed.rainbow_len_px),
                    heading_deg: d.velocity.as_ref().map(|v| v.heading_deg),
                    heading_confidence: d.velocity.as_ref().map(|v| v.heading_confidence),
                    timestamp: d.timestamp,
                    scene_id: d.scene_id.clone(),
                },
            })
            .collect();
        FeatureFile { header, features }
    }

    /// Pixel-space detections; movers must carry every velocity field.
    pub fn to_detections(&self) -> Result<Vec<Detection>> {
        let mut out = Vec::with_capacity(self.features.len());
        for (i, f) in self.features.iter().enumerate() {
            let p = &f.properties;
            let velocity = match (
                p.speed_kmh,
                p.speed_err_kmh,
                p.rainbow_len_px,
                p.heading_deg,
                p.heading_confidence,
            ) {
                (
                    Some(speed_kmh),
                    Some(speed_err_kmh),
                    Some(rainbow_len_px),
                    Some(heading_deg),
                    Some(heading_confidence),
                ) => Some(VelocityVector {
                    speed: SpeedEstimate {
                        speed_kmh,
                        speed_err_kmh,
                        rainbow_len_px,
                    },
                    heading_deg,
                    heading_confidence,
                }),
                (None, None, None, None, None) => None,
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "features[{i}]: velocity fields must be all present or all null"
                    )))
                }
            };
            let d = Detection {
                id: p.id,
                class: p.class,
                footprint: self.header.ring_to_pixel(&f.ring)?,
                velocity,
                timestamp: p.timestamp,
                scene_id: p.scene_id.clone(),
            };
            if !d.is_consistent() {
                return Err(Error::InvalidInput(format!(
                    "features[{i}]: class {} {} a velocity",
                    d.class,
                    if d.class.is_moving() {
                        "requires"
                    } else {
                        "must not carry"
                    }
                )));
            }
            out.push(d);
        }
        Ok(out)
    }
}

impl TruthFile {
    pub fn from_truth(header: CollectionHeader, truth: &GroundTruthSet) -> Self {
        let features = truth
            .records
            .iter()
            .map(|t| Feature {
                ring: header.ring_to_geo(&t.footprint),
                properties: TruthProps {
                    id: t.id,
                    class: t.class,
                    speed_kmh: t.speed_kmh,
                    heading_deg: t.heading_deg,
                    timestamp: t.timestamp,
                    red_centroid_px: t.red_centroid_px,
                    blue_centroid_px: t.blue_centroid_px,
                    body_length_px: t.body_length_px,
                    body_width_px: t.body_width_px,
                    blur_length_px: t.blur_length_px,
                    out_of_frame: t.out_of_frame,
                },
            })
            .collect();
        FeatureFile { header, features }
    }

    pub fn to_truth(&self) -> Result<GroundTruthSet> {
        let records = self
            .features
            .iter()
            .map(|f| {
                let p = &f.properties;
                Ok(TruthRecord {
                    id: p.id,
                    class: p.class,
                    footprint: self.header.ring_to_pixel(&f.ring)?,
                    speed_kmh: p.speed_kmh,
                    heading_deg: p.heading_deg,
                    timestamp: p.timestamp,
                    red_centroid_px: p.red_centroid_px,
                    blue_centroid_px: p.blue_centroid_px,
                    body_length_px: p.body_length_px,
                    body_width_px: p.body_width_px,
                    blur_length_px: p.blur_length_px,
                    out_of_frame: p.out_of_frame,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GroundTruthSet {
            scene_id: self.header.scene_id.clone(),
            timestamp: self.header.timestamp,
            width_px: self.header.width_px,
            height_px: self.header.height_px,
            records,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSidecar {
    /// Label of each PNG channel, in channel order.
    pub labels: Vec<String>,
}

pub fn mask_sidecar_path(png: &Path) -> PathBuf {
    png.with_extension("json")
}

/// Stores up to four planes as the channels of one PNG (gray, gray+alpha,
/// RGB, RGBA) with the labels in a JSON sidecar next to it.
pub fn write_mask(mask: &ProbMask, png: &Path) -> Result<()> {
    let color = match mask.planes().len() {
        1 => ColorType::L8,
        2 => ColorType::La8,
        3 => ColorType::Rgb8,
        4 => ColorType::Rgba8,
        n => return Err(Error::InvalidInput(format!("a mask PNG holds 1 to 4 planes, got {n}"))),
    };
    let planes: Vec<&Grid<u8>> = mask.planes().iter().collect();
    let bytes = encode_png(mask.width(), mask.height(), color, &interleave(&planes))?;
    write_atomic(png, &bytes)?;
    write_json(
        &MaskSidecar {
            labels: mask.labels().to_vec(),
        },
        &mask_sidecar_path(png),
    )
}

/// Reads a mask PNG. Labels come from the sidecar if present, otherwise from
/// `default_labels`; the channel count must match the label count.
pub fn read_mask(png: &Path, default_labels: &[String]) -> Result<ProbMask> {
    let sidecar = mask_sidecar_path(png);
    let labels = if sidecar.exists() {
        read_json::<MaskSidecar>(&sidecar, "mask sidecar")?.labels
    } else {
        default_labels.to_vec()
    };
    let img = decode_png(png)?;
    let channels = match img.color() {
        ColorType::L8 => 1,
        ColorType::La8 => 2,
        ColorType::Rgb8 => 3,
        ColorType::Rgba8 => 4,
        other => return Err(format_err(png, "mask PNG", format!("unsupported pixel type {other:?}"))),
    };
    if channels != labels.len() {
        return Err(format_err(
            png,
            "mask PNG",
            format!("{channels} channel(s) but {} label(s) {:?}", labels.len(), labels),
        ));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let planes = deinterleave(w, h, channels, img.as_bytes());
    ProbMask::new(labels, planes).map_err(|e| format_err(png, "mask PNG", e.to_string()))
}
