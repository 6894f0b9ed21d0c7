use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sensor::{Band, SensorModel};

/// GDAL-ordered affine transform from pixel-corner space to map coordinates:
/// `x = t0 + col * t1 + row * t2`, `y = t3 + col * t4 + row * t5`.
///
/// Pixel `(r, c)` has its center at corner-space `(r + 0.5, c + 0.5)`; the rest
/// of the crate addresses pixels by center, so `pixel_to_geo(0.0, 0.0)` is the
/// center of the top-left pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GeoTransform(pub [f64; 6]);

impl GeoTransform {
    /// North-up metric grid with its top-left corner at the origin.
    pub fn local_metric(gsd_m: f64) -> Self {
        GeoTransform([0.0, gsd_m, 0.0, 0.0, 0.0, -gsd_m])
    }

    pub fn pixel_to_geo(&self, row: f64, col: f64) -> (f64, f64) {
        let t = &self.0;
        let (r, c) = (row + 0.5, col + 0.5);
        (t[0] + c * t[1] + r * t[2], t[3] + c * t[4] + r * t[5])
    }

    pub fn geo_to_pixel(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let t = &self.0;
        let det = t[1] * t[5] - t[2] * t[4];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::field("geotransform", "affine part is singular"));
        }
        let (dx, dy) = (x - t[0], y - t[3]);
        let c = (t[5] * dx - t[2] * dy) / det;
        let r = (-t[4] * dx + t[1] * dy) / det;
        Ok((r - 0.5, c - 0.5))
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::field("geotransform", "values must be finite"));
        }
        self.geo_to_pixel(0.0, 0.0).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub scene_id: String,
    pub timestamp: DateTime<Utc>,
    pub geotransform: GeoTransform,
    pub sensor: SensorModel,
}

/// Three co-registered 8-bit planes plus the metadata needed to interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterBundle {
    pub meta: BundleMeta,
    planes: [Grid<u8>; 3],
}

impl RasterBundle {
    pub fn new(meta: BundleMeta, red: Grid<u8>, green: Grid<u8>, blue: Grid<u8>) -> Result<Self> {
        if !(red.same_shape(&green) && red.same_shape(&blue)) {
            return Err(Error::InvalidInput(format!(
                "band planes differ in size: red {}x{}, green {}x{}, blue {}x{}",
                red.width(),
                red.height(),
                green.width(),
                green.height(),
                blue.width(),
                blue.height()
            )));
        }
        if red.width() == 0 || red.height() == 0 {
            return Err(Error::InvalidInput("raster has no pixels".into()));
        }
        meta.sensor.validate()?;
        meta.geotransform.validate()?;
        Ok(RasterBundle {
            meta,
            planes: [red, green, blue],
        })
    }

    pub fn width(&self) -> usize {
        self.planes[0].width()
    }

    pub fn height(&self) -> usize {
        self.planes[0].height()
    }

    pub fn band(&self, band: Band) -> &Grid<u8> {
        &self.planes[band.index()]
    }

    pub fn band_f32(&self, band: Band) -> Grid<f32> {
        self.band(band).map(|&v| v as f32)
    }

    /// Per-pixel mean of the three bands.
    pub fn luminance(&self) -> Grid<f32> {
        let [r, g, b] = &self.planes;
        let data = r
            .as_slice()
            .iter()
            .zip(g.as_slice())
            .zip(b.as_slice())
            .map(|((&r, &g), &b)| (r as f32 + g as f32 + b as f32) / 3.0)
            .collect();
        Grid::from_vec(self.width(), self.height(), data)
    }

    pub fn contains(&self, row: f64, col: f64) -> bool {
        row >= -0.5 && col >= -0.5 && row < self.height() as f64 - 0.5 && col < self.width() as f64 - 0.5
    }
}
