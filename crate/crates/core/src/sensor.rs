//! Imaging geometry and band timing of sequential-band sensors.
//!
//! A push-frame sensor images the same ground point with each band at a
//! slightly different time, so a moving object lands at a different place in
//! every band. The distance between its red and blue images (the rainbow
//! length, in pixels) converts to ground speed through the ground sample
//! distance and the red/blue capture delay:
//!
//! ```text
//! speed [km/h] = 3.6 * gsd_m * d_pix / (delta_rb_ms / 1000)
//! ```
//!
//! Coefficients are evaluated exactly. For the built-in presets that is
//! 3.2143 km/h per pixel (skysat preset, 0.5 m / 560 ms) and 13.5 km/h per pixel
//! (superdove preset, 3 m / 800 ms).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SPEED_REL_ERROR: f64 = 0.30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Red,
    Green,
    Blue,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::Red, Band::Green, Band::Blue];

    pub fn index(self) -> usize {
        match self {
            Band::Red => 0,
            Band::Green => 1,
            Band::Blue => 2,
        }
    }
}

/// Capture time of each band in milliseconds, relative to the first band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandOffsets {
    pub red: f64,
    pub green: f64,
    pub blue: f64,
}

impl BandOffsets {
    /// Red, green and blue captured in that order at even spacing.
    pub fn sequential(delta_rb_ms: f64) -> Self {
        BandOffsets {
            red: 0.0,
            green: delta_rb_ms / 2.0,
            blue: delta_rb_ms,
        }
    }

    pub fn get(&self, band: Band) -> f64 {
        match band {
            Band::Red => self.red,
            Band::Green => self.green,
            Band::Blue => self.blue,
        }
    }

    fn earliest(&self) -> f64 {
        self.red.min(self.green).min(self.blue)
    }
}

fn default_rel_error() -> f64 {
    DEFAULT_SPEED_REL_ERROR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub name: String,
    pub gsd_m: f64,
    pub band_time_offsets_ms: BandOffsets,
    #[serde(default = "default_rel_error")]
    pub speed_rel_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    pub speed_kmh: f64,
    pub speed_err_kmh: f64,
    pub rainbow_len_px: f64,
}

impl SensorModel {
    pub fn new(name: impl Into<String>, gsd_m: f64, offsets: BandOffsets) -> Result<Self> {
        let sensor = SensorModel {
            name: name.into(),
            gsd_m,
            band_time_offsets_ms: offsets,
            speed_rel_error: DEFAULT_SPEED_REL_ERROR,
        };
        sensor.validate()?;
        Ok(sensor)
    }

    /// 0.5 m pixels, 560 ms between red and blue.
    pub fn skysat() -> Self {
        SensorModel {
            name: "skysat".into(),
            gsd_m: 0.5,
            band_time_offsets_ms: BandOffsets::sequential(560.0),
            speed_rel_error: DEFAULT_SPEED_REL_ERROR,
        }
    }

    /// 3 m pixels, 800 ms between red and blue.
    pub fn superdove() -> Self {
        SensorModel {
            name: "superdove".into(),
            gsd_m: 3.0,
            band_time_offsets_ms: BandOffsets::sequential(800.0),
            speed_rel_error: DEFAULT_SPEED_REL_ERROR,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "skysat" => Ok(Self::skysat()),
            "superdove" | "planetscope" => Ok(Self::superdove()),
            other => Err(Error::Config(format!(
                "unknown sensor preset `{other}` (expected `skysat` or `superdove`)"
            ))),
        }
    }

    /// Checks the structural invariants. A sensor that passes may still be
    /// unusable for velocity inference if its red and blue bands coincide.
    pub fn validate(&self) -> Result<()> {
        if !(self.gsd_m.is_finite() && self.gsd_m > 0.0) {
            return Err(Error::field("gsd_m", "must be a positive number of meters"));
        }
        let o = &self.band_time_offsets_ms;
        for (field, v) in [("red", o.red), ("green", o.green), ("blue", o.blue)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::field(
                    format!("band_time_offsets_ms.{field}"),
                    "must be a non-negative number of milliseconds",
                ));
            }
        }
        if o.red == o.green && o.green == o.blue {
            return Err(Error::field(
                "band_time_offsets_ms",
                "all bands share one capture time; no rainbow can form",
            ));
        }
        if !(self.speed_rel_error.is_finite() && self.speed_rel_error >= 0.0) {
            return Err(Error::field("speed_rel_error", "must be a non-negative fraction"));
        }
        Ok(())
    }

    pub fn delta_rb_ms(&self) -> f64 {
        (self.band_time_offsets_ms.blue - self.band_time_offsets_ms.red).abs()
    }

    fn usable_delta_rb_s(&self) -> Result<f64> {
        let delta = self.delta_rb_ms();
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::DegenerateSensor(self.name.clone()));
        }
        Ok(delta / 1000.0)
    }

    /// km/h represented by one pixel of red-to-blue displacement.
    pub fn kmh_per_pixel(&self) -> Result<f64> {
        Ok(3.6 * self.gsd_m / self.usable_delta_rb_s()?)
    }

    pub fn speed_from_rainbow(&self, d_pix: f64) -> Result<SpeedEstimate> {
        if !(d_pix.is_finite() && d_pix >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "rainbow length must be a non-negative pixel count, got {d_pix}"
            )));
        }
        let speed_kmh = 3.6 * (self.gsd_m * d_pix) / self.usable_delta_rb_s()?;
        Ok(SpeedEstimate {
            speed_kmh,
            speed_err_kmh: self.speed_rel_error * speed_kmh,
            rainbow_len_px: d_pix,
        })
    }

    pub fn rainbow_from_speed(&self, speed_kmh: f64) -> Result<f64> {
        if !(speed_kmh.is_finite() && speed_kmh >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "speed must be a non-negative km/h value, got {speed_kmh}"
            )));
        }
        let delta_s = self.usable_delta_rb_s()?;
        Ok(speed_kmh / 3.6 * delta_s / self.gsd_m)
    }

    /// Displacement (in pixels) of a band's image relative to the earliest
    /// band, for an object moving at `speed_kmh`.
    pub fn band_displacement_px(&self, band: Band, speed_kmh: f64) -> Result<f64> {
        let per_ms = self.rainbow_from_speed(speed_kmh)? / self.delta_rb_ms();
        let o = &self.band_time_offsets_ms;
        Ok(per_ms * (o.get(band) - o.earliest()))
    }
}
