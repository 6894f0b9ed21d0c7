//! Detection records and the class schemas shared by truth, masks and output.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Polygon;
use crate::sensor::{SensorModel, SpeedEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    StaticCar,
    MovingCar,
    MovingTruck,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 3] = [ObjectClass::StaticCar, ObjectClass::MovingCar, ObjectClass::MovingTruck];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectClass::StaticCar => "static_car",
            ObjectClass::MovingCar => "moving_car",
            ObjectClass::MovingTruck => "moving_truck",
        }
    }

    pub fn is_moving(self) -> bool {
        self != ObjectClass::StaticCar
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ObjectClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown class `{s}`")))
    }
}

/// Mask layout and class vocabulary of a sensor family.
///
/// High-resolution imagery separates static from moving cars. Medium
/// resolution cannot localize static cars, so its layers split moving cars
/// from moving trucks instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    Skysat,
    Planetscope,
}

impl Schema {
    pub fn for_sensor(sensor: &SensorModel) -> Schema {
        if sensor.gsd_m <= 1.0 {
            Schema::Skysat
        } else {
            Schema::Planetscope
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Schema::Skysat => "skysat",
            Schema::Planetscope => "planetscope",
        }
    }

    /// Classes in mask-plane order.
    pub fn classes(self) -> [ObjectClass; 2] {
        match self {
            Schema::Skysat => [ObjectClass::StaticCar, ObjectClass::MovingCar],
            Schema::Planetscope => [ObjectClass::MovingCar, ObjectClass::MovingTruck],
        }
    }

    pub fn labels(self) -> Vec<String> {
        self.classes().iter().map(|c| c.as_str().to_string()).collect()
    }

    /// Class a record is scored as under this schema, or `None` when the
    /// schema has no layer for it.
    pub fn scoring_class(self, class: ObjectClass) -> Option<ObjectClass> {
        match (self, class) {
            (Schema::Skysat, ObjectClass::MovingTruck) => Some(ObjectClass::MovingCar),
            (Schema::Planetscope, ObjectClass::StaticCar) => None,
            (_, c) => Some(c),
        }
    }
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skysat" => Ok(Schema::Skysat),
            "planetscope" => Ok(Schema::Planetscope),
            other => Err(Error::InvalidInput(format!("unknown schema `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadingConfidence {
    Resolved,
    Ambiguous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityVector {
    pub speed: SpeedEstimate,
    /// Compass degrees in `[0, 360)`.
    pub heading_deg: f64,
    pub heading_confidence: HeadingConfidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub id: u32,
    pub class: ObjectClass,
    /// Pixel-space outline (`x = col`, `y = row`).
    pub footprint: Polygon,
    pub velocity: Option<VelocityVector>,
    pub timestamp: DateTime<Utc>,
    pub scene_id: String,
}

impl Detection {
    /// Movers carry a velocity and static objects do not.
    pub fn is_consistent(&self) -> bool {
        self.class.is_moving() == self.velocity.is_some()
    }
}
