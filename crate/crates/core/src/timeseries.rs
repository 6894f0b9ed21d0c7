//! Daily aggregation of detections: counts per class, mean speed, circular
//! mean heading, histograms and a rolling volume-anomaly flag.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::detection::{Detection, HeadingConfidence, ObjectClass};
use crate::error::{Error, Result};

/// Below this resultant length the mean direction is undefined.
pub const MIN_RESULTANT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub speed_edges_kmh: Vec<f64>,
    pub heading_edges_deg: Vec<f64>,
}

fn even_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec {
            speed_edges_kmh: even_edges(0.0, 160.0, 16),
            heading_edges_deg: even_edges(0.0, 360.0, 24),
        }
    }
}

impl HistogramSpec {
    pub fn validate(&self) -> Result<()> {
        for (field, edges) in [
            ("speed_edges_kmh", &self.speed_edges_kmh),
            ("heading_edges_deg", &self.heading_edges_deg),
        ] {
            if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) || edges.iter().any(|e| !e.is_finite()) {
                return Err(Error::field(
                    field,
                    "need at least two strictly increasing finite edges",
                ));
            }
        }
        Ok(())
    }
}

/// Bin index of `v`; values outside the edges land in the end bins.
pub fn bin_index(edges: &[f64], v: f64) -> usize {
    let bins = edges.len() - 1;
    match edges.iter().rposition(|&e| e <= v) {
        None => 0,
        Some(i) => i.min(bins - 1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularMean {
    /// `None` when the resultant length is below [`MIN_RESULTANT`].
    pub mean_deg: Option<f64>,
    pub resultant_length: f64,
}

fn circular_from_sums(s: f64, c: f64, n: usize) -> CircularMean {
    let resultant_length = (s.hypot(c) / n as f64).min(1.0);
    let mean_deg =
        (resultant_length >= MIN_RESULTANT).then(|| crate::mask::normalize_deg(s.atan2(c).to_degrees(), 360.0));
    CircularMean {
        mean_deg,
        resultant_length,
    }
}

/// Direction of the mean unit vector of compass headings.
pub fn circular_mean(headings_deg: &[f64]) -> Result<CircularMean> {
    if headings_deg.is_empty() {
        return Err(Error::InvalidInput("circular mean of no headings".into()));
    }
    let (s, c) = headings_deg.iter().fold((0.0, 0.0), |(s, c), h| {
        let t = h.to_radians();
        (s + t.sin(), c + t.cos())
    });
    Ok(circular_from_sums(s, c, headings_deg.len()))
}

/// The detections of one scene. Scenes with no detections still count
/// towards their date.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneDetections {
    pub scene_id: String,
    pub timestamp: DateTime<Utc>,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub date: NaiveDate,
    pub scene_count: usize,
    pub counts: BTreeMap<ObjectClass, usize>,
    pub total: usize,
    /// Movers with a resolved heading.
    pub n_resolved: usize,
    pub mean_speed_kmh: Option<f64>,
    pub mean_heading_deg: Option<f64>,
    pub heading_resultant: Option<f64>,
    /// All movers, by speed.
    pub speed_hist: Vec<usize>,
    /// Resolved movers, by heading.
    pub heading_hist: Vec<usize>,
    pub anomaly: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTable {
    pub histograms: HistogramSpec,
    pub rows: Vec<SeriesRow>,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct DayAcc {
    scenes: BTreeSet<String>,
    counts: BTreeMap<ObjectClass, usize>,
    mover_speeds: Vec<f64>,
    resolved: Vec<(f64, f64)>,
}

/// Mergeable fold over scenes; partitions can be accumulated separately.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesAccumulator {
    spec: HistogramSpec,
    days: BTreeMap<NaiveDate, DayAcc>,
}

impl SeriesAccumulator {
    pub fn new(spec: HistogramSpec) -> Result<Self> {
        spec.validate()?;
        Ok(SeriesAccumulator {
            spec,
            days: BTreeMap::new(),
        })
    }

    pub fn add_scene(&mut self, scene: &SceneDetections) {
        self.days
            .entry(scene.timestamp.date_naive())
            .or_default()
            .scenes
            .insert(scene.scene_id.clone());
        for d in &scene.detections {
            self.add_detection(d);
        }
    }

    pub fn add_detection(&mut self, d: &Detection) {
        let day = self.days.entry(d.timestamp.date_naive()).or_default();
        day.scenes.insert(d.scene_id.clone());
        *day.counts.entry(d.class).or_default() += 1;
        if let Some(v) = &d.velocity {
            day.mover_speeds.push(v.speed.speed_kmh);
            if v.heading_confidence == HeadingConfidence::Resolved {
                day.resolved.push((v.speed.speed_kmh, v.heading_deg));
            }
        }
    }

    pub fn merge(&mut self, other: SeriesAccumulator) {
        for (date, acc) in other.days {
            let day = self.days.entry(date).or_default();
            day.scenes.extend(acc.scenes);
            for (class, n) in acc.counts {
                *day.counts.entry(class).or_default() += n;
            }
            day.mover_speeds.extend(acc.mover_speeds);
            day.resolved.extend(acc.resolved);
        }
    }

    pub fn finish(self) -> SeriesTable {
        let spec = self.spec;
        let rows = self
            .days
            .into_iter()
            .map(|(date, mut acc)| {
                // Sorting first makes every sum independent of input order.
                acc.mover_speeds.sort_by(f64::total_cmp);
                acc.resolved
                    .sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
                let n = acc.resolved.len();
                let mean_speed_kmh = (n > 0).then(|| acc.resolved.iter().map(|r| r.0).sum::<f64>() / n as f64);
                let circ = (n > 0).then(|| {
                    let (s, c) = acc.resolved.iter().fold((0.0, 0.0), |(s, c), r| {
                        let t = r.1.to_radians();
                        (s + t.sin(), c + t.cos())
                    });
                    circular_from_sums(s, c, n)
                });
                let mut speed_hist = vec![0; spec.speed_edges_kmh.len() - 1];
                for &s in &acc.mover_speeds {
                    speed_hist[bin_index(&spec.speed_edges_kmh, s)] += 1;
                }
                let mut heading_hist = vec![0; spec.heading_edges_deg.len() - 1];
                for r in &acc.resolved {
                    heading_hist[bin_index(&spec.heading_edges_deg, r.1)] += 1;
                }
                let mut counts: BTreeMap<ObjectClass, usize> = ObjectClass::ALL.iter().map(|&c| (c, 0)).collect();
                for (class, k) in acc.counts {
                    counts.insert(class, k);
                }
                SeriesRow {
                    date,
                    scene_count: acc.scenes.len(),
                    total: counts.values().sum(),
                    counts,
                    n_resolved: n,
                    mean_speed_kmh,
                    mean_heading_deg: circ.and_then(|c| c.mean_deg),
                    heading_resultant: circ.map(|c| c.resultant_length),
                    speed_hist,
                    heading_hist,
                    anomaly: false,
                }
            })
            .collect();
        SeriesTable { histograms: spec, rows }
    }
}

/// Groups scenes by UTC date.
pub fn aggregate(scenes: &[SceneDetections], spec: &HistogramSpec) -> Result<SeriesTable> {
    let mut acc = SeriesAccumulator::new(spec.clone())?;
    for s in scenes {
        acc.add_scene(s);
    }
    Ok(acc.finish())
}

/// Flags rows whose total deviates from the mean of the previous `window`
/// rows by at least `z_thresh` sample standard deviations. Dates without
/// scenes have no row and so never enter the statistics. A zero deviation is
/// never flagged; a nonzero one against a constant window always is.
pub fn volume_anomaly(table: &SeriesTable, window: usize, z_thresh: f64) -> Result<Vec<bool>> {
    if window < 3 {
        return Err(Error::field("window", format!("must be at least 3, got {window}")));
    }
    if !(z_thresh.is_finite() && z_thresh > 0.0) {
        return Err(Error::field("z", "must be positive"));
    }
    let totals: Vec<f64> = table.rows.iter().map(|r| r.total as f64).collect();
    if totals.len() <= window {
        log::warn!(
            "{} dated rows cannot fill a {window}-row window; no anomalies flagged",
            totals.len()
        );
        return Ok(vec![false; totals.len()]);
    }
    let mut flags = vec![false; totals.len()];
    for i in window..totals.len() {
        let prev = &totals[i - window..i];
        let mean = prev.iter().sum::<f64>() / window as f64;
        let var = prev.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (window - 1) as f64;
        let dev = (totals[i] - mean).abs();
        flags[i] = dev > 0.0 && dev >= z_thresh * var.sqrt();
    }
    Ok(flags)
}

impl SeriesTable {
    pub fn apply_anomalies(&mut self, flags: &[bool]) {
        for (row, &f) in self.rows.iter_mut().zip(flags) {
            row.anomaly = f;
        }
    }

    pub const CSV_HEADER: [&'static str; 11] = [
        "date",
        "scene_count",
        "static_car",
        "moving_car",
        "moving_truck",
        "total",
        "n_resolved",
        "mean_speed_kmh",
        "mean_heading_deg",
        "heading_resultant",
        "anomaly",
    ];

    /// One row per date; undefined means are empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::InvalidInput(format!("writing series CSV: {e}"));
        w.write_record(Self::CSV_HEADER).map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
        for r in &self.rows {
            w.write_record([
                r.date.to_string(),
                r.scene_count.to_string(),
                r.counts[&ObjectClass::StaticCar].to_string(),
                r.counts[&ObjectClass::MovingCar].to_string(),
                r.counts[&ObjectClass::MovingTruck].to_string(),
                r.total.to_string(),
                r.n_resolved.to_string(),
                opt(r.mean_speed_kmh),
                opt(r.mean_heading_deg),
                opt(r.heading_resultant),
                r.anomaly.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidInput(format!("writing series CSV: {e}")))?;
        Ok(())
    }

    /// Histogram totals over all dates: `(speed, heading)`.
    pub fn pooled_histograms(&self) -> (Vec<usize>, Vec<usize>) {
        let mut speed = vec![0; self.histograms.speed_edges_kmh.len() - 1];
        let mut heading = vec![0; self.histograms.heading_edges_deg.len() - 1];
        for r in &self.rows {
            speed.iter_mut().zip(&r.speed_hist).for_each(|(a, b)| *a += b);
            heading.iter_mut().zip(&r.heading_hist).for_each(|(a, b)| *a += b);
        }
        (speed, heading)
    }
}
