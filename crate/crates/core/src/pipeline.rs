//! Seeded end-to-end run: synthesize scenes, detect, score against truth and
//! aggregate the detections into a daily series.

use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::Schema;
use crate::detector::{detect, DetectorConfig, DetectorDiagnostics};
use crate::error::Result;
use crate::eval::{EvalReport, MatchConfig};
use crate::io::{self, CollectionHeader, DetectionFile, TruthFile};
use crate::plot;
use crate::sensor::SensorModel;
use crate::synth::{default_timestamp, random_scene, render_scene, RandomSceneConfig};
use crate::timeseries::{aggregate, volume_anomaly, HistogramSpec, SceneDetections, SeriesTable};

pub const DEFAULT_ANOMALY_WINDOW: usize = 7;
pub const DEFAULT_ANOMALY_Z: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub sensor: SensorModel,
    pub n_vehicles: usize,
    /// One scene per day starting at `start`.
    pub n_scenes: usize,
    pub n_clouds: usize,
    pub noise_sigma: Option<f64>,
    pub seed: u64,
    pub start: DateTime<Utc>,
    pub matching: MatchConfig,
    pub detector: DetectorConfig,
    pub histograms: HistogramSpec,
    pub anomaly_window: usize,
    pub anomaly_z: f64,
}

impl PipelineConfig {
    pub fn new(sensor: SensorModel, n_vehicles: usize, seed: u64) -> Self {
        PipelineConfig {
            detector: DetectorConfig::for_sensor(&sensor),
            sensor,
            n_vehicles,
            n_scenes: 1,
            n_clouds: 0,
            noise_sigma: None,
            seed,
            start: default_timestamp(),
            matching: MatchConfig::default(),
            histograms: HistogramSpec::default(),
            anomaly_window: DEFAULT_ANOMALY_WINDOW,
            anomaly_z: DEFAULT_ANOMALY_Z,
        }
    }

    /// Scene configs with per-scene seeds drawn from the run seed.
    pub fn scene_configs(&self) -> Vec<RandomSceneConfig> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.n_scenes)
            .map(|i| {
                let mut c = RandomSceneConfig::for_sensor(self.sensor.clone(), self.n_vehicles, rng.random());
                c.scene_id = format!("scene-{i:03}");
                c.timestamp = self.start + Duration::days(i as i64);
                c.n_clouds = self.n_clouds;
                if let Some(n) = self.noise_sigma {
                    c.noise_sigma = n;
                }
                c
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub scene_id: String,
    pub n_truth: usize,
    pub n_detections: usize,
    pub diagnostics: DetectorDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub report: EvalReport,
    pub series: SeriesTable,
    pub scenes: Vec<SceneSummary>,
}

/// Runs every scene (in parallel on the current rayon pool) and writes:
/// `scenes/<id>/` bundle, truth, detections and mask; `report.json`,
/// `report.txt`, `series.csv`, `series.json`, `scenes.json` and `plots/`.
pub fn run(cfg: &PipelineConfig, out: &Path) -> Result<PipelineSummary> {
    cfg.detector.validate()?;
    let schema = Schema::for_sensor(&cfg.sensor);
    let results: Vec<Result<(EvalReport, SceneDetections, SceneSummary)>> = cfg
        .scene_configs()
        .par_iter()
        .map(|sc| {
            let (bundle, truth) = render_scene(&random_scene(sc)?)?;
            let found = detect(&bundle, &cfg.detector)?;
            let dir = out.join("scenes").join(&sc.scene_id);
            io::write_bundle(&bundle, &dir)?;
            let header = CollectionHeader::for_bundle(&bundle);
            TruthFile::from_truth(header.clone(), &truth).write(&dir.join(io::TRUTH_FILE))?;
            DetectionFile::from_detections(header, &found.detections).write(&dir.join("detections.geojson"))?;
            io::write_mask(&found.mask, &dir.join("mask.png"))?;
            let report = EvalReport::for_scene(&found.detections, &truth, schema, &cfg.matching);
            log::info!(
                "{}: {} truth, {} detected",
                sc.scene_id,
                truth.records.len(),
                found.detections.len()
            );
            let summary = SceneSummary {
                scene_id: sc.scene_id.clone(),
                n_truth: truth.records.len(),
                n_detections: found.detections.len(),
                diagnostics: found.diagnostics,
            };
            let dets = SceneDetections {
                scene_id: sc.scene_id.clone(),
                timestamp: bundle.meta.timestamp,
                detections: found.detections,
            };
            Ok((report, dets, summary))
        })
        .collect();
    let mut report = EvalReport::empty(cfg.matching.iou_thresh);
    let mut scenes = Vec::new();
    let mut dets = Vec::new();
    for r in results {
        let (rep, d, s) = r?;
        report.merge(rep);
        dets.push(d);
        scenes.push(s);
    }
    let mut series = aggregate(&dets, &cfg.histograms)?;
    let flags = volume_anomaly(&series, cfg.anomaly_window, cfg.anomaly_z)?;
    series.apply_anomalies(&flags);

    io::write_json(&report.to_json(), &out.join("report.json"))?;
    io::write_atomic(&out.join("report.txt"), report.to_table().as_bytes())?;
    let mut csv = Vec::new();
    series.write_csv(&mut csv)?;
    io::write_atomic(&out.join("series.csv"), &csv)?;
    io::write_json(&series, &out.join("series.json"))?;
    io::write_json(&scenes, &out.join("scenes.json"))?;
    for (name, svg) in plot::series_plots(&series) {
        io::write_atomic(&out.join("plots").join(name), svg.as_bytes())?;
    }
    Ok(PipelineSummary { report, series, scenes })
}
