//! Acceptance gate: prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Tolerances are fixed here.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use vehvec::detection::{Detection, HeadingConfidence, ObjectClass, Schema, VelocityVector};
use vehvec::detector::{detect, DetectorConfig};
use vehvec::eval::{match_greedy, Counts, EvalReport, MatchConfig, Scored};
use vehvec::geometry::{iou, Point, Polygon};
use vehvec::mask::{fit_ellipse, Component};
use vehvec::sensor::{SensorModel, SpeedEstimate};
use vehvec::synth::{random_scene, render_scene, RandomSceneConfig};
use vehvec::timeseries::{aggregate, circular_mean, volume_anomaly, HistogramSpec, SceneDetections};
use vehvec::vectorize::angle_diff_deg;

const FORMULA_REL_TOL: f64 = 1e-9;
const MOVERS_PER_PRESET: usize = 100;
const SPEED_REL_TOL: f64 = 0.30;
const SPEED_PASS_FRAC: f64 = 0.90;
const HEADING_TOL_DEG: f64 = 10.0;
const HEADING_PASS_FRAC: f64 = 0.95;
const ROUND_TRIP_MAX_SECS: f64 = 60.0;
/// Truth and detection centers further apart than this are not the same vehicle.
const MATCH_RADIUS_PX: f64 = 4.0;
const MIN_SNR: f64 = 5.0;
const COUNT_SCENES: u64 = 20;
const COUNT_VEHICLES: usize = 30;
const COUNT_FRAC_BAND: (f64, f64) = (0.8, 1.2);
const CLOUD_SEEDS: u64 = 20;
const CLOUDS_PER_SCENE: usize = 5;
const ORACLE_INSTANCES: usize = 500;
const ORACLE_MAX_SET: usize = 6;
const MOMENT_ABS_TOL: f64 = 1e-9;
const ANALYTIC_REL_TOL: f64 = 0.05;
const ROTATION_TOL_DEG: f64 = 1e-9;
const SERIES_DAYS: i64 = 60;
const STEP_DAY: i64 = 40;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: u32, name: &str, o: &Outcome) {
    println!(
        "{} criterion {n} ({name}): {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
}

fn speed_formula() -> Outcome {
    let dove = SensorModel::superdove().speed_from_rainbow(4.0).unwrap();
    let mps = dove.speed_kmh / 3.6;
    let coeff = SensorModel::skysat().kmh_per_pixel().unwrap();
    let expected_coeff = 3.6 * 0.5 / 0.560;
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let pass = rel(dove.speed_kmh, 54.0) <= FORMULA_REL_TOL
        && rel(mps, 15.0) <= FORMULA_REL_TOL
        && rel(coeff, expected_coeff) <= FORMULA_REL_TOL
        && format!("{coeff:.3}") == "3.214";
    Outcome {
        pass,
        detail: format!(
            "4 px at 3 m / 800 ms = {:.12} km/h ({mps:.12} m/s); 0.5 m / 560 ms = {coeff:.6} km/h/px",
            dove.speed_kmh
        ),
    }
}

fn mover_center(r: &vehvec::synth::TruthRecord) -> (f64, f64) {
    (
        (r.red_centroid_px.0 + r.blue_centroid_px.0) / 2.0,
        (r.red_centroid_px.1 + r.blue_centroid_px.1) / 2.0,
    )
}

fn velocity_round_trip() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let mut lines = Vec::new();
    let (mut total, mut speed_ok, mut heading_ok) = (0usize, 0usize, 0usize);
    let mut snr_ok = true;
    pool.install(|| {
        for (k, sensor) in [SensorModel::skysat(), SensorModel::superdove()]
            .into_iter()
            .enumerate()
        {
            let cfg = DetectorConfig::for_sensor(&sensor);
            let per_scene = 25;
            let (mut n, mut s_ok, mut h_ok) = (0, 0, 0);
            for scene in 0..(MOVERS_PER_PRESET / per_scene) as u64 {
                let mut rc = RandomSceneConfig::for_sensor(sensor.clone(), per_scene, 200 + 10 * k as u64 + scene);
                rc.static_fraction = 0.0;
                snr_ok &= rc.snr() >= MIN_SNR;
                let (raster, truth) = render_scene(&random_scene(&rc).unwrap()).unwrap();
                let found = detect(&raster, &cfg).unwrap();
                let mut used = vec![false; found.detections.len()];
                for r in truth.records.iter().filter(|r| r.class.is_moving()) {
                    n += 1;
                    let (row, col) = mover_center(r);
                    let best = found
                        .detections
                        .iter()
                        .enumerate()
                        .filter(|(i, d)| !used[*i] && d.velocity.is_some())
                        .map(|(i, d)| {
                            let c = d.footprint.centroid().unwrap();
                            (i, (c.y - row).hypot(c.x - col))
                        })
                        .filter(|&(_, dist)| dist <= MATCH_RADIUS_PX)
                        .min_by(|a, b| a.1.total_cmp(&b.1));
                    let Some((i, _)) = best else { continue };
                    used[i] = true;
                    let v = found.detections[i].velocity.unwrap();
                    if ((v.speed.speed_kmh - r.speed_kmh) / r.speed_kmh).abs() <= SPEED_REL_TOL {
                        s_ok += 1;
                    }
                    if v.heading_confidence == HeadingConfidence::Resolved
                        && angle_diff_deg(v.heading_deg, r.heading_deg.unwrap()) <= HEADING_TOL_DEG
                    {
                        h_ok += 1;
                    }
                }
            }
            lines.push(format!("{}: {s_ok}/{n} speed, {h_ok}/{n} heading", sensor.name));
            total += n;
            speed_ok += s_ok;
            heading_ok += h_ok;
        }
    });
    let secs = start.elapsed().as_secs_f64();
    let sf = speed_ok as f64 / total as f64;
    let hf = heading_ok as f64 / total as f64;
    Outcome {
        pass: total == 2 * MOVERS_PER_PRESET
            && snr_ok
            && sf >= SPEED_PASS_FRAC
            && hf >= HEADING_PASS_FRAC
            && secs < ROUND_TRIP_MAX_SECS,
        detail: format!(
            "{total} movers, speed within 30% {:.1}%, heading within 10 deg {:.1}% ({}), {secs:.1} s on one thread",
            100.0 * sf,
            100.0 * hf,
            lines.join("; ")
        ),
    }
}

fn count_fraction() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for sensor in [SensorModel::skysat(), SensorModel::superdove()] {
        let schema = Schema::for_sensor(&sensor);
        let cfg = DetectorConfig::for_sensor(&sensor);
        let reports: Vec<EvalReport> = (0..COUNT_SCENES)
            .into_par_iter()
            .map(|seed| {
                let rc = RandomSceneConfig::for_sensor(sensor.clone(), COUNT_VEHICLES, 3000 + seed);
                let (raster, truth) = render_scene(&random_scene(&rc).unwrap()).unwrap();
                let found = detect(&raster, &cfg).unwrap();
                EvalReport::for_scene(&found.detections, &truth, schema, &MatchConfig::default())
            })
            .collect();
        let mut merged = EvalReport::empty(MatchConfig::default().iou_thresh);
        reports.into_iter().for_each(|r| merged.merge(r));
        for class in schema.classes() {
            let c = merged.counts.get(&class).copied().unwrap_or_default();
            let frac = c.count_frac();
            let ok = frac.is_some_and(|f| f >= COUNT_FRAC_BAND.0 && f <= COUNT_FRAC_BAND.1);
            pass &= ok;
            parts.push(format!(
                "{}/{class} {} ({}/{})",
                sensor.name,
                frac.map_or("undefined".into(), |f| format!("{f:.3}")),
                c.n_pred,
                c.n_gt
            ));
        }
    }
    let arithmetic = vehvec::eval::count_fraction(465, 449).unwrap();
    let arith_ok = arithmetic == 465.0 / 449.0;
    Outcome {
        pass: pass && arith_ok,
        detail: format!(
            "{COUNT_SCENES} scenes per preset: {}; 465/449 = {arithmetic:.4}",
            parts.join(", ")
        ),
    }
}

fn cloud_rejection() -> Outcome {
    let mut parts = Vec::new();
    let mut total = 0;
    for sensor in [SensorModel::skysat(), SensorModel::superdove()] {
        let cfg = DetectorConfig::for_sensor(&sensor);
        let movers: usize = (0..CLOUD_SEEDS)
            .into_par_iter()
            .map(|seed| {
                let mut rc = RandomSceneConfig::for_sensor(sensor.clone(), 0, 5000 + seed);
                rc.n_clouds = CLOUDS_PER_SCENE;
                let spec = random_scene(&rc).unwrap();
                assert!(spec.vehicles.is_empty() && !spec.clouds.is_empty());
                let (raster, _) = render_scene(&spec).unwrap();
                detect(&raster, &cfg)
                    .unwrap()
                    .detections
                    .iter()
                    .filter(|d| d.class.is_moving())
                    .count()
            })
            .sum();
        total += movers;
        parts.push(format!("{}: {movers}", sensor.name));
    }
    Outcome {
        pass: total == 0,
        detail: format!(
            "moving detections in {CLOUD_SEEDS} clouds-only scenes per preset: {}",
            parts.join(", ")
        ),
    }
}

/// Best one-to-one same-class matching by (pair count, total IOU), found by
/// enumerating every assignment.
fn brute_force(pred: &[Scored], gt: &[Scored], thresh: f64) -> (usize, f64) {
    fn go(i: usize, pred: &[Scored], gt: &[Scored], used: &mut [bool], thresh: f64) -> (usize, f64) {
        if i == pred.len() {
            return (0, 0.0);
        }
        let mut best = go(i + 1, pred, gt, used, thresh);
        for j in 0..gt.len() {
            if used[j] || gt[j].class != pred[i].class {
                continue;
            }
            let v = iou(&pred[i].footprint, &gt[j].footprint);
            if v < thresh {
                continue;
            }
            used[j] = true;
            let (n, s) = go(i + 1, pred, gt, used, thresh);
            used[j] = false;
            if (n + 1, s + v) > best {
                best = (n + 1, s + v);
            }
        }
        best
    }
    go(0, pred, gt, &mut vec![false; gt.len()], thresh)
}

fn random_set(rng: &mut ChaCha8Rng) -> Vec<Scored> {
    let n = rng.random_range(0..=ORACLE_MAX_SET);
    (0..n)
        .map(|i| {
            let (x, y) = (rng.random_range(0.0..6.0), rng.random_range(0.0..6.0));
            let (w, h) = (rng.random_range(0.5..3.0), rng.random_range(0.5..3.0));
            Scored {
                id: i as u32 + 1,
                class: if rng.random_bool(0.5) {
                    ObjectClass::MovingCar
                } else {
                    ObjectClass::StaticCar
                },
                footprint: Polygon::rect(x, y, x + w, y + h),
            }
        })
        .collect()
}

fn identities_hold(c: &Counts) -> bool {
    let (tp, np, ng) = (c.tp as f64, c.n_pred as f64, c.n_gt as f64);
    let exact = |v: f64, num: f64, den: f64| if den == 0.0 { v == 0.0 } else { v == num / den };
    let (p, r) = (c.precision(), c.recall());
    let harmonic = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    c.tp <= c.n_pred.min(c.n_gt)
        && exact(p, tp, np)
        && exact(r, tp, ng)
        && exact(c.f1(), 2.0 * tp, np + ng)
        && (c.f1() - harmonic).abs() <= 4.0 * f64::EPSILON
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let cfg = MatchConfig::default();
    let (mut mismatches, mut identity_failures) = (0, 0);
    let mut example = None;
    for _ in 0..ORACLE_INSTANCES {
        let pred = random_set(&mut rng);
        let gt = random_set(&mut rng);
        let greedy = match_greedy(&pred, &gt, &cfg).len();
        let (best, _) = brute_force(&pred, &gt, cfg.iou_thresh);
        if greedy != best {
            mismatches += 1;
            example.get_or_insert((greedy, best));
        }
        let r = EvalReport::score(&pred, &gt, &cfg);
        identity_failures += r.counts.values().filter(|c| !identities_hold(c)).count();
    }
    let half = iou(&Polygon::rect(0.0, 0.0, 1.0, 1.0), &Polygon::rect(0.5, 0.0, 1.5, 1.0));
    Outcome {
        pass: mismatches == 0 && identity_failures == 0 && half == 1.0 / 3.0,
        detail: format!(
            "greedy count differs from optimal in {mismatches}/{ORACLE_INSTANCES} instances{}; identity failures {identity_failures}; IOU of half-overlapping unit squares {half:?}",
            example.map_or(String::new(), |(g, b)| format!(" (first: greedy {g}, optimal {b})"))
        ),
    }
}

/// Axes and compass orientation from raw second moments, computed directly.
fn brute_moments(pixels: &[(usize, usize)]) -> (f64, f64, f64) {
    let n = pixels.len() as f64;
    let mr = pixels.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let mc = pixels.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let mut srr = 0.0;
    let mut scc = 0.0;
    let mut src = 0.0;
    for &(r, c) in pixels {
        let (dr, dc) = (r as f64 - mr, c as f64 - mc);
        srr += dr * dr;
        scc += dc * dc;
        src += dr * dc;
    }
    // Each pixel is a unit square, not a point.
    let (srr, scc, src) = (srr / n + 1.0 / 12.0, scc / n + 1.0 / 12.0, src / n);
    let half_tr = (srr + scc) / 2.0;
    let disc = (((srr - scc) / 2.0).powi(2) + src * src).sqrt();
    let (l1, l2) = (half_tr + disc, (half_tr - disc).max(0.0));
    // Major-axis direction (drow, dcol), then compass angle mod 180.
    let theta = 0.5 * (2.0 * src).atan2(srr - scc);
    let (drow, dcol) = (theta.cos(), theta.sin());
    let compass = dcol.atan2(-drow).to_degrees().rem_euclid(180.0);
    (2.0 * l1.sqrt(), 2.0 * l2.sqrt(), compass)
}

fn raster_rect(center: (f64, f64), compass_deg: f64, len: f64, wid: f64) -> Vec<(usize, usize)> {
    let t = compass_deg.to_radians();
    let (ar, ac) = (-t.cos(), t.sin());
    let mut out = Vec::new();
    for r in 0..200usize {
        for c in 0..200usize {
            let (dr, dc) = (r as f64 - center.0, c as f64 - center.1);
            let along = dr * ar + dc * ac;
            let across = -dr * ac + dc * ar;
            if along.abs() <= len / 2.0 && across.abs() <= wid / 2.0 {
                out.push((r, c));
            }
        }
    }
    out
}

fn orientation_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d).abs()
}

/// Name, pixels, analytic semi-axes and analytic orientation if defined.
type Shape = (String, Vec<(usize, usize)>, f64, f64, Option<f64>);

fn ellipse_oracle() -> Outcome {
    let mut cases: Vec<Shape> = Vec::new();
    for n in [5usize, 20, 60] {
        let bar: Vec<_> = (0..n).map(|c| (10, c)).collect();
        let a = 2.0 * ((n * n) as f64 / 12.0).sqrt();
        cases.push((format!("bar {n}"), bar, a, 2.0 / 12f64.sqrt(), Some(90.0)));
    }
    for r in [6.0f64, 12.0, 25.0] {
        let disk: Vec<_> = (0..80usize)
            .flat_map(|row| (0..80usize).map(move |col| (row, col)))
            .filter(|&(row, col)| (row as f64 - 40.0).hypot(col as f64 - 40.0) <= r)
            .collect();
        cases.push((format!("disk r{r}"), disk, r, r, None));
    }
    for angle in [0.0f64, 20.0, 45.0, 75.0, 110.0, 160.0] {
        let (len, wid) = (60.0, 14.0);
        // Centered on a pixel corner so axis-aligned edges fall between pixel centers.
        let px = raster_rect((100.5, 100.5), angle, len, wid);
        cases.push((
            format!("rect {angle}"),
            px,
            len / 3f64.sqrt(),
            wid / 3f64.sqrt(),
            Some(angle),
        ));
    }
    let mut worst_moment = 0.0f64;
    let mut worst_axis = 0.0f64;
    let mut worst_angle = 0.0f64;
    let mut worst_rotation = 0.0f64;
    for (_, pixels, a, b, orient) in &cases {
        let e = fit_ellipse(&Component::from_pixels("x", pixels.clone())).unwrap();
        let (ba, bb, bo) = brute_moments(pixels);
        worst_moment = worst_moment
            .max((e.semi_major_px - ba).abs())
            .max((e.semi_minor_px - bb).abs());
        if e.semi_major_px - e.semi_minor_px > 1e-6 {
            worst_moment = worst_moment.max(orientation_gap(e.orientation_deg, bo));
        }
        worst_axis = worst_axis
            .max((e.semi_major_px - a).abs() / a)
            .max((e.semi_minor_px - b).abs() / b);
        if let Some(o) = orient {
            worst_angle = worst_angle.max(orientation_gap(e.orientation_deg, *o) / 90.0);
        }
        if e.semi_major_px - e.semi_minor_px > 1e-3 {
            let side = pixels.iter().map(|p| p.0.max(p.1)).max().unwrap();
            let turned: Vec<_> = pixels.iter().map(|&(r, c)| (c, side - r)).collect();
            let t = fit_ellipse(&Component::from_pixels("x", turned)).unwrap();
            worst_rotation = worst_rotation.max(orientation_gap(t.orientation_deg, e.orientation_deg + 90.0));
        }
    }
    Outcome {
        pass: worst_moment <= MOMENT_ABS_TOL
            && worst_axis <= ANALYTIC_REL_TOL
            && worst_angle <= ANALYTIC_REL_TOL
            && worst_rotation <= ROTATION_TOL_DEG,
        detail: format!(
            "{} shapes: max moment gap {worst_moment:.2e}, max axis error {:.2}%, max orientation error {:.2}% of 90 deg, max quarter-turn gap {worst_rotation:.2e} deg",
            cases.len(),
            100.0 * worst_axis,
            100.0 * worst_angle
        ),
    }
}

fn series_detection(id: u32, day: i64, heading: f64) -> Detection {
    let when = Utc.with_ymd_and_hms(2024, 3, 1, 8, 30, 0).unwrap() + Duration::days(day);
    Detection {
        id,
        class: ObjectClass::MovingCar,
        footprint: Polygon::ellipse(Point::rc(10.0, 10.0), Point::new(1.0, 0.0), 3.0, 1.0, 16),
        velocity: Some(VelocityVector {
            speed: SpeedEstimate {
                speed_kmh: 60.0,
                speed_err_kmh: 18.0,
                rainbow_len_px: 2.0,
            },
            heading_deg: heading,
            heading_confidence: HeadingConfidence::Resolved,
        }),
        timestamp: when,
        scene_id: format!("day-{day:02}"),
    }
}

fn time_series() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut shift_worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..12);
        let spread = rng.random_range(10.0..150.0);
        let base = rng.random_range(0.0..360.0);
        let hs: Vec<f64> = (0..n).map(|_| (base + rng.random_range(0.0..spread)) % 360.0).collect();
        let delta = rng.random_range(0.0..360.0);
        let a = circular_mean(&hs).unwrap();
        let shifted: Vec<f64> = hs.iter().map(|h| (h + delta) % 360.0).collect();
        let b = circular_mean(&shifted).unwrap();
        shift_worst = shift_worst.max(angle_diff_deg(
            b.mean_deg.unwrap(),
            (a.mean_deg.unwrap() + delta) % 360.0,
        ));
    }
    let antipodal_undefined = (0..36).all(|k| {
        let t = k as f64 * 10.0;
        circular_mean(&[t, t + 180.0]).unwrap().mean_deg.is_none()
    });
    let scenes: Vec<SceneDetections> = (0..SERIES_DAYS)
        .map(|day| {
            let level = if day < STEP_DAY { 100 } else { 20 } + (day % 3) as u32;
            let dets: Vec<Detection> = (0..level)
                .map(|i| series_detection(i + 1, day, (i * 37 % 360) as f64))
                .collect();
            SceneDetections {
                scene_id: format!("day-{day:02}"),
                timestamp: dets[0].timestamp,
                detections: dets,
            }
        })
        .collect();
    let table = aggregate(&scenes, &HistogramSpec::default()).unwrap();
    let flags = volume_anomaly(&table, 7, 3.0).unwrap();
    let flagged: Vec<usize> = flags.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| i).collect();
    Outcome {
        pass: shift_worst < 1e-9 && antipodal_undefined && flagged == vec![STEP_DAY as usize],
        detail: format!(
            "shift-equivariance worst gap {shift_worst:.1e} deg; antipodal pairs undefined: {antipodal_undefined}; flagged rows {flagged:?} of {}",
            table.rows.len()
        ),
    }
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, jobs: &str| {
        let out = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_vehvec"))
            .args([
                "pipeline",
                "--preset",
                "skysat",
                "--n-vehicles",
                "50",
                "--seed",
                "7",
                "--scenes",
                "2",
                "--jobs",
                jobs,
                "--out",
            ])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        (files_under(&out), status.stdout)
    };
    let (a, out_a) = run("a", "1");
    let (b, out_b) = run("b", "4");
    let kinds = |ext: &str| a.keys().filter(|p| p.extension().is_some_and(|e| e == ext)).count();
    let differing: Vec<_> = a
        .iter()
        .filter(|(k, v)| b.get(*k) != Some(v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    Outcome {
        pass: !a.is_empty()
            && a.len() == b.len()
            && differing.is_empty()
            && out_a == out_b
            && kinds("png") > 0
            && kinds("geojson") > 0
            && kinds("csv") > 0,
        detail: format!(
            "{} files ({} PNG, {} GeoJSON, {} CSV) compared across two runs with 1 and 4 threads; differing: {:?}",
            a.len(),
            kinds("png"),
            kinds("geojson"),
            kinds("csv"),
            differing
        ),
    }
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("speed formula", speed_formula),
        ("velocity round trip", velocity_round_trip),
        ("count fraction", count_fraction),
        ("cloud rejection", cloud_rejection),
        ("metric oracle", metric_oracle),
        ("ellipse oracle", ellipse_oracle),
        ("time series", time_series),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        report(i as u32 + 1, name, &o);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
