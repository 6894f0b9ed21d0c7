use std::path::Path;
use std::process::{Command, Output};

fn vehvec(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vehvec"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn synth_detect_eval_round() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(vehvec(
        &[
            "synth",
            "--preset",
            "skysat",
            "--n-vehicles",
            "9",
            "--seed",
            "2",
            "--out",
            "s"
        ],
        d
    )
    .status
    .success());
    for f in [
        "image.png",
        "bundle.json",
        "truth.geojson",
        "truth_mask.png",
        "scene.json",
    ] {
        assert!(d.join("s").join(f).exists(), "{f}");
    }
    let det = vehvec(&["detect", "--in", "s", "--out", "det.geojson"], d);
    assert!(det.status.success(), "{}", String::from_utf8_lossy(&det.stderr));
    let ev = vehvec(
        &[
            "eval",
            "--pred",
            "det.geojson",
            "--truth",
            "s/truth.geojson",
            "--json",
            "r.json",
        ],
        d,
    );
    assert!(ev.status.success());
    assert!(stdout(&ev).starts_with("Class"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["iou_thresh"], 0.25);
}

#[test]
fn eval_of_truth_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(vehvec(
        &[
            "synth",
            "--preset",
            "superdove",
            "--n-vehicles",
            "7",
            "--seed",
            "5",
            "--out",
            "s"
        ],
        d
    )
    .status
    .success());
    let ev = vehvec(&["eval", "--pred", "s/truth.geojson", "--truth", "s/truth.geojson"], d);
    assert!(ev.status.success());
    let mean = stdout(&ev).lines().find(|l| l.starts_with("Mean")).unwrap().to_string();
    assert_eq!(mean.split_whitespace().nth(1), Some("1.00"), "{mean}");
}

#[test]
fn clouds_only_scene_gives_empty_collection() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = r#"{
        "width_px": 256, "height_px": 256, "sensor": "skysat", "scene_id": "clouds",
        "clouds": [{"centroid_px": [120.0, 130.0], "radius_px": 40.0, "drift_speed_kmh": 60.0, "drift_heading_deg": 45.0, "softness": 8.0}],
        "noise_sigma": 6.0, "rng_seed": 3
    }"#;
    std::fs::write(d.join("scene.json"), spec).unwrap();
    let s = vehvec(&["synth", "--spec", "scene.json", "--out", "c"], d);
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    assert!(vehvec(&["detect", "--in", "c", "--out", "det.geojson"], d)
        .status
        .success());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("det.geojson")).unwrap()).unwrap();
    assert_eq!(v["type"], "FeatureCollection");
    assert_eq!(v["features"].as_array().unwrap().len(), 0);
}

#[test]
fn vectorize_runs_on_an_external_mask() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(vehvec(
        &[
            "synth",
            "--preset",
            "skysat",
            "--n-vehicles",
            "6",
            "--seed",
            "8",
            "--out",
            "s"
        ],
        d
    )
    .status
    .success());
    let v = vehvec(
        &[
            "vectorize",
            "--mask",
            "s/truth_mask.png",
            "--in",
            "s",
            "--out",
            "v.geojson",
        ],
        d,
    );
    assert!(v.status.success(), "{}", String::from_utf8_lossy(&v.stderr));
    let ev = vehvec(&["eval", "--pred", "v.geojson", "--truth", "s/truth.geojson"], d);
    assert!(stdout(&ev).lines().any(|l| l.starts_with("Mean")));
}

#[test]
fn timeseries_writes_csv_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = vehvec(
        &[
            "pipeline",
            "--preset",
            "superdove",
            "--n-vehicles",
            "8",
            "--scenes",
            "3",
            "--seed",
            "1",
            "--out",
            "p",
        ],
        d,
    );
    assert!(p.status.success());
    let t = vehvec(
        &[
            "timeseries",
            "--dets",
            "p/scenes/*/detections.geojson",
            "--out",
            "s.csv",
            "--json",
            "s.json",
            "--plots",
            "plots",
        ],
        d,
    );
    assert!(t.status.success(), "{}", String::from_utf8_lossy(&t.stderr));
    let csv = std::fs::read_to_string(d.join("s.csv")).unwrap();
    assert!(csv.starts_with("date,scene_count,static_car,moving_car,moving_truck,total"));
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(csv, std::fs::read_to_string(d.join("p/series.csv")).unwrap());
    for f in [
        "counts.svg",
        "mean_speed.svg",
        "mean_heading.svg",
        "speed_histogram.svg",
        "heading_histogram.svg",
    ] {
        assert!(std::fs::read_to_string(d.join("plots").join(f))
            .unwrap()
            .contains("</svg>"));
    }
}

#[test]
fn pipeline_reports_are_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = |out: &'static str| {
        [
            "pipeline",
            "--preset",
            "skysat",
            "--n-vehicles",
            "50",
            "--seed",
            "7",
            "--out",
            out,
        ]
    };
    let a = vehvec(&args("a"), d);
    let b = vehvec(&args("b"), d);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(
        std::fs::read(d.join("a/report.json")).unwrap(),
        std::fs::read(d.join("b/report.json")).unwrap()
    );
}

#[test]
fn config_dump_feeds_back_in() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let dump = vehvec(&["config", "--preset", "superdove"], d);
    assert!(dump.status.success());
    std::fs::write(d.join("cfg.toml"), &dump.stdout).unwrap();
    let again = vehvec(&["config", "--preset", "superdove", "--config", "cfg.toml"], d);
    assert_eq!(stdout(&again), stdout(&dump));
    std::fs::write(d.join("bad.toml"), "no_such_knob = 1\n").unwrap();
    let bad = vehvec(&["config", "--preset", "superdove", "--config", "bad.toml"], d);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("no_such_knob"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(vehvec(&["detect", "--bogus"], d).status.code(), Some(1));
    assert_eq!(
        vehvec(&["detect", "--in", "missing", "--out", "x"], d).status.code(),
        Some(1)
    );
    assert_eq!(vehvec(&["pipeline", "--preset", "landsat"], d).status.code(), Some(1));
    assert_eq!(vehvec(&["--help"], d).status.code(), Some(0));
    std::fs::create_dir(d.join("empty")).unwrap();
    let e = vehvec(&["detect", "--in", "empty", "--out", "x"], d);
    assert_eq!(e.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&e.stderr).contains("bundle.json"));
}
