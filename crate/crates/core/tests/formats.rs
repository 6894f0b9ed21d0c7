use std::path::Path;

use chrono::{TimeZone, Utc};
use proptest::prelude::*;

use vehvec::detection::{Detection, HeadingConfidence, ObjectClass, VelocityVector};
use vehvec::geometry::{Point, Polygon};
use vehvec::io::{self, CollectionHeader, DetectionFile};
use vehvec::raster::GeoTransform;
use vehvec::sensor::{SensorModel, SpeedEstimate};
use vehvec::synth::{random_scene, render_scene, RandomSceneConfig};

fn header(gt: GeoTransform) -> CollectionHeader {
    CollectionHeader {
        scene_id: "s".into(),
        timestamp: Utc.with_ymd_and_hms(2024, 4, 2, 10, 0, 0).unwrap(),
        width_px: 100,
        height_px: 80,
        sensor: SensorModel::superdove(),
        geotransform: gt,
    }
}

fn arb_detection() -> impl Strategy<Value = Detection> {
    (
        1u32..1000,
        0usize..3,
        proptest::collection::vec((0.0f64..80.0, 0.0f64..100.0), 3..10),
        1.0f64..200.0,
        0.0f64..360.0,
        any::<bool>(),
        0i64..100_000,
    )
        .prop_map(|(id, k, pts, speed, heading, resolved, secs)| {
            let class = ObjectClass::ALL[k];
            Detection {
                id,
                class,
                footprint: Polygon::new(pts.into_iter().map(|(r, c)| Point::rc(r, c)).collect()),
                velocity: class.is_moving().then_some(VelocityVector {
                    speed: SpeedEstimate {
                        speed_kmh: speed,
                        speed_err_kmh: 0.3 * speed,
                        rainbow_len_px: speed / 13.5,
                    },
                    heading_deg: heading,
                    heading_confidence: if resolved {
                        HeadingConfidence::Resolved
                    } else {
                        HeadingConfidence::Ambiguous
                    },
                }),
                timestamp: Utc.timestamp_opt(1_700_000_000 + secs, 0).unwrap(),
                scene_id: format!("scene-{k}"),
            }
        })
}

proptest! {
    #[test]
    fn detection_file_round_trips_exactly(
        dets in proptest::collection::vec(arb_detection(), 0..8),
        x0 in -1e6f64..1e6, y0 in -1e6f64..1e6, gsd in 0.3f64..10.0,
    ) {
        let file = DetectionFile::from_detections(header(GeoTransform([x0, gsd, 0.0, y0, 0.0, -gsd])), &dets);
        let bytes = file.to_json_bytes().unwrap();
        let back = DetectionFile::from_json_bytes(&bytes, Path::new("d.geojson")).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(back.to_json_bytes().unwrap(), bytes);
        let restored = back.to_detections().unwrap();
        prop_assert_eq!(restored.len(), dets.len());
        for (a, b) in restored.iter().zip(&dets) {
            prop_assert_eq!(a.velocity, b.velocity);
            prop_assert_eq!((a.id, a.class, a.timestamp), (b.id, b.class, b.timestamp));
            for (p, q) in a.footprint.points().iter().zip(b.footprint.points()) {
                prop_assert!(p.dist(*q) < 1e-6);
            }
        }
    }
}

#[test]
fn bundles_round_trip_for_both_presets() {
    for sensor in [SensorModel::skysat(), SensorModel::superdove()] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RandomSceneConfig::for_sensor(sensor, 8, 21);
        let (bundle, _) = render_scene(&random_scene(&cfg).unwrap()).unwrap();
        io::write_bundle(&bundle, dir.path()).unwrap();
        let first = std::fs::read(dir.path().join(io::IMAGE_FILE)).unwrap();
        let back = io::read_bundle(dir.path()).unwrap();
        assert_eq!(back, bundle);
        io::write_bundle(&back, dir.path()).unwrap();
        assert_eq!(std::fs::read(dir.path().join(io::IMAGE_FILE)).unwrap(), first);
    }
}

#[test]
fn moving_detection_without_speed_is_rejected() {
    let det = Detection {
        id: 1,
        class: ObjectClass::MovingCar,
        footprint: Polygon::rect(0.0, 0.0, 2.0, 2.0),
        velocity: None,
        timestamp: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
        scene_id: "s".into(),
    };
    let file = DetectionFile::from_detections(header(GeoTransform::local_metric(3.0)), &[det]);
    assert!(file.to_detections().unwrap_err().to_string().contains("features[0]"));
}
