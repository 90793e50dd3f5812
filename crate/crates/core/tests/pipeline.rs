//! Synthetic files through ingestion, labeling and featurization, plus the
//! file formats each stage hands to the next.

use std::collections::BTreeMap;
use std::fs;

use effiq_core::energy::{label_trip, read_labeled, write_labeled, FcrConstants, LabelFilters};
use effiq_core::ensemble::{read_preds, write_preds, PredictionRecord};
use effiq_core::features::{
    build_feature_tables, fit_od_clusters, read_features, write_features, ClusterModel,
};
use effiq_core::synth::{generate, write_dataset, SynthConfig};
use effiq_core::ved::{
    assemble_trips, parse_dynamic_files, read_static_file, read_trips, write_trips, ColumnMap,
    VehicleType,
};
use effiq_core::{SamplePoint, TripSeries, VehicleMeta};
use proptest::prelude::*;

fn small(noise: f64) -> SynthConfig {
    SynthConfig {
        total_trips: Some(120),
        days: 120,
        noise_scale: noise,
        ..SynthConfig::default()
    }
}

#[test]
fn synthetic_files_ingest_cleanly_and_label_to_truth() {
    let cfg = small(0.0);
    let data = generate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = write_dataset(dir.path(), &data, cfg.epoch).unwrap();
    assert!(files.dynamic.len() > 1);

    let parsed = parse_dynamic_files(&files.dynamic, &ColumnMap::default()).unwrap();
    assert_eq!(parsed.skips.rows_skipped, 0, "{:?}", parsed.skips.examples);
    let statics = read_static_file(&files.static_table).unwrap();
    assert!(statics.rejected.is_empty());
    assert_eq!(statics.vehicles, data.vehicles);
    let assembly = assemble_trips(parsed.groups, &statics.vehicles, cfg.epoch);
    assert_eq!(assembly.dropped_trips_without_meta, 0);
    assert_eq!(assembly.trips.len(), data.trips.len());

    let truth: BTreeMap<_, _> = data.truth.iter().map(|t| (t.key.clone(), t)).collect();
    let (k, filters) = (FcrConstants::default(), LabelFilters::default());
    let mut checked = 0;
    for trip in &assembly.trips {
        let label = label_trip(trip, &k, &filters);
        let t = truth[&trip.key()];
        let pairs = [
            (label.energy.fuel_eff_km_per_l, t.fuel),
            (label.energy.batt_eff_km_per_kwh, t.battery),
        ];
        for (got, want) in pairs {
            if let Some(want) = want {
                let got = got
                    .unwrap_or_else(|| panic!("{} lost a label: {:?}", trip.key(), label.reasons));
                assert!(
                    (got / want.value - 1.0).abs() <= 0.02,
                    "{}: {got} vs {}",
                    trip.key(),
                    want.value
                );
                checked += 1;
            }
        }
    }
    assert!(checked >= data.trips.len());

    // the truth sidecar carries the same values
    let text = fs::read_to_string(&files.truth).unwrap();
    assert!(text.starts_with("veh_id,trip_id,true_fuel_eff,true_batt_eff\n"));
    assert_eq!(text.lines().count(), data.truth.len() + 1);
}

#[test]
fn same_config_writes_identical_bytes() {
    let cfg = small(0.05);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = write_dataset(a.path(), &generate(&cfg).unwrap(), cfg.epoch).unwrap();
    let fb = write_dataset(b.path(), &generate(&cfg).unwrap(), cfg.epoch).unwrap();
    let names = |files: &[std::path::PathBuf]| -> Vec<_> {
        files
            .iter()
            .map(|p| p.file_name().unwrap().to_owned())
            .collect()
    };
    assert_eq!(names(&fa.dynamic), names(&fb.dynamic));
    let pairs = fa
        .dynamic
        .iter()
        .zip(&fb.dynamic)
        .chain([(&fa.static_table, &fb.static_table), (&fa.truth, &fb.truth)]);
    for (x, y) in pairs {
        assert_eq!(
            fs::read(x).unwrap(),
            fs::read(y).unwrap(),
            "{}",
            x.display()
        );
    }
}

#[test]
fn stage_files_round_trip() {
    let cfg = small(0.05);
    let data = generate(&cfg).unwrap();

    let mut buf = Vec::new();
    write_trips(&mut buf, &data.trips).unwrap();
    let trips = read_trips(buf.as_slice(), &data.vehicles, cfg.epoch).unwrap();
    let mut expected = data.trips.clone();
    expected.sort_by_key(TripSeries::key);
    assert_eq!(trips.len(), expected.len());
    for (a, b) in trips.iter().zip(&expected) {
        assert!(a == b, "{} differs after the round trip", b.key());
    }

    let (k, filters) = (FcrConstants::default(), LabelFilters::default());
    let labels: Vec<_> = trips.iter().map(|t| label_trip(t, &k, &filters)).collect();
    let mut buf = Vec::new();
    write_labeled(&mut buf, &labels).unwrap();
    assert_eq!(read_labeled(buf.as_slice()).unwrap(), labels);

    let clusters = fit_od_clusters(&trips, 4, 1, 100).unwrap().model;
    let mut buf = Vec::new();
    clusters.write(&mut buf).unwrap();
    assert_eq!(ClusterModel::read(buf.as_slice()).unwrap(), clusters);

    let build = build_feature_tables(&trips, &labels, &clusters);
    assert!(build.excluded.is_empty());
    assert!(build.tables.len() >= 5);
    for table in build.tables.values() {
        let mut buf = Vec::new();
        write_features(&mut buf, table).unwrap();
        assert_eq!(&read_features(buf.as_slice()).unwrap(), table);

        let preds: Vec<PredictionRecord> = table
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| PredictionRecord {
                key: r.key.clone(),
                start: r.start,
                month: r.month,
                task: r.task,
                target: r.target,
                pred_mean: r.target * 0.97 + 0.1,
                pred_var: (i % 3 != 0).then_some(0.5 + i as f64 / 7.0),
            })
            .collect();
        let mut buf = Vec::new();
        write_preds(&mut buf, &preds).unwrap();
        assert_eq!(read_preds(buf.as_slice()).unwrap(), preds);
    }
}

fn arb_opt(range: std::ops::Range<f64>) -> impl Strategy<Value = Option<f64>> {
    prop::option::of(range)
}

fn arb_sample() -> impl Strategy<Value = SamplePoint> {
    (
        (0.0..400.0f64, 0i64..10_000_000),
        (
            arb_opt(-90.0..90.0),
            arb_opt(-180.0..180.0),
            arb_opt(0.0..150.0),
            arb_opt(0.0..7000.0),
        ),
        (arb_opt(0.0..200.0), arb_opt(0.0..40.0), arb_opt(0.0..100.0)),
        (
            arb_opt(-30.0..30.0),
            arb_opt(-30.0..30.0),
            arb_opt(-30.0..30.0),
            arb_opt(-30.0..30.0),
        ),
        (
            arb_opt(-30.0..45.0),
            arb_opt(-200.0..200.0),
            arb_opt(200.0..400.0),
        ),
    )
        .prop_map(
            |(
                (day_num, ts),
                (lat, lon, speed, rpm),
                (maf, fr, load),
                (s1, s2, l1, l2),
                (oat, cur, volt),
            )| {
                SamplePoint {
                    day_num,
                    timestamp_ms: ts,
                    lat,
                    lon,
                    speed,
                    engine_rpm: rpm,
                    maf,
                    fuel_rate: fr,
                    abs_load: load,
                    stft_b1: s1,
                    stft_b2: s2,
                    ltft_b1: l1,
                    ltft_b2: l2,
                    oat,
                    hv_current: cur,
                    hv_voltage: volt,
                }
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trips_file_round_trips(samples in prop::collection::vec(arb_sample(), 1..40), trip in 1u32..500) {
        let meta = VehicleMeta::new("17", VehicleType::Hev);
        let mut samples = samples;
        samples.sort_by_key(|s| s.timestamp_ms);
        samples.dedup_by_key(|s| s.timestamp_ms);
        let epoch = effiq_core::ved::default_epoch();
        let start = effiq_core::ved::day_num_to_datetime(epoch.and_hms_opt(0, 0, 0).unwrap(), samples[0].day_num);
        let series = TripSeries {
            veh_id: "17".into(),
            trip_id: trip.to_string(),
            meta: meta.clone(),
            samples,
            start_datetime: start,
        };
        let vehicles: BTreeMap<String, VehicleMeta> = [("17".to_string(), meta)].into_iter().collect();
        let mut buf = Vec::new();
        write_trips(&mut buf, std::slice::from_ref(&series)).unwrap();
        let back = read_trips(buf.as_slice(), &vehicles, epoch).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert!(back[0].samples.windows(2).all(|w| w[0].timestamp_ms < w[1].timestamp_ms));
        prop_assert!(back[0].samples.iter().all(SamplePoint::is_valid));
        prop_assert_eq!(&back[0], &series);
    }
}
