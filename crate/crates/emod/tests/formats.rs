use std::collections::BTreeMap;

use emod::formats::*;
use emod_core::accounting::model_from_costs;
use emod_core::device::PowerTrace;
use emod_core::opdict::BlockLog;
use proptest::prelude::*;

fn stamp() -> Stamp {
    Stamp { config_hash: "ab12".into(), seed: 9 }
}

#[test]
fn block_log_keeps_only_entered_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("case_0003.csv");
    let log = BlockLog { case_id: 3, counts: vec![0, 4, 0, 1_000_000_000_000, 7] };
    write_block_log(&path, &log, &stamp()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, "# config_hash=ab12 seed=9\nblock_id,count\n1,4\n3,1000000000000\n4,7\n");
    assert_eq!(read_block_log(&path, 3, 5).unwrap(), log);
    assert_eq!(read_csv_stamp(&path).unwrap(), Some(stamp()));
    assert!(read_block_log(&path, 3, 4).is_err());
}

#[test]
fn entries_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("case_0000.log");
    let entries = vec![0, 2, 5, 2, 5, 1];
    write_entries(&path, &entries).unwrap();
    assert_eq!(read_entries(&path).unwrap(), entries);
}

#[test]
fn measurements_counts_and_metrics_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("measurements.csv");
    let rows = vec![
        MeasurementRow { case_id: 0, e_joules: 0.125, e_idle: 1.5, e_meas: 1.625, repeats: 10, stderr: 1e-3 },
        MeasurementRow { case_id: 1, e_joules: -2e-4, e_idle: 1.5, e_meas: 1.4998, repeats: 10, stderr: 0.1 + 0.2 },
    ];
    write_measurements(&m, &rows, &stamp()).unwrap();
    assert_eq!(read_measurements(&m).unwrap(), rows);
    let header = std::fs::read_to_string(&m).unwrap().lines().nth(1).unwrap().to_string();
    assert_eq!(header, "case_id,e_joules,e_idle,e_meas,repeats,stderr");

    let c = dir.path().join("counts.csv");
    let ids = vec!["Int+Int".to_string(), "BlockGoto_for".to_string()];
    let counts = vec![(0, vec![3, 0]), (1, vec![u64::MAX, 17])];
    write_counts(&c, &ids, &counts, &stamp()).unwrap();
    assert_eq!(read_counts(&c).unwrap(), (ids, counts));

    let path = dir.path().join("metrics.csv");
    let metrics = vec![
        MetricsRow { round: 0, train_r: Some(0.99), val_r: None, train_nmae: 0.01, val_nmae: 0.05 },
        MetricsRow { round: 1, train_r: Some(1.0), val_r: Some(0.97), train_nmae: 0.0, val_nmae: 0.08 },
    ];
    write_metrics(&path, &metrics, &stamp()).unwrap();
    assert_eq!(read_metrics(&path).unwrap(), metrics);
}

#[test]
fn model_file_round_trips_costs_and_meta() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let costs: BTreeMap<String, f64> =
        [("Int+Int", 1.25e-7), ("Lib:Math.sin", 3.3e-5), ("BlockGoto_if", -1e-9)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let mut model = model_from_costs(&costs);
    model.meta.iters = 1234;
    model.meta.rank = 3;
    write_json(&path, &ModelFile::new(&model, "ab12")).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"final_J\""));
    let back: ModelFile = read_json(&path).unwrap();
    assert_eq!(back.meta.config_hash, "ab12");
    let m = back.to_model();
    assert_eq!((m.op_ids, m.cost, m.meta.iters, m.meta.rank), (model.op_ids, model.cost, 1234, 3));
}

#[test]
fn plan_file_flattens_the_stamp() {
    let plan = PlanFile { stamp: stamp(), cases: Vec::new() };
    let v = serde_json::to_value(&plan).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["cases", "config_hash", "seed"]);
}

#[test]
fn missing_files_are_reported_by_path() {
    let err = read_metrics(std::path::Path::new("/nonexistent/metrics.csv")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("/nonexistent/metrics.csv"));
}

proptest! {
    #[test]
    fn traces_round_trip_bit_for_bit(samples in prop::collection::vec((0.0f64..100.0, -1e3f64..1e3), 0..40)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let trace = PowerTrace { samples };
        write_trace(&path, &trace).unwrap();
        prop_assert_eq!(read_trace(&path).unwrap(), trace);
    }
}
