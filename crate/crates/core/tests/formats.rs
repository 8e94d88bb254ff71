use std::path::PathBuf;

use ncde_core::data::{parse_csv, parse_csv_str, parse_ts, parse_ts_str, write_csv, write_ts, CsvSchema};
use ncde_core::Dataset;

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn check_golden(ds: &Dataset) {
    assert_eq!(ds.len(), 3);
    assert_eq!(ds.channels, 2);
    let s = &ds.samples[1];
    assert_eq!(s.times, vec![0.0, 1.0, 2.0, 3.0]);
    assert_eq!(s.row(0), &[3.0, -1.0]);
    assert_eq!(s.row(3), &[0.0, -4.0]);
    let labels: Vec<&str> = ds
        .samples
        .iter()
        .map(|s| ds.class_names[s.label.unwrap()].as_str())
        .collect();
    assert_eq!(labels, ["up", "down", "up"]);
}

#[test]
fn golden_ts_parses() {
    let ds = parse_ts(golden("golden.ts")).unwrap();
    assert_eq!(ds.name, "Golden");
    assert_eq!(ds.class_names, ["up", "down"]);
    check_golden(&ds);
}

#[test]
fn golden_csv_matches_ts() {
    let csv = parse_csv(golden("golden.csv"), &CsvSchema::default()).unwrap();
    // CSV class names are sorted.
    assert_eq!(csv.class_names, ["down", "up"]);
    check_golden(&csv);
    let ts = parse_ts(golden("golden.ts")).unwrap();
    for (a, b) in csv.samples.iter().zip(&ts.samples) {
        assert_eq!(a.times, b.times);
        assert_eq!(a.values, b.values);
    }
}

#[test]
fn golden_timed_ts() {
    let ds = parse_ts(golden("golden_timed.ts")).unwrap();
    assert_eq!(ds.samples[0].times, vec![0.0, 0.5, 2.0]);
    assert_eq!(ds.samples[0].values.data(), &[1.0, 2.0, 4.0]);
    assert_eq!(ds.samples[1].len(), 2);
    assert_eq!(ds.samples[1].label, Some(0));
}

#[test]
fn writers_round_trip_goldens() {
    let ts = parse_ts(golden("golden.ts")).unwrap();
    assert!(parse_ts_str(&write_ts(&ts)).unwrap().same_content(&ts));
    let csv = parse_csv(golden("golden.csv"), &CsvSchema::default()).unwrap();
    let back = parse_csv_str(&write_csv(&csv).unwrap(), &CsvSchema::default()).unwrap();
    assert_eq!(back.samples, csv.samples);
    assert_eq!(back.class_names, csv.class_names);
}
