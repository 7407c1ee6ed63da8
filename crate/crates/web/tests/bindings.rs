use brwlab_web::{drift_json, ladder_json, percolation_json};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn ladder_on_z_matches_cosine() {
    let v = parse(&ladder_json(r#"{"family":"zd-srw","dim":1}"#, 5).unwrap());
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    let n_r = rows[4]["nR"].as_f64().unwrap();
    let exact = 1.0 / (std::f64::consts::PI / 12.0).cos();
    assert!((n_r - exact).abs() < 1e-8);
}

#[test]
fn ladder_rejects_bad_input() {
    assert!(ladder_json("{\"family\":\"nope\"}", 3).is_err());
    assert!(ladder_json(r#"{"family":"loop"}"#, 0).is_err());
}

#[test]
fn drift_region_reports_integers() {
    let v = parse(&drift_json(0.7, 0.1, 1.2).unwrap());
    let d: Vec<i64> = v["d"].as_array().unwrap().iter().map(|x| x.as_i64().unwrap()).collect();
    assert_eq!(d.len(), 3);
    assert!(d[0] < d[1]);
    assert!(v["anchor_error"].as_f64().unwrap() <= 1e-12);
    assert!(!v["cells"].as_array().unwrap().is_empty());
    assert!(drift_json(0.5, 0.5, 0.9).is_err());
}

#[test]
fn percolation_labels_every_vertex() {
    let v = parse(&percolation_json(6, 1.0, 3).unwrap());
    assert_eq!(v["labels"].as_array().unwrap().len(), 36);
    assert_eq!(v["open"].as_array().unwrap().len(), 60);
    assert_eq!(v["largest"].as_u64().unwrap(), 36);
    let v = parse(&percolation_json(6, 0.0, 3).unwrap());
    assert!(v["lambda_s_largest"].is_null());
    assert!(percolation_json(1, 0.5, 0).is_err());
    assert_eq!(percolation_json(8, 0.6, 9).unwrap(), percolation_json(8, 0.6, 9).unwrap());
}
