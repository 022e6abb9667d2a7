use serde_json::Value;

use qcra_web::{distribution_json, grover_json, iqae_json};

const BASE_CASE: &str = r#"{
    "factors": 2, "qubits_per_factor": 2, "encoding": "exact",
    "assets": [
        {"lgd": 1000.5, "p0": 0.15, "rho": 0.1, "alphas": [0.35, 0.2]},
        {"lgd": 2000.5, "p0": 0.25, "rho": 0.05, "alphas": [0.1, 0.25]}
    ]
}"#;

#[test]
fn distribution_view() {
    let v: Value = serde_json::from_str(&distribution_json(BASE_CASE, 0.95).unwrap()).unwrap();
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 4);
    assert_eq!(points[3]["loss"], 3001.0);
    for p in points {
        let (cdf, circuit) = (p["cdf"].as_f64().unwrap(), p["circuit_cdf"].as_f64().unwrap());
        assert!((cdf - circuit).abs() < 1e-9);
    }
    assert_eq!(v["var"], 2000.5);
    assert!((v["expected_loss"].as_f64().unwrap() - 629.836_829_650_078_7).abs() < 1e-9);
}

#[test]
fn grover_curve_matches_formula() {
    let pts: Vec<Value> = serde_json::from_str(&grover_json(0.1, 30).unwrap()).unwrap();
    assert_eq!(pts.len(), 31);
    for p in &pts {
        assert!((p["simulated"].as_f64().unwrap() - p["formula"].as_f64().unwrap()).abs() < 1e-9);
    }
    assert!(grover_json(1.5, 3).is_err());
}

#[test]
fn iqae_view_brackets_exact() {
    let v: Value = serde_json::from_str(&iqae_json(BASE_CASE, 2000.5, 0.002, 0.99, 3).unwrap()).unwrap();
    let exact = v["exact"].as_f64().unwrap();
    assert!((v["estimate"].as_f64().unwrap() - exact).abs() <= 0.002);
    assert!(!v["rounds"].as_array().unwrap().is_empty());
    assert_eq!(v["converged"], true);
}

#[test]
fn bad_input_is_an_error_string() {
    assert!(distribution_json("{", 0.9).unwrap_err().starts_with("bad portfolio"));
    let mismatched = BASE_CASE.replace("[0.1, 0.25]", "[0.1]");
    assert!(distribution_json(&mismatched, 0.9).unwrap_err().contains("asset 1"));
}
