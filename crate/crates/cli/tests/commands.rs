use std::fs;
use std::path::{Path, PathBuf};

use qcra_cli::args::run;
use qcra_cli::{
    cmd_analyze, cmd_compare, cmd_distribution, cmd_resources, compare_rows, AnalysisConfig, CliError, EstimatorKind,
    Overrides,
};
use qcra_core::uncertainty::Encoding;
use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn base_case() -> PathBuf {
    configs().join("base_case.json")
}

fn exact() -> Overrides {
    Overrides { estimator: Some(EstimatorKind::Exact), ..Overrides::default() }
}

/// Write a modified copy of the base-case config.
fn variant_config(dir: &Path, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(base_case()).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    path
}

#[test]
fn distribution_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dist.csv");
    let text = cmd_distribution(&base_case(), Some(&out), &Overrides::default()).unwrap();
    assert_eq!(fs::read_to_string(&out).unwrap(), text);
    assert_eq!(
        text,
        "loss,probability,cdf\n\
         0,0.650042438036,0.650042438036\n\
         1000.5,0.105019339837,0.755061777873\n\
         2000.5,0.210189529695,0.965251307568\n\
         3001,0.0347486924319,1\n"
    );
}

#[test]
fn analyze_exact_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    cmd_analyze(&base_case(), Some(&out), &exact()).unwrap();
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["estimator"], "exact");
    assert_eq!(v["result"]["var"], 2000.5);
    let var = v["result"]["var"].as_f64().unwrap();
    let el = v["result"]["expected_loss"].as_f64().unwrap();
    assert_eq!(v["result"]["economic_capital"].as_f64().unwrap(), var - el);
    assert!((el - 629.836_829_650_078_7).abs() < 1e-9);
    assert_eq!(v["sampling"]["quantum_samples"], 0);
    assert_eq!(v["resources"]["width_paper_layout"], 9);
    // The resolved config is echoed with defaults filled in.
    assert_eq!(v["config"]["analysis"]["max_rounds"], 64);
    assert_eq!(v["config"]["analysis"]["estimator"], "exact");
}

#[test]
fn analyze_iqae_report_counts_samples() {
    let text = cmd_analyze(&base_case(), None, &Overrides::default()).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["result"]["var"], 2000.5);
    let total = v["sampling"]["quantum_samples"].as_u64().unwrap();
    let per_probe: u64 =
        v["result"]["bisection_trace"].as_array().unwrap().iter().map(|p| p["quantum_samples"].as_u64().unwrap()).sum();
    assert_eq!(total, per_probe);
    assert!(total > 0);
    assert_eq!(v["sampling"]["all_converged"], true);
}

#[test]
fn seeds_change_iqae_reports() {
    let a = cmd_analyze(&base_case(), None, &Overrides { seed: Some(1), ..Overrides::default() }).unwrap();
    let b = cmd_analyze(&base_case(), None, &Overrides { seed: Some(2), ..Overrides::default() }).unwrap();
    assert_ne!(a, b);
}

#[test]
fn classical_estimator_matches_exact() {
    let o = Overrides {
        estimator: Some(EstimatorKind::Classical),
        encoding: Some(Encoding::Exact),
        ..Overrides::default()
    };
    let v: Value = serde_json::from_str(&cmd_analyze(&base_case(), None, &o).unwrap()).unwrap();
    assert_eq!(v["estimator"], "classical");
    assert_eq!(v["result"]["var"], 2000.5);
}

#[test]
fn mismatched_alphas_are_reported_by_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = variant_config(dir.path(), |v| v["assets"][1]["alphas"] = serde_json::json!([0.1]));
    match cmd_analyze(&path, None, &exact()) {
        Err(CliError::Config(msgs)) => {
            assert_eq!(msgs, vec!["assets[1].alphas: expected 2 weights, got 1".to_string()])
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(run(["qcra", "analyze", "--config", path.to_str().unwrap()]), 2);
}

#[test]
fn malformed_json_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = variant_config(dir.path(), |v| v["risk_factors"]["count"] = serde_json::json!("two"));
    match cmd_resources(&path, None, &Overrides::default()) {
        Err(CliError::Config(msgs)) => assert!(msgs[0].starts_with("risk_factors.count:"), "{msgs:?}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn weighted_sum_rejects_fractional_lgd_with_exit_code() {
    let status = run(["qcra", "analyze", "--config", base_case().to_str().unwrap(), "--mode", "weighted_sum"]);
    assert_eq!(status, 2);
}

#[test]
fn resources_width_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let v: Value = serde_json::from_str(&cmd_resources(&base_case(), None, &Overrides::default()).unwrap()).unwrap();
    assert_eq!(v["resources"]["width_paper_layout"], 9);
    assert!(v["resources"]["sum_register_width"].is_null());
    for (k, want) in [(3, 11), (4, 13)] {
        let path = variant_config(dir.path(), |v| {
            let assets = v["assets"].as_array_mut().unwrap();
            while assets.len() < k {
                assets.push(serde_json::json!({"lgd": 10, "p0": 0.1, "rho": 0.1, "alphas": [0.2, 0.2]}));
            }
        });
        let v: Value = serde_json::from_str(&cmd_resources(&path, None, &Overrides::default()).unwrap()).unwrap();
        assert_eq!(v["resources"]["width_paper_layout"], want);
    }
}

#[test]
fn legacy_integer_resources_include_sum_register() {
    let v: Value =
        serde_json::from_str(&cmd_resources(&configs().join("integer.json"), None, &Overrides::default()).unwrap())
            .unwrap();
    assert_eq!(v["resources"]["sum_register_width"], 2);
    assert_eq!(v["resources"]["mode"], "weighted_sum");
}

#[test]
fn compare_table_is_consistent() {
    let mut cfg = AnalysisConfig::load(&base_case()).unwrap();
    cfg.apply(&Overrides { encoding: Some(Encoding::Exact), ..Overrides::default() });
    cfg.analysis.mc_paths = 50_000;
    let rows = compare_rows(&cfg).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!((r.exact - r.classical).abs() < 1e-9);
        assert!(r.iqae_ok, "{r:?}");
        assert!(r.mc_ok, "{r:?}");
    }
    let text = cmd_compare(&base_case(), None, &Overrides::default()).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().next().unwrap().contains("monte_carlo"));
}

#[test]
fn cli_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let status =
        run(["qcra", "distribution", "--config", base_case().to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(status, 0);
    assert!(fs::read_to_string(&out).unwrap().starts_with("loss,probability,cdf\n"));
    assert_eq!(run(["qcra", "analyze", "--config", "x.json", "--estimator", "bogus"]), 2);
    assert_eq!(run(["qcra", "analyze", "--config", dir.path().join("missing.json").to_str().unwrap()]), 2);
}

#[test]
fn shipped_configs_follow_the_schema_fields() {
    let schema: Value =
        serde_json::from_str(&fs::read_to_string(configs().join("config.schema.json")).unwrap()).unwrap();
    let cfg = AnalysisConfig::load(&base_case()).unwrap();
    let resolved = serde_json::to_value(&cfg).unwrap();
    for section in ["risk_factors", "analysis"] {
        let mut declared: Vec<&String> =
            schema["properties"][section]["properties"].as_object().unwrap().keys().collect();
        let mut used: Vec<&String> = resolved[section].as_object().unwrap().keys().collect();
        declared.sort();
        used.sort();
        assert_eq!(declared, used, "{section}");
    }
    let declared: Vec<&String> =
        schema["properties"]["assets"]["items"]["properties"].as_object().unwrap().keys().collect();
    assert_eq!(declared.len(), resolved["assets"][0].as_object().unwrap().len());
}
