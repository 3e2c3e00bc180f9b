use std::path::{Path, PathBuf};

use scatlab_cli::config::{parse_config, Config, CustomScenario};
use scatlab_cli::run_cli;
use scatlab_cli::scenario::{q_perturbation, standard_magnetic, Expectation};

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn cli(args: &[&str]) -> i32 {
    run_cli(std::iter::once("scatlab").chain(args.iter().copied()))
}

#[test]
fn freespace_passes_and_writes_artifacts() {
    let out = scratch("freespace");
    let code = cli(&["simulate", "--scenario", "freespace", "--level", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let dir = out.join("freespace").join("simulate");
    for f in ["meta.json", "report.json", "metrics.csv", "trace_p0_d0_h.csv", "trace_p0_d0_delta.csv"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("name,value,relation,tolerance,verdict"));
    assert!(metrics.contains("freespace_linf,0.0000000000000000e0,<=,1.0000000000000000e-8,pass"), "{metrics}");
}

#[test]
fn execution_errors_exit_with_one() {
    let out = scratch("errors");
    let o = out.to_str().unwrap();
    let bad = out.join("bad.toml");
    std::fs::write(&bad, "schema_version = 1\nscenario = \"freespace\"\nresolution = 3\n").unwrap();
    let bad = bad.to_str().unwrap();
    assert_eq!(cli(&["simulate", "--config", bad, "--out", o]), 1);
    assert_eq!(cli(&["simulate", "--config", "/nonexistent/run.toml", "--out", o]), 1);
    assert_eq!(cli(&["simulate", "--scenario", "nope", "--out", o]), 1);
    assert_eq!(cli(&["simulate", "--out", o]), 1);
    assert_eq!(cli(&["simulate", "--config", bad, "--scenario", "freespace", "--out", o]), 1);
    // 2^12 points per unit length is far over the node budget
    assert_eq!(cli(&["simulate", "--scenario", "gauge-pair", "--level", "12", "--out", o]), 1);
    assert_eq!(cli(&["dataset-2n", "--scenario", "line", "--out", o]), 1);
    assert_eq!(cli(&["frobnicate"]), 1);
}

#[test]
fn too_few_levels_is_an_error() {
    let out = scratch("levels");
    let cfg = out.join("run.toml");
    std::fs::write(&cfg, "schema_version = 1\nscenario = \"freespace\"\n[convergence]\nlevels = [3, 4]\n").unwrap();
    assert_eq!(cli(&["convergence", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 1);
}

#[test]
fn custom_scenario_round_trips_and_failing_metrics_exit_with_two() {
    let a = standard_magnetic();
    let b = a.with_scalar_term(q_perturbation()).unwrap();
    let mut cfg = Config::builtin("custom");
    cfg.custom = Some(CustomScenario {
        name: "mislabelled".into(),
        potentials: vec![a, b],
        directions: vec![vec![1.0, 0.0]],
        expectation: Expectation::Identical,
        reduced: None,
    });
    let text = toml::to_string(&cfg).unwrap();
    assert_eq!(parse_config(&text).unwrap(), cfg);

    let out = scratch("custom");
    let path = out.join("run.toml");
    std::fs::write(&path, &text).unwrap();
    let code = cli(&["simulate", "--config", path.to_str().unwrap(), "--level", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    let metrics = std::fs::read_to_string(out.join("mislabelled/simulate/metrics.csv")).unwrap();
    assert!(metrics.lines().any(|l| l.starts_with("identical_h_d0,") && l.ends_with(",fail")), "{metrics}");
}

#[test]
fn dataset_labels_all_signed_axes_and_the_reduced_set() {
    let out = scratch("dataset");
    let code = cli(&["dataset-2n", "--scenario", "antisymmetric", "--level", "3", "--out", out.to_str().unwrap()]);
    assert!(code == 0 || code == 2, "exit {code}");
    let dir = out.join("antisymmetric").join("dataset-2n");
    let table = std::fs::read_to_string(dir.join("discrepancy.csv")).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let labels: Vec<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(labels, ["+e1", "-e1", "+e2", "-e2"]);
    let reduced: Vec<&str> = rows.iter().map(|r| r[2]).collect();
    assert_eq!(reduced, ["1", "0", "1", "1"]);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["reduced_set"], serde_json::json!(["+e1", "+e2", "-e2"]));
    let traces = std::fs::read_dir(&dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("trace_"))
        .count();
    // two potentials, four directions, two wave kinds
    assert_eq!(traces, 2 * 4 * 2);
}
