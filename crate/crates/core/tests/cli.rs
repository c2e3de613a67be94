use std::path::Path;
use std::process::{Command, Output};

use crosswalk::ingest::reference_generator;

fn crosswalk(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crosswalk")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn write_model(dir: &Path) {
    std::fs::write(dir.join("model.toml"), reference_generator().to_toml_string()).unwrap();
}

#[test]
fn missing_output_directory_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = crosswalk(&dir.path().join("absent"), &["gen-data", "--n", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = crosswalk(dir.path(), &["evaluate", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failed_gates_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    write_model(dir.path());
    std::fs::write(dir.path().join("run.toml"), "[gates]\nmu_0 = 0.9\nkappa_0 = 0.1\n").unwrap();
    let config = dir.path().join("run.toml");
    let out = crosswalk(
        dir.path(),
        &["evaluate", "--av-strategy", "human", "--experiments", "5", "--config", config.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("report.toml")).unwrap();
    assert!(report.contains("mu = 1.0"), "{report}");
}

#[test]
fn empty_synthetic_set_has_only_a_header_and_reruns_match() {
    let dir = tempfile::tempdir().unwrap();
    let out = crosswalk(dir.path(), &["gen-data", "--n", "0"]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("observations.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("inv_R"));

    let first = dir.path().join("a");
    let second = dir.path().join("b");
    for d in [&first, &second] {
        std::fs::create_dir(d).unwrap();
        assert!(crosswalk(d, &["gen-data", "--n", "50", "--seed", "4"]).status.success());
    }
    assert_eq!(
        std::fs::read(first.join("observations.csv")).unwrap(),
        std::fs::read(second.join("observations.csv")).unwrap()
    );
}

#[test]
fn conditional_table_integrates_to_one() {
    let dir = tempfile::tempdir().unwrap();
    write_model(dir.path());
    let out = crosswalk(dir.path(), &["condition", "--given", "inv_R=0.05", "--given", "v=8", "--free", "v_p"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("conditional.csv")).unwrap();
    let rows: Vec<(f64, f64)> = reader.deserialize().map(|r| r.unwrap()).collect();
    let mass: f64 = rows.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
    assert!((mass - 1.0).abs() <= 0.005, "mass {mass}");
}

#[test]
fn single_component_range_gives_one_curve_row() {
    let dir = tempfile::tempdir().unwrap();
    assert!(crosswalk(dir.path(), &["gen-data", "--n", "300"]).status.success());
    let out = crosswalk(dir.path(), &["fit", "--k-min", "1", "--k-max", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bic = std::fs::read_to_string(dir.path().join("bic.csv")).unwrap();
    assert_eq!(bic.lines().count(), 2, "{bic}");
    assert!(bic.lines().nth(1).unwrap().starts_with("1,"));
    assert!(dir.path().join("model.toml").exists());
}
