use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_causal-shap"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn generate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a.csv", "b.csv"] {
        let o = run(tmp.path(), &["generate", "--spec", "cardio", "--n", "200", "--seed", "9", "--out", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(tmp.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(tmp.path().join("b.csv")).unwrap());
    assert!(String::from_utf8(a).unwrap().starts_with("diet_score,"));
    assert!(tmp.path().join("a.truth.json").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("d.csv"), "a,b\n1,2\n3,4\n").unwrap();
    std::fs::write(
        tmp.path().join("c.json"),
        r#"{"seed": 1, "dataset": {"csv": "d.csv", "target": "missing"}}"#,
    )
    .unwrap();
    let o = run(tmp.path(), &["discover", "--config", "c.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing"));

    let o = run(tmp.path(), &["discover", "--nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_sizes_and_bad_data() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["generate", "--spec", "lung_cancer", "--n", "0", "--seed", "1", "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(
        tmp.path().join("c.json"),
        r#"{"seed": 1, "dataset": {"csv": "bad.csv", "target": "y"}}"#,
    )
    .unwrap();
    std::fs::write(tmp.path().join("bad.csv"), "x,y\n1,2\nfoo,3\n").unwrap();
    let o = run(tmp.path(), &["discover", "--config", "c.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn attribute_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("c.json"),
        r#"{"seed": 2, "dataset": {"builtin": "lung_cancer", "n": 400}, "attribution": {"max_instances": 10}}"#,
    )
    .unwrap();
    let o = run(tmp.path(), &["attribute", "--config", "c.json", "--set", "output_dir=o"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("o/attributions.json")).unwrap()).unwrap();
    assert_eq!(json["instances"].as_array().unwrap().len(), 10);
    assert!(tmp.path().join("o/bars.svg").exists());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("drink_coffee"));
}
