use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn convqual(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convqual"))
        .args(args)
        .output()
        .unwrap()
}

fn error_json(output: &Output) -> serde_json::Value {
    serde_json::from_slice::<serde_json::Value>(&output.stderr).unwrap()["error"].clone()
}

#[test]
fn machine_format_writes_json() {
    let out = tempfile::tempdir().unwrap();
    let config = fixtures().join("eval.toml");
    let output = convqual(&[
        "diversity",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--format",
        "machine",
    ]);
    assert!(output.status.success());
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(
        report["entropy"]["ranking"],
        serde_json::json!(["C", "B", "A"])
    );
    assert!(out.path().join("report.json").exists());
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("eval.toml");
    fs::write(
        &config,
        "weights = [0.3, 0.3]\n[[dimensions]]\nname = \"x\"\n",
    )
    .unwrap();
    let output = convqual(&[
        "diversity",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let err = error_json(&output);
    assert_eq!(err["category"], "validation");
    assert_eq!(err["module"], "config");
}

#[test]
fn missing_config_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("absent.toml");
    let output = convqual(&[
        "diversity",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3));
    assert_eq!(error_json(&output)["category"], "io");
}

#[test]
fn report_without_discriminator_exits_4() {
    let out = tempfile::tempdir().unwrap();
    let config = fixtures().join("eval.toml");
    let output = convqual(&[
        "report",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(4));
    let err = error_json(&output);
    assert_eq!(err["category"], "precondition");
    assert!(err["message"].as_str().unwrap().contains("realism sample"));
}

#[test]
fn seed_flag_changes_the_batch() {
    let config = fixtures().join("eval.toml");
    let batch_id = |seed: &str| {
        let out = tempfile::tempdir().unwrap();
        let output = convqual(&[
            "realism",
            "sample",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.path().to_str().unwrap(),
            "--format",
            "machine",
            "--seed",
            seed,
        ]);
        assert!(output.status.success());
        let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
        report["rater_batch"]["batch_id"]
            .as_str()
            .unwrap()
            .to_string()
    };
    assert!(batch_id("3").starts_with("batch-3-"));
    assert_eq!(batch_id("3"), batch_id("3"));
    assert_ne!(batch_id("3"), batch_id("4"));
}

#[test]
fn train_dimension_produces_a_usable_model() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = fixtures().join("version_a.jsonl");
    let mut csv = String::from("conversation_id,label\n");
    for line in fs::read_to_string(&dataset).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let text = v["turns"][0]["text"].as_str().unwrap();
        let label = if text.contains("car") || text.contains("engine") {
            "Cars"
        } else {
            "Other"
        };
        csv.push_str(&format!("{},{label}\n", v["id"].as_str().unwrap()));
    }
    let annotations = dir.path().join("labels.csv");
    fs::write(&annotations, csv).unwrap();
    let output = convqual(&[
        "train-dimension",
        "--name",
        "Cars",
        "--vocabulary",
        "Cars,Other",
        "--dataset",
        dataset.to_str().unwrap(),
        "--annotations",
        annotations.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let text = fs::read_to_string(dir.path().join("cars.nb.json")).unwrap();
    assert!(text.contains("convqual-naive-bayes"));

    let config = dir.path().join("eval.toml");
    fs::write(
        &config,
        format!(
            "[versions]\nA = {:?}\n\n[[dimensions]]\nname = \"Cars\"\nvocabulary = [\"Cars\", \"Other\"]\nclassifier = {{ naive_bayes = \"cars.nb.json\" }}\n",
            dataset.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    let output = convqual(&[
        "diversity",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(
        String::from_utf8_lossy(&output.stdout).contains("| Version | H_Cars | Entropy Score |")
    );
}
