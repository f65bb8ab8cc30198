use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use convqual::config::load_config;
use convqual::error::{Category, Error};
use convqual::pipeline::{run_eval, Command, RunContext, DISCRIMINATOR_FILE, ENTROPY_SUMMARY_FILE};
use convqual::realism::RealismMode;
use convqual::report::{render_report, EvalReport, ReportFormat};
use convqual::EvalConfig;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn config() -> EvalConfig {
    load_config(&fixtures().join("eval.toml")).unwrap()
}

fn expected_entropies() -> BTreeMap<String, BTreeMap<String, f64>> {
    let text = fs::read_to_string(fixtures().join("expected_entropies.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Writes labels matching the answer key, as a perfectly accurate rater would.
fn truthful_labels(key_path: &Path, out: &Path) {
    let mut csv = String::from("item_index,judgment\n");
    for line in fs::read_to_string(key_path).unwrap().lines() {
        let entry: serde_json::Value = serde_json::from_str(line).unwrap();
        let judgment = match entry["source"].as_str().unwrap() {
            "human" => "human-generated",
            _ => "simulator-generated",
        };
        csv.push_str(&format!("{},{judgment}\n", entry["index"]));
    }
    fs::write(out, csv).unwrap();
}

#[test]
fn diversity_matches_independent_entropies() {
    let out = tempfile::tempdir().unwrap();
    let report = run_eval(&config(), Command::Diversity, &RunContext::new(out.path())).unwrap();
    let comparison = report.entropy.as_ref().unwrap();
    for (version, dims) in expected_entropies() {
        let row = &comparison.rows[&version];
        for (dim, expected) in dims {
            let got = row.entropy_of(&dim).unwrap();
            assert!(
                (got - expected).abs() < 1e-12,
                "{version}/{dim}: {got} vs {expected}"
            );
        }
    }
    assert_eq!(comparison.ranking, ["C", "B", "A"]);
    assert!(out.path().join(ENTROPY_SUMMARY_FILE).exists());
    assert_eq!(report.artifacts, [ENTROPY_SUMMARY_FILE]);
}

#[test]
fn machine_report_round_trips() {
    let out = tempfile::tempdir().unwrap();
    let report = run_eval(&config(), Command::Diversity, &RunContext::new(out.path())).unwrap();
    let text = render_report(&report, ReportFormat::Machine);
    assert_eq!(EvalReport::from_json(&text).unwrap(), report);
}

#[test]
fn realism_workflow() {
    let config = config();
    let out = tempfile::tempdir().unwrap();
    let ctx = RunContext::new(out.path());

    let sampled = run_eval(&config, Command::RealismSample, &ctx).unwrap();
    let batch = sampled.rater_batch.unwrap();
    assert_eq!((batch.size, batch.human_count, batch.seed), (50, 25, 7));
    let batch_dir = out.path().join(&batch.items_dir);
    let labels = out.path().join("labels.csv");
    truthful_labels(&out.path().join(&batch.key_path), &labels);

    let rated = RunContext {
        batch_dir: Some(batch_dir),
        labels: Some(labels),
        ..RunContext::new(out.path())
    };
    let scored = run_eval(&config, Command::RealismScore, &rated).unwrap();
    let r = &scored.realism[0];
    assert_eq!(
        (r.mode, r.h, r.n, r.score),
        (RealismMode::HumanRated, 25, 50, 0.5)
    );
    assert_eq!(r.accuracy_vs_provenance, Some(1.0));

    run_eval(&config, Command::RealismTrain, &rated).unwrap();
    let model = out.path().join(DISCRIMINATOR_FILE);
    assert!(model.exists());

    let infer = RunContext {
        discriminator: Some(model.clone()),
        datasets: vec![
            fixtures().join("human_pool.jsonl"),
            fixtures().join("simulated_pool.jsonl"),
        ],
        ..RunContext::new(out.path())
    };
    let inferred = run_eval(&config, Command::RealismInfer, &infer).unwrap();
    let [human, simulated] = inferred.realism.as_slice() else {
        panic!("expected two reports");
    };
    assert_eq!(
        (human.n, simulated.n),
        (75, 75),
        "training conversations are excluded"
    );
    assert_eq!(human.score, 1.0);
    assert_eq!(simulated.score, 0.0);

    let full = RunContext {
        discriminator: Some(model),
        ..RunContext::new(out.path())
    };
    let report = run_eval(&config, Command::Full, &full).unwrap();
    assert!(report.entropy.is_some());
    assert_eq!(report.realism.len(), 3);
    assert!(report
        .realism
        .iter()
        .all(|r| r.mode == RealismMode::Inferred));
}

#[test]
fn full_without_discriminator_asks_for_sampling() {
    let out = tempfile::tempdir().unwrap();
    let err = run_eval(&config(), Command::Full, &RunContext::new(out.path())).unwrap_err();
    assert!(matches!(err, Error::MissingInput { .. }));
    assert_eq!(err.exit_code(), 4);
    assert!(err.to_string().contains("convqual realism sample"));
}

#[test]
fn same_seed_same_batch() {
    let config = config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_eval(&config, Command::RealismSample, &RunContext::new(a.path())).unwrap();
    let rb = run_eval(&config, Command::RealismSample, &RunContext::new(b.path())).unwrap();
    let (ba, bb) = (ra.rater_batch.unwrap(), rb.rater_batch.unwrap());
    assert_eq!(ba.batch_id, bb.batch_id);
    let items = |dir: &Path, s: &str| fs::read(dir.join(s).join("items.jsonl")).unwrap();
    assert_eq!(
        items(a.path(), &ba.items_dir),
        items(b.path(), &bb.items_dir)
    );

    let c = tempfile::tempdir().unwrap();
    let rc = run_eval(
        &config.with_seed(8),
        Command::RealismSample,
        &RunContext::new(c.path()),
    )
    .unwrap();
    assert_ne!(rc.rater_batch.unwrap().batch_id, ba.batch_id);
}

fn copy_fixtures(dir: &Path) {
    for entry in fs::read_dir(fixtures()).unwrap() {
        let entry = entry.unwrap();
        let target = dir.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            fs::create_dir_all(&target).unwrap();
            for inner in fs::read_dir(entry.path()).unwrap() {
                let inner = inner.unwrap();
                fs::copy(inner.path(), target.join(inner.file_name())).unwrap();
            }
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

#[test]
fn malformed_line_is_reported_or_skipped() {
    let work = tempfile::tempdir().unwrap();
    copy_fixtures(work.path());
    let path = work.path().join("version_b.jsonl");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("{\"id\":\"bad\",\"turns\":[{\"speaker\":\"system\",\"text\":\"hi\"}]}\n");
    fs::write(&path, text).unwrap();
    let config = load_config(&work.path().join("eval.toml")).unwrap();
    let out = work.path().join("out");

    let err = run_eval(&config, Command::Diversity, &RunContext::new(&out)).unwrap_err();
    let report = err.report();
    assert_eq!(report.category, Category::Validation);
    assert_eq!(report.version.as_deref(), Some("B"));
    assert_eq!(report.module, "corpus");
    assert!(report.message.contains("line 101"), "{}", report.message);

    let skipping = RunContext {
        skip_invalid: true,
        ..RunContext::new(&out)
    };
    let ok = run_eval(&config, Command::Diversity, &skipping).unwrap();
    assert_eq!(ok.warnings.len(), 1);
    assert!(ok.warnings[0].contains("line 101"));
}

#[test]
fn holdout_fraction_scores_a_seeded_subset() {
    let work = tempfile::tempdir().unwrap();
    copy_fixtures(work.path());
    let toml = work.path().join("eval.toml");
    let mut text = fs::read_to_string(&toml).unwrap();
    text.push_str("holdout_fraction = 0.2\n");
    fs::write(&toml, text).unwrap();
    let config = load_config(&toml).unwrap();

    let out = work.path().join("out");
    let sampled = run_eval(&config, Command::RealismSample, &RunContext::new(&out)).unwrap();
    let batch = sampled.rater_batch.unwrap();
    let labels = out.join("labels.csv");
    truthful_labels(&out.join(&batch.key_path), &labels);
    let ctx = RunContext {
        batch_dir: Some(out.join(&batch.items_dir)),
        labels: Some(labels),
        datasets: vec![work.path().join("simulated_pool.jsonl")],
        ..RunContext::new(&out)
    };
    let first = run_eval(&config, Command::RealismInfer, &ctx).unwrap();
    let second = run_eval(&config, Command::RealismInfer, &ctx).unwrap();
    assert_eq!(
        first.realism[0].n, 15,
        "20% of the 75 held-out conversations"
    );
    assert_eq!(first.realism, second.realism);
    assert!(first.artifacts.contains(&DISCRIMINATOR_FILE.to_string()));
}

#[test]
fn config_digest_is_stable_across_locations() {
    let work = tempfile::tempdir().unwrap();
    copy_fixtures(work.path());
    let moved = load_config(&work.path().join("eval.toml")).unwrap();
    assert_eq!(moved.digest(), config().digest());
    assert_ne!(moved.clone().with_seed(99).digest(), moved.digest());
}
