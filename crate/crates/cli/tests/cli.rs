use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/planted")
}

fn config() -> PathBuf {
    fixtures().join("config.toml")
}

fn cqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqa")).args(args).output().expect("spawn cqa")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn run_to(path: &Path, extra: &[&str]) -> Output {
    let cfg = config();
    let mut args = vec!["run", "-c", s(&cfg), "-o", s(path)];
    args.extend_from_slice(extra);
    cqa(&args)
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn column(rows: &[Vec<String>], row: usize, name: &str) -> String {
    let idx = rows[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows[row][idx].clone()
}

#[test]
fn run_succeeds_and_writes_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("run.jsonl");
    let out = run_to(&out_path, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 12);
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.jsonl.config.json")).unwrap()).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(sidecar["config_id"], first["config_id"]);
}

#[test]
fn runs_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    assert!(run_to(&a, &["--workers", "1"]).status.success());
    assert!(run_to(&b, &["--workers", "3"]).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_to(&dir.path().join("r.jsonl"), &["--set", "aggregation=median"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run_to(&dir.path().join("r.jsonl"), &["--set", "no_such_key=1"]);
    assert_eq!(out.status.code(), Some(2));
    let set = format!("paths.documents={}", s(&dir.path().join("absent.jsonl")));
    let out = run_to(&dir.path().join("r.jsonl"), &["--set", &set]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_data_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("documents.jsonl");
    fs::write(&broken, "{\"question_id\": \"q01\", \"rank\": \n").unwrap();
    let set = format!("paths.documents={}", s(&broken));
    let out = run_to(&dir.path().join("r.jsonl"), &["--set", &set]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn question_without_documents_fails_alone() {
    let dir = tempfile::tempdir().unwrap();
    let mut questions = fs::read_to_string(fixtures().join("questions.jsonl")).unwrap();
    questions.push_str("{\"id\": \"q99\", \"text\": \"Who wrote the lost letter?\", \"gold_answers\": [\"Nobody\"], \"set\": \"CQ-W\"}\n");
    let qpath = dir.path().join("questions.jsonl");
    fs::write(&qpath, questions).unwrap();
    let set = format!("paths.questions={}", s(&qpath));
    let run = dir.path().join("r.jsonl");
    let out = run_to(&run, &["--set", &set]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("q99") || String::from_utf8_lossy(&out.stdout).contains("1 questions failed"));
    assert_eq!(fs::read_to_string(&run).unwrap().lines().count(), 12);
}

#[test]
fn evaluate_rejects_questions_missing_from_judgments() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("r.jsonl");
    assert!(run_to(&run, &[]).status.success());
    let partial = dir.path().join("q.jsonl");
    let head: Vec<&str> = include_str!("../../core/tests/fixtures/planted/questions.jsonl").lines().take(3).collect();
    fs::write(&partial, head.join("\n")).unwrap();
    let out = cqa(&["evaluate", "-r", s(&run), "--questions", s(&partial)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("q04"));
}

#[test]
fn evaluate_writes_summary_significance_and_diffs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    assert!(run_to(&a, &[]).status.success());
    assert!(run_to(&b, &["--set", "classifier=external-embedding"]).status.success());
    let summary = dir.path().join("summary.csv");
    let sig = dir.path().join("sig.csv");
    let diffs = dir.path().join("diffs");
    let qs = fixtures().join("questions.jsonl");
    let ra = format!("svm={}", s(&a));
    let rb = format!("emb={}", s(&b));
    let out = cqa(&[
        "evaluate", "-r", &ra, "-r", &rb, "--questions", s(&qs), "-o", s(&summary), "--significance", s(&sig), "--diff-dir", s(&diffs),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = csv_rows(&fs::read_to_string(&summary).unwrap());
    assert_eq!(rows.len(), 3);
    assert_eq!(column(&rows, 1, "run_id"), "svm");
    assert_eq!(column(&rows, 1, "tP@1"), "1.0000");
    assert!(fs::read_to_string(&sig).unwrap().lines().count() > 1);
    assert!(fs::read_dir(&diffs).unwrap().count() > 0);
}

#[test]
fn single_ablation_row_matches_run_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config();
    let overrides = ["--set", "classifier=external-embedding", "--set", "aggregation=avg_max"];
    let csv = dir.path().join("ablation.csv");
    let mut args = vec!["ablate", "-c", s(&cfg), "--single", "-o", s(&csv)];
    args.extend_from_slice(&overrides);
    let out = cqa(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let ablation = csv_rows(&fs::read_to_string(&csv).unwrap());
    assert_eq!(ablation.len(), 2);

    let run = dir.path().join("r.jsonl");
    assert!(run_to(&run, &overrides).status.success());
    let qs = fixtures().join("questions.jsonl");
    let out = cqa(&["evaluate", "-r", s(&run), "--questions", s(&qs)]);
    assert!(out.status.success());
    let summary = csv_rows(&String::from_utf8(out.stdout).unwrap());
    for metric in ["tMRR", "tP@1", "tHit@5", "MRR", "P@1", "Hit@5", "config_id"] {
        assert_eq!(column(&ablation, 1, metric), column(&summary, 1, metric), "{metric}");
    }
}

#[test]
fn sample_strata_draws_band_counts() {
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("ranked.jsonl");
    let mut text = String::new();
    for q in ["a", "b"] {
        for rank in 1..=50 {
            text.push_str(&format!("{{\"question_id\": \"{q}\", \"rank\": {rank}, \"text\": \"Document {rank}.\"}}\n"));
        }
    }
    fs::write(&docs, text).unwrap();
    let out_path = dir.path().join("sampled.jsonl");
    let out = cqa(&["sample-strata", "-d", s(&docs), "--collection", "Strata-3", "--seed", "9", "-o", s(&out_path)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let sampled = fs::read_to_string(&out_path).unwrap();
    for q in ["a", "b"] {
        let ranks: Vec<u64> = sampled
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
            .filter(|v| v["question_id"] == q)
            .map(|v| v["original_rank"].as_u64().or(v["rank"].as_u64()).unwrap())
            .collect();
        assert_eq!(ranks.len(), 10);
        let band = |lo, hi| ranks.iter().filter(|r| (lo..=hi).contains(*r)).count();
        assert_eq!((band(1, 10), band(11, 25), band(26, 50)), (5, 3, 2));
    }

    let again = dir.path().join("again.jsonl");
    assert!(cqa(&["sample-strata", "-d", s(&docs), "--collection", "Strata-3", "--seed", "9", "-o", s(&again)]).status.success());
    assert_eq!(fs::read(&out_path).unwrap(), fs::read(&again).unwrap());

    let bad = cqa(&["sample-strata", "-d", s(&docs), "--collection", "Strata-9"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn train_qc_reports_accuracy_and_saves_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let training = fixtures().join("qc_train.txt");
    let cfg = config();
    let out = cqa(&["train-qc", "-t", s(&training), "-c", s(&cfg), "--seed", "3", "-o", s(&model)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["coarse_accuracy"].as_f64().unwrap() >= report["majority_accuracy"].as_f64().unwrap());

    // the saved model drives a run in place of on-the-fly training
    let set = format!("paths.qc_model={}", s(&model));
    let run = dir.path().join("r.jsonl");
    let out = run_to(&run, &["--set", &set]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}
