use std::path::Path;
use std::process::{Command, Output};

fn qgharvest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgharvest"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gradcheck_passes_and_reports_error() {
    let o = qgharvest(&["gradcheck", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("max rel error"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(qgharvest(&["stats", "--bogus"]).status.code(), Some(2));
    assert_eq!(qgharvest(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn harvest_with_missing_checkpoint_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let articles = dir.path().join("a.txt");
    std::fs::write(&articles, "Tesla died in 1943.").unwrap();
    let o = qgharvest(&[
        "harvest",
        "--articles",
        p(&articles),
        "--extractor",
        p(&dir.path().join("missing.ckpt")),
        "--qg",
        p(&dir.path().join("missing-too.ckpt")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not found"));
}

#[test]
fn eval_qg_on_identical_files_gives_perfect_bleu() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("q.txt");
    std::fs::write(&f, "when did nikola tesla die ?\nhow many temples does kyoto have ?\n").unwrap();
    let report = dir.path().join("r.json");
    let o = qgharvest(&["eval-qg", "--candidates", p(&f), "--references", p(&f), "--out", p(&report)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("BLEU-4       1.0000"), "{}", stdout(&o));
    assert!(stdout(&o).contains("METEOR: not implemented"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(json["bleu"][3]["bleu"], 1.0);
}

#[test]
fn eval_qg_floor_violation_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (c, r, floors) = (dir.path().join("c"), dir.path().join("r"), dir.path().join("f.json"));
    std::fs::write(&c, "who won ?\n").unwrap();
    std::fs::write(&r, "when did it end ?\n").unwrap();
    std::fs::write(&floors, r#"{"bleu1": 0.9}"#).unwrap();
    let o = qgharvest(&["eval-qg", "--candidates", p(&c), "--references", p(&r), "--config", p(&floors)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn stats_counts_question_types() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("q.txt");
    std::fs::write(&f, "When did it happen?\nWho won?\nWhen was it built?\n").unwrap();
    let o = qgharvest(&["stats", "--questions", p(&f)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let line = |k: &str| text.lines().find(|l| l.starts_with(&format!("{k} "))).unwrap().split_whitespace().nth(1).unwrap().to_string();
    assert_eq!(line("when"), "2");
    assert_eq!(line("who"), "1");
    assert_eq!(line("total"), "3");
}

#[test]
fn unknown_config_field_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qgharvest(&["desk-corpus", "--out", p(dir.path())]).status.code(), Some(0));
    let cfg = dir.path().join("qg.json");
    std::fs::write(&cfg, r#"{"epochs": 1, "colour": "red"}"#).unwrap();
    let o = qgharvest(&[
        "train-qg",
        "--train",
        p(&dir.path().join("desk.squad.json")),
        "--config",
        p(&cfg),
        "--out",
        p(&dir.path().join("qg.ckpt")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_and_harvest_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name);
    assert_eq!(qgharvest(&["desk-corpus", "--out", p(dir.path())]).status.code(), Some(0));
    std::fs::write(d("qg.json"), r#"{"epochs": 3, "word_dim": 8, "encoder_hidden": 8}"#).unwrap();
    std::fs::write(d("ext.json"), r#"{"epochs": 2, "hidden": 8}"#).unwrap();
    let squad = d("desk.squad.json");

    for run in ["a", "b"] {
        let qg = d(&format!("qg-{run}.ckpt"));
        let ext = d(&format!("ext-{run}.ckpt"));
        let o = qgharvest(&["train-qg", "--train", p(&squad), "--config", p(&d("qg.json")), "--seed", "3", "--out", p(&qg), "--log", p(&d("log.csv"))]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let o = qgharvest(&["train-ext", "--train", p(&squad), "--config", p(&d("ext.json")), "--seed", "3", "--out", p(&ext)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let o = qgharvest(&[
            "harvest",
            "--articles",
            p(&d("desk-qg.txt")),
            "--extractor",
            p(&ext),
            "--qg",
            p(&qg),
            "--out",
            p(&d(&format!("out-{run}.jsonl"))),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(d("qg-a.ckpt")).unwrap(), std::fs::read(d("qg-b.ckpt")).unwrap());
    assert_eq!(std::fs::read(d("out-a.jsonl")).unwrap(), std::fs::read(d("out-b.jsonl")).unwrap());
    assert_eq!(std::fs::read_to_string(d("log.csv")).unwrap().lines().count(), 4);

    let o = qgharvest(&["eval-ext", "--model", p(&d("ext-a.ckpt")), "--data", p(&squad), "--predictions", p(&d("pred.jsonl"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("proportional"));
}
