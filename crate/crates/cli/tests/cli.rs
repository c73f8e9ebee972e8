use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Output};

fn liveeval(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liveeval"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = liveeval(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails_with(dir: &Path, args: &[&str], code: i32, needle: &str) {
    let out = liveeval(dir, args);
    assert_eq!(out.status.code(), Some(code), "{args:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(needle), "{args:?}: {stderr}");
}

fn model(i: usize) -> String {
    format!("model-{i:02}")
}

/// Outcomes for `models` on `samples` of version `t` from a fixed pattern in
/// which higher-numbered models and lower-numbered samples do better.
fn outcome_rows(t: usize, models: &[usize], samples: &[String], out: &mut String) {
    for &i in models {
        for (j, s) in samples.iter().enumerate() {
            let correct = (i * 5 + 40) > (j * 7 + i * 3) % 97 + 30;
            let _ = writeln!(out, "{t},{},{s},{}", model(i), u8::from(correct));
        }
    }
}

#[test]
fn init_ingest_and_score() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["store", "init", "--path", "s.json"]);
    assert_eq!(
        std::fs::read_to_string(d.join("s.json")).unwrap().trim(),
        "{\n  \"versions\": [],\n  \"outcomes\": []\n}"
    );
    fails_with(
        d,
        &["store", "init", "--path", "s.json"],
        2,
        "already exists",
    );

    ok(
        d,
        &[
            "--store",
            "s.json",
            "store",
            "add-version",
            "--samples",
            "a,b,c",
            "--new-models",
            "A,B",
        ],
    );
    std::fs::write(
        d.join("out.csv"),
        "version,model_id,sample_id,correct\n0,A,a,1\n0,A,b,1\n0,B,a,0\n",
    )
    .unwrap();
    assert_eq!(
        ok(
            d,
            &["--store", "s.json", "store", "ingest", "--file", "out.csv"]
        )
        .trim(),
        "3"
    );
    fails_with(
        d,
        &[
            "--store",
            "s.json",
            "store",
            "score",
            "--model",
            "A",
            "--version",
            "0",
        ],
        2,
        "not fully evaluated",
    );
    fails_with(d, &["--store", "s.json", "store", "seal"], 2, "missing");

    std::fs::write(
        d.join("more.csv"),
        "version,model_id,sample_id,correct\n0,A,c,0\n0,B,b,1\n0,B,c,1\n",
    )
    .unwrap();
    assert_eq!(
        ok(
            d,
            &["--store", "s.json", "store", "ingest", "--file", "more.csv"]
        )
        .trim(),
        "3"
    );
    ok(d, &["--store", "s.json", "store", "seal"]);
    assert_eq!(
        ok(
            d,
            &[
                "--store",
                "s.json",
                "store",
                "score",
                "--model",
                "A",
                "--version",
                "0"
            ]
        )
        .trim(),
        "A,66.7"
    );

    std::fs::write(
        d.join("bad.csv"),
        "version,model_id,sample_id,correct\n0,A,a,maybe\n",
    )
    .unwrap();
    fails_with(
        d,
        &["--store", "s.json", "store", "ingest", "--file", "bad.csv"],
        2,
        "line 2",
    );
}

#[test]
fn fit_plan_estimate_round() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["store", "init"]);
    fails_with(d, &["fit"], 2, "no versions");

    let v0: Vec<String> = (0..40).map(|j| format!("old-{j:02}")).collect();
    let roster: Vec<String> = (0..17).map(model).collect();
    ok(
        d,
        &[
            "store",
            "add-version",
            "--samples",
            &v0.join(","),
            "--new-models",
            &roster.join(","),
        ],
    );
    let mut rows = String::from("version,model_id,sample_id,correct\n");
    outcome_rows(0, &(0..17).collect::<Vec<_>>(), &v0, &mut rows);
    std::fs::write(d.join("v0.csv"), &rows).unwrap();
    ok(d, &["store", "ingest", "--file", "v0.csv"]);

    let fit_out = ok(d, &["fit", "--out", "fit.json"]);
    assert!(fit_out.contains("converged: true"), "{fit_out}");
    let first = std::fs::read(d.join("fit.json")).unwrap();
    ok(d, &["fit", "--out", "fit.json"]);
    assert_eq!(first, std::fs::read(d.join("fit.json")).unwrap());

    let board = ok(
        d,
        &[
            "estimate",
            "--fit",
            "fit.json",
            "--version",
            "0",
            "--out",
            "b0.csv",
        ],
    );
    assert!(board.contains("17 observed, 0 estimated"), "{board}");

    fails_with(
        d,
        &["plan", "--fit", "fit.json", "--budget", "0"],
        2,
        "budget",
    );
    fails_with(d, &["plan", "--fit", "missing.json"], 2, "missing.json");
    ok(
        d,
        &[
            "plan",
            "--fit",
            "fit.json",
            "--budget",
            "3",
            "--out",
            "plan3.json",
        ],
    );
    let plan3: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("plan3.json")).unwrap()).unwrap();
    assert_eq!(plan3["anchors"].as_array().unwrap().len(), 3);

    ok(
        d,
        &[
            "plan",
            "--fit",
            "fit.json",
            "--budget",
            "5",
            "--out",
            "plan.json",
        ],
    );
    let plan: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("plan.json")).unwrap()).unwrap();
    let chosen: Vec<String> = plan["chosen_models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m.as_str().unwrap().to_owned())
        .collect();
    assert_eq!(chosen.len(), 5);
    assert_eq!(
        chosen
            .iter()
            .collect::<std::collections::BTreeSet<_>>()
            .len(),
        5
    );

    let v1: Vec<String> = (0..30).map(|j| format!("new-{j:02}")).collect();
    ok(
        d,
        &[
            "store",
            "add-version",
            "--samples",
            &v1.join(","),
            "--plan",
            "plan.json",
        ],
    );
    let idx: Vec<usize> = chosen.iter().map(|m| m[6..].parse().unwrap()).collect();
    let mut rows = String::from("version,model_id,sample_id,correct\n");
    outcome_rows(1, &idx, &v1, &mut rows);
    std::fs::write(d.join("v1.csv"), &rows).unwrap();
    ok(d, &["store", "ingest", "--file", "v1.csv"]);
    ok(d, &["store", "seal", "--version", "1"]);
    ok(d, &["fit", "--out", "fit1.json"]);
    let board = ok(
        d,
        &[
            "leaderboard",
            "--fit",
            "fit1.json",
            "--version",
            "1",
            "--out",
            "b1.csv",
        ],
    );
    assert!(board.contains("5 observed, 12 estimated"), "{board}");
    let csv = std::fs::read_to_string(d.join("b1.csv")).unwrap();
    assert_eq!(
        csv.lines().filter(|l| l.ends_with(",estimated")).count(),
        12
    );
    assert_eq!(
        csv.lines().next(),
        Some("model_id,score_percent,provenance")
    );
}

fn write_questions(dir: &Path) {
    let mut text = String::new();
    for k in 0..10 {
        let q = serde_json::json!({
            "id": format!("q{k}"),
            "question_text": format!("What does figure {k} show?"),
            "options": ["growth", "decline", "no change", "a cycle"],
            "correct_index": k % 4,
            "media_ref": format!("fig{k}.png"),
        });
        text.push_str(&q.to_string());
        text.push('\n');
    }
    std::fs::write(dir.join("q.jsonl"), text).unwrap();
}

#[test]
fn filter_with_mock_judges() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_questions(d);
    fails_with(
        d,
        &[
            "filter",
            "blind",
            "--questions",
            "q.jsonl",
            "--mock",
            "oracle",
        ],
        2,
        "--seed",
    );
    let summary = ok(
        d,
        &[
            "filter",
            "blind",
            "--questions",
            "q.jsonl",
            "--mock",
            "oracle",
            "--seed",
            "1",
            "--out",
            "r.json",
        ],
    );
    assert!(summary.contains("removed_blind 10"), "{summary}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["removed_blind"], 10);
    assert_eq!(report["retained"], 0);

    let first = std::fs::read(d.join("r.json")).unwrap();
    ok(
        d,
        &[
            "filter",
            "blind",
            "--questions",
            "q.jsonl",
            "--mock",
            "oracle",
            "--seed",
            "1",
            "--out",
            "r.json",
        ],
    );
    assert_eq!(first, std::fs::read(d.join("r.json")).unwrap());

    let summary = ok(
        d,
        &[
            "filter",
            "agreement",
            "--questions",
            "q.jsonl",
            "--mock",
            "even",
            "--out",
            "a.json",
            "--kept",
            "kept.jsonl",
        ],
    );
    assert!(
        summary.contains("removed_agreement 5 retained 5"),
        "{summary}"
    );
    assert_eq!(
        std::fs::read_to_string(d.join("kept.jsonl"))
            .unwrap()
            .lines()
            .count(),
        5
    );
    fails_with(
        d,
        &["filter", "agreement", "--questions", "q.jsonl"],
        2,
        "endpoint",
    );
}

#[test]
fn simulate_sweep_and_seed_requirement() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fails_with(d, &["simulate"], 2, "--seed");

    let out = ok(d, &["simulate", "--seed", "3", "--out-dir", "run"]);
    let table: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(table[0], "domain,mae_points,mad_points");
    assert_eq!(
        table.iter().filter(|l| l.starts_with("domain-")).count(),
        10
    );
    assert!(table[11].starts_with("overall,"));
    assert!(out.contains("saving 70.6%"), "{out}");
    let summary = std::fs::read(d.join("run/summary.json")).unwrap();
    ok(d, &["simulate", "--seed", "3", "--out-dir", "run"]);
    assert_eq!(summary, std::fs::read(d.join("run/summary.json")).unwrap());

    let sweep = ok(
        d,
        &[
            "sweep",
            "--budgets",
            "3,5,8",
            "--seed",
            "2",
            "--samples-per-domain",
            "100",
        ],
    );
    assert_eq!(
        sweep.lines().filter(|l| l.starts_with("# budget")).count(),
        3
    );

    std::fs::write(
        d.join("c.toml"),
        "[sim]\nseed = 4\nsamples_per_domain = 80\n[planner]\nbudget = 3\n",
    )
    .unwrap();
    let from_config = ok(d, &["--config", "c.toml", "simulate"]);
    assert!(from_config.contains("budget 3"), "{from_config}");
    std::fs::write(d.join("bad.toml"), "[sim]\nseeed = 4\n").unwrap();
    fails_with(d, &["--config", "bad.toml", "simulate"], 2, "seeed");
}
