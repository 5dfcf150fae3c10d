mod support;

use std::fs;

use fdscope_core::report::Report;
use fdscope_core::synth::{anomaly_fixture, dedup_fixture};
use serde_json::{json, Value};
use support::{run, stderr, stdout, Served};

const PEOPLE: &str = "name,city,zip,age\n\
ann,oslo,0150,31\n\
bob,oslo,0150,45\n\
cid,rome,00100,45\n\
dan,rome,00100,27\n\
eve,lima,15001,31\n\
ann,lima,15002,31\n";

fn write(dir: &tempfile::TempDir, name: &str, body: impl AsRef<[u8]>) -> String {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn exit_status_contract() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(&dir, "people.csv", PEOPLE);

    let o = run(&["discover", "fd", "--max-lhs", "3", &csv]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let o = run(&["validate", "mfd", "--lhs", "city", "--rhs", "age", "--metric", "euclidean", "-p", "5", &csv]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("VIOLATED"));
    let o = run(&["validate", "mfd", "--lhs", "city", "--rhs", "age", "-p", "18", &csv]);
    assert_eq!(o.status.code(), Some(0));

    let o = run(&["discover", "afd", "--threshold", "-1", &csv]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--threshold"), "{}", stderr(&o));

    let o = run(&["validate", "mfd", "--lhs", "city", "--rhs", "age", "--metric", "levenshtein", &csv]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--metric"));

    let o = run(&["discover", "fd", "--bogus", &csv]);
    assert_eq!(o.status.code(), Some(2));

    let missing = dir.path().join("missing.csv");
    let o = run(&["discover", "fd", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.csv"));
}

#[test]
fn json_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(&dir, "people.csv", PEOPLE);
    for args in [
        vec!["discover", "fd"],
        vec!["discover", "afd", "--threshold", "1/5"],
        vec!["validate", "mfd", "--lhs", "city", "--rhs", "name", "-p", "3"],
        vec!["scenario", "typo", "--threshold", "0.2"],
        vec!["scenario", "dedup", "-k", "2", "--auto", "keep-first"],
    ] {
        let mut full = vec!["--output", "json"];
        full.extend(&args);
        full.push(&csv);
        let o = run(&full);
        assert!(o.status.code().unwrap() <= 1, "{args:?}: {}", stderr(&o));
        let report: Report = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(report.to_json(), o.stdout, "{args:?}");
    }
}

#[test]
fn human_rendering() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(&dir, "u.csv", "a\n1\n2\n3\n");
    let o = run(&["discover", "fd", &csv]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("no dependencies found"));

    let typo = "city_id,city\n1,berlin\n1,berlin\n1,berlin\n1,berlni\n2,paris\n2,paris\n2,paris\n";
    let csv = write(&dir, "t.csv", typo);
    let args = ["scenario", "typo", "--threshold", "0.5", "--max-lhs", "1", "--invert-display", &csv];
    let a = run(&args);
    let b = run(&args);
    let text = stdout(&a);
    assert_eq!(text, stdout(&b));
    let central = text.lines().find(|l| l.contains("berlin")).expect("central value listed");
    assert!(central.contains('*'), "{text}");
    assert!(!text.lines().find(|l| l.contains("berlni")).unwrap().contains('*'));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(&dir, "people.csv", PEOPLE.replace(',', ";"));
    let cfg = write(&dir, "fdscope.toml", "output = \"json\"\n[csv]\nseparator = \";\"\n[fd]\nmax_lhs = 1\n");
    let o = run(&["--config", &cfg, "discover", "fd", &csv]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["max_lhs"], 1);
    assert_eq!(v["dataset"]["attributes"].as_array().unwrap().len(), 4);

    let o = run(&["--config", &cfg, "discover", "fd", "--max-lhs", "2", &csv]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["max_lhs"], 2);

    let bad = write(&dir, "bad.toml", "[fd]\nmax_lhz = 1\n");
    let o = run(&["--config", &bad, "discover", "fd", &csv]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("max-lhz"), "{}", stderr(&o));
    let bad = write(&dir, "bad2.toml", "[fdd]\n");
    let o = run(&["--config", &bad, "discover", "fd", &csv]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dedup_auto_mode_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let f = dedup_fixture(3, 60, 10);
    let csv = write(&dir, "d.csv", f.relation.to_csv(',', "").unwrap());
    let mut journals = Vec::new();
    for i in 0..2 {
        let journal = dir.path().join(format!("j{i}.json"));
        let out = dir.path().join(format!("out{i}.csv"));
        let o = run(&[
            "--output",
            "json",
            "scenario",
            "dedup",
            "--window",
            "5",
            "-k",
            "3",
            "--auto",
            "keep-first",
            "--journal",
            journal.to_str().unwrap(),
            "--output-csv",
            out.to_str().unwrap(),
            &csv,
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        let remaining = v["outcome"]["remaining_rows"].as_u64().unwrap() as usize;
        let lines = fs::read_to_string(&out).unwrap().lines().count();
        assert_eq!(lines, remaining + 1);
        journals.push(fs::read(&journal).unwrap());
    }
    assert_eq!(journals[0], journals[1]);
    let j: Vec<Value> = serde_json::from_slice(&journals[0]).unwrap();
    assert!(!j.is_empty());
    assert!(j.iter().all(|r| r["keep"] == r["pair"]["row_a"]));
}

#[test]
fn answers_file_matches_the_http_session() {
    let dir = tempfile::tempdir().unwrap();
    let f = dedup_fixture(8, 40, 8);
    let bytes = f.relation.to_csv(',', "").unwrap();
    let csv = write(&dir, "d.csv", &bytes);
    let answers = write(&dir, "answers.txt", "a\nb city\na\nu\n");
    let journal = dir.path().join("journal.json");
    let o = run(&[
        "scenario",
        "dedup",
        "--window",
        "3",
        "--answers",
        &answers,
        "--journal",
        journal.to_str().unwrap(),
        &csv,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cli_journal: Value = serde_json::from_slice(&fs::read(&journal).unwrap()).unwrap();
    assert_eq!(cli_journal.as_array().unwrap().len(), 2);

    let root = tempfile::tempdir().unwrap();
    let s = Served::start(root.path());
    let ds = s.upload(&bytes, "d");
    let task = s.submit("scenario_dedup", &ds, json!({"window": 3}));
    assert_eq!(s.wait(&task)["status"], "completed");
    for keep_second in [false, true, false] {
        let (_, v) = s.post(&format!("/dedup/{task}/propose"), json!({}));
        let p = &v["proposal"];
        let keep = if keep_second { &p["row_b"] } else { &p["row_a"] };
        let copy: Vec<&str> = if keep_second { vec!["city"] } else { vec![] };
        let (st, _) = s.post(
            &format!("/dedup/{task}/decide"),
            json!({"row_a": p["row_a"], "row_b": p["row_b"], "keep": keep, "copy_attrs": copy}),
        );
        assert_eq!(st, 200);
    }
    s.post(&format!("/dedup/{task}/undo"), json!({}));
    let (st, fin) = s.post(&format!("/dedup/{task}/finish"), json!({}));
    assert_eq!(st, 201);
    let (_, v) = s.get(&format!("/dedup/{task}/state"));
    assert_eq!(v["journal"], cli_journal);
    assert_eq!(fin["dataset"]["rows"], v["remaining_rows"]);
}

#[test]
fn anomaly_state_carries_between_runs() {
    let dir = tempfile::tempdir().unwrap();
    let f = anomaly_fixture(2, 24, 5);
    let p1 = write(&dir, "p1.csv", f.first.to_csv(',', "").unwrap());
    let p2 = write(&dir, "p2.csv", f.second.to_csv(',', "").unwrap());
    let state = dir.path().join("state.json");
    let state = state.to_str().unwrap();

    let o = run(&["--output", "json", "scenario", "anomaly", "-d", "10", "--state", state, &p1, &p2]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let lost = v["partitions"][0]["lost"].as_array().unwrap();
    assert_eq!(lost.len(), 1);
    assert_eq!(lost[0]["sweep_p"], 5.0);
    let saved: Value = serde_json::from_slice(&fs::read(state).unwrap()).unwrap();
    assert_eq!(saved["history"].as_array().unwrap().len(), 2);

    // The first run accepted nothing, so p2 is still compared with the p1 baseline.
    let o = run(&["--output", "json", "scenario", "anomaly", "-d", "10", "--accept", "--state", state, &p2]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["partitions"][0]["lost"].as_array().unwrap().len(), 1);
    assert_eq!(v["canonical_mfds"].as_array().unwrap().len(), 1);
    let saved: Value = serde_json::from_slice(&fs::read(state).unwrap()).unwrap();
    assert_eq!(saved["history"].as_array().unwrap().len(), 3);

    let o = run(&["scenario", "anomaly", &p1]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn serve_needs_a_storage_root() {
    let o = support::fdscope()
        .args(["serve", "--addr", "127.0.0.1:0"])
        .env_remove("FDSCOPE_STORAGE")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("FDSCOPE_STORAGE"));
}

#[test]
fn cli_json_equals_the_stored_service_report() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(&dir, "people.csv", PEOPLE);
    let root = tempfile::tempdir().unwrap();
    let s = Served::start(root.path());
    let ds = s.upload(PEOPLE.as_bytes(), "people");
    for (kind, params, args) in [
        ("fd_discovery", json!({"max_lhs": 2}), vec!["discover", "fd", "--max-lhs", "2"]),
        ("afd_discovery", json!({"threshold": "1/5"}), vec!["discover", "afd", "--threshold", "1/5"]),
        ("scenario_typo", json!({"threshold": 0.2}), vec!["scenario", "typo", "--threshold", "0.2"]),
    ] {
        let task = s.submit(kind, &ds, params);
        assert_eq!(s.wait(&task)["status"], "completed");
        let stored = Served::client()
            .get(format!("{}/tasks/{task}/report", s.base))
            .send()
            .unwrap()
            .bytes()
            .unwrap();
        let mut full = vec!["--output", "json"];
        full.extend(&args);
        full.push(&csv);
        let o = run(&full);
        assert_eq!(o.stdout, stored.to_vec(), "{kind}");
    }
}
