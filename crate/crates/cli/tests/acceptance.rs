//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the console; exits non-zero if any
//! criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;
mod support;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Stdio;
use std::time::{Duration, Instant};

use common::*;
use fdscope_core::mfd::{validate_mfd, Metric, MfdStatement};
use fdscope_core::scenario::anomaly::{fd_diff, mfd_sweep, SweepConfig};
use fdscope_core::scenario::typo::{mine_almost_fds, violation_clusters, TypoConfig};
use fdscope_core::synth::{anomaly_fixture, dedup_fixture, typo_fixture, wide_relation};
use fdscope_core::task::{dedup_scan, DedupParams};
use fdscope_core::{discover_fds, g1_error, AttrSet, ExecConfig, Fd, Relation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use support::{fdscope, Served};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fd_oracle() -> Outcome {
    let exec = ExecConfig::default();
    let mut fds = 0;
    let tables = 250;
    for seed in 0..tables {
        let r = random_relation(10_000 + seed, 6, 30, 0.0);
        let m = r.attribute_count();
        let got: Vec<(AttrSet, usize)> = discover_fds(&r, m, &exec)
            .map_err(|e| e.to_string())?
            .fds()
            .iter()
            .map(|f| (f.lhs, f.rhs))
            .collect();
        let expected = brute_force_minimal(m, m, |x, a| violating_pairs(&r, x, a) == 0);
        ensure!(got == expected, "seed {seed}: engine {got:?} oracle {expected:?}");
        fds += got.len();
    }
    Ok(format!("{tables} tables, {fds} minimal FDs identical"))
}

fn g1_equivalence() -> Outcome {
    let tables = 120;
    let mut checked = 0;
    for seed in 0..tables {
        let r = random_relation(20_000 + seed, 4, 200, 0.05);
        let m = r.attribute_count();
        for rhs in 0..m {
            for lhs in lhs_candidates(m, rhs, m) {
                let fd = Fd::new(lhs, rhs);
                let (got, want) = (g1_error(&r, &fd), pairwise_g1(&r, lhs, rhs));
                ensure!(got == want, "seed {seed} {fd:?}: {got} vs {want}");
                checked += 1;
            }
        }
    }
    Ok(format!("{tables} tables, {checked} candidates, exact rationals equal"))
}

fn numeric_relation(rng: &mut ChaCha8Rng, n: usize, floats: bool) -> Relation {
    let rows = (0..n)
        .map(|_| {
            let mut num = || {
                if floats {
                    format!("{:.4}", rng.gen_range(-100.0..100.0))
                } else {
                    rng.gen_range(-30i64..30).to_string()
                }
            };
            let (x, y) = (num(), num());
            vec![
                Some(rng.gen_range(0..10).to_string()),
                Some(rng.gen_range(0..3).to_string()),
                Some(x),
                Some(y),
            ]
        })
        .collect();
    Relation::from_cells(vec!["g".into(), "h".into(), "x".into(), "y".into()], rows, false).unwrap()
}

fn l2(r: &Relation, a: usize, b: usize, rhs: &[usize]) -> f64 {
    rhs.iter()
        .map(|&c| {
            let d = r.value(a, c).as_f64().unwrap() - r.value(b, c).as_f64().unwrap();
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn mfd_equivalence() -> Outcome {
    let exec = ExecConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(30_000);
    let mut clusters = 0;
    for round in 0..24 {
        let floats = round % 2 == 1;
        let n = rng.gen_range(2..=300);
        let r = numeric_relation(&mut rng, n, floats);
        let lhs: AttrSet = if rng.gen_bool(0.5) { AttrSet::single(0) } else { [0, 1].into_iter().collect() };
        let rhs = if rng.gen_bool(0.5) { vec![2] } else { vec![2, 3] };
        let stmt = MfdStatement { lhs, rhs: rhs.clone(), metric: Metric::Euclidean, p: 0.0 };
        let v = validate_mfd(&r, &stmt, &exec).map_err(|e| e.to_string())?;
        let tol = if floats { 1e-9 } else { 0.0 };
        let close = |a: f64, b: f64| (a - b).abs() <= tol * a.abs().max(b.abs());
        let mut want_global = 0.0f64;
        let groups = group_rows(&r, lhs);
        let mut want: Vec<(Vec<u32>, f64)> = Vec::new();
        for rows in &groups {
            let mut d = 0.0f64;
            for (i, &a) in rows.iter().enumerate() {
                for &b in &rows[i + 1..] {
                    d = d.max(l2(&r, a, b, &rhs));
                }
            }
            want_global = want_global.max(d);
            if d > 0.0 {
                want.push((rows.iter().map(|&x| x as u32).collect(), d));
            }
        }
        let mut got: Vec<(Vec<u32>, f64)> = v
            .violating_clusters
            .iter()
            .map(|c| (c.rows.clone(), c.diameter.unwrap()))
            .collect();
        got.sort_by(|a, b| a.0.cmp(&b.0));
        want.sort_by(|a, b| a.0.cmp(&b.0));
        ensure!(got.len() == want.len(), "round {round}: {} clusters vs {}", got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            ensure!(g.0 == w.0 && close(g.1, w.1), "round {round}: {g:?} vs {w:?}");
        }
        let global = v.global_diameter.unwrap_or(0.0);
        ensure!(close(global, want_global), "round {round}: global {global} vs {want_global}");
        clusters += got.len();
    }

    let statements = 1000;
    for i in 0..statements {
        let n = rng.gen_range(2..=60);
        let r = numeric_relation(&mut rng, n, i % 2 == 0);
        let lhs = AttrSet::single(rng.gen_range(0..2));
        let rhs = if rng.gen_bool(0.5) { vec![2] } else { vec![2, 3] };
        let (p1, p2) = {
            let a = rng.gen_range(0.0..150.0);
            let b = rng.gen_range(0.0..150.0);
            (f64::min(a, b), f64::max(a, b))
        };
        let at = |p: f64| {
            let stmt = MfdStatement { lhs, rhs: rhs.clone(), metric: Metric::Euclidean, p };
            validate_mfd(&r, &stmt, &exec).map(|v| v.holds)
        };
        let (h1, h2) = (at(p1).map_err(|e| e.to_string())?, at(p2).map_err(|e| e.to_string())?);
        ensure!(!h1 || h2, "statement {i}: holds at {p1} but not at {p2}");
    }
    Ok(format!("24 fixtures ({clusters} violating clusters) match pairwise scans; {statements} statements monotone in p"))
}

fn typo_recall() -> Outcome {
    let f = typo_fixture(40_000, 1000, 0.05);
    let oracle_g1 = pairwise_g1(&f.relation, f.planted.lhs, f.planted.rhs);
    ensure!(oracle_g1 == f.induced_g1, "fixture g1 {} but pairwise {}", f.induced_g1, oracle_g1);
    let cfg = TypoConfig {
        threshold: f.induced_g1,
        ..TypoConfig::default()
    };
    let afds = mine_almost_fds(&f.relation, &cfg, &ExecConfig::default()).map_err(|e| e.to_string())?;
    ensure!(afds.iter().any(|a| a.fd == f.planted), "planted AFD not surfaced");
    let clusters = violation_clusters(&f.relation, &f.planted).map_err(|e| e.to_string())?;
    let mut recalled = 0;
    for plant in &f.plants {
        let hit = clusters.iter().find_map(|c| {
            c.members
                .iter()
                .find(|m| m.row as usize == plant.row)
                .map(|m| (c, m))
        });
        let Some((c, m)) = hit else {
            return Err(format!("row {} is in no violation cluster", plant.row));
        };
        let central = c.central.value.as_str().unwrap_or_default();
        let d = edit_distance(central, &plant.perturbed);
        ensure!(d <= 2, "row {}: distance {d} from central {central:?}", plant.row);
        ensure!(m.distance == Some(d as f64), "row {}: reported distance {:?} vs {d}", plant.row, m.distance);
        recalled += 1;
    }
    ensure!(recalled == f.plants.len(), "recall {recalled}/{}", f.plants.len());
    Ok(format!(
        "n=1000, {} perturbed rows, threshold g1={}, recall 1.0",
        f.plants.len(),
        f.induced_g1
    ))
}

fn normalized(r: &Relation, row: usize, attr: usize) -> Option<String> {
    r.token(row, attr).map(|t| t.trim().to_lowercase())
}

fn dedup_recall() -> Outcome {
    let exec = ExecConfig::default();
    let f = dedup_fixture(50_000, 400, 50);
    ensure!(f.plants.len() == 50, "fixture planted {}", f.plants.len());
    ensure!(
        f.plants.iter().all(|p| p.perturbed_attrs.len() <= 2),
        "a plant perturbs more than two attributes"
    );
    let window = 3;
    let report = dedup_scan(&f.relation, &DedupParams { window, ..DedupParams::default() }, &exec)
        .map_err(|e| e.to_string())?;
    let m = f.relation.attribute_count();
    ensure!(report.config.k == m - 2, "k = {} but m - 2 = {}", report.config.k, m - 2);
    let found: BTreeSet<(u32, u32)> = report.pairs.iter().map(|p| (p.row_a, p.row_b)).collect();
    let missing: Vec<_> = f.planted_pairs().difference(&found).copied().collect();
    ensure!(missing.is_empty(), "missing planted pairs {missing:?}");

    let small = dedup_fixture(50_001, 80, 20);
    let r = &small.relation;
    let n = r.row_count();
    let params = DedupParams {
        window: n,
        ..DedupParams::default()
    };
    let scan = dedup_scan(r, &params, &exec).map_err(|e| e.to_string())?;
    let got: Vec<(u32, u32, Vec<usize>)> = scan.pairs.into_iter().map(|p| (p.row_a, p.row_b, p.matched_attrs)).collect();
    let mut expected = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let attrs: Vec<usize> = (0..r.attribute_count())
                .filter(|&c| normalized(r, a, c).is_some() && normalized(r, a, c) == normalized(r, b, c))
                .collect();
            if attrs.len() >= scan.config.k {
                expected.push((a as u32, b as u32, attrs));
            }
        }
    }
    ensure!(got == expected, "window = n found {} pairs, exhaustive {}", got.len(), expected.len());
    Ok(format!(
        "50/50 planted pairs found (window {window}, k {}); window = n equals exhaustive ({} pairs)",
        report.config.k,
        expected.len()
    ))
}

fn anomaly_fixture_check() -> Outcome {
    let exec = ExecConfig::default();
    let f = anomaly_fixture(60_000, 24, 5);
    let first = discover_fds(&f.first, 3, &exec).map_err(|e| e.to_string())?;
    let second = discover_fds(&f.second, 3, &exec).map_err(|e| e.to_string())?;
    let diff = fd_diff(&first, &second).map_err(|e| e.to_string())?;
    ensure!(diff.lost == vec![f.broken], "lost set {:?}", diff.lost);
    let cfg = SweepConfig {
        d: 10.0,
        step: 1.0,
        metric: Metric::Euclidean,
    };
    let sweep = mfd_sweep(&f.second, &f.broken, &cfg, &exec).map_err(|e| e.to_string())?;
    let p = sweep.found.map(|h| h.p);
    ensure!(p == Some(5.0), "sweep returned {p:?}");
    Ok("lost set = {A -> B}, sweep (step 1, d 10) returns p = 5".into())
}

fn write_csv(dir: &Path, name: &str, r: &Relation) -> String {
    let path = dir.join(name);
    std::fs::write(&path, r.to_csv(',', "").unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn cli_json(threads: &str, args: &[&str]) -> Result<Vec<u8>, String> {
    let o = fdscope()
        .args(["--output", "json", "--threads", threads])
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(o.status.code().is_some_and(|c| c <= 1), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    Ok(o.stdout)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let typo = write_csv(d, "typo.csv", &typo_fixture(70_000, 600, 0.05).relation);
    let dedup = write_csv(d, "dedup.csv", &dedup_fixture(70_001, 150, 20).relation);
    let wide = write_csv(d, "wide.csv", &wide_relation(70_002, 8, 2000));
    let a = anomaly_fixture(70_003, 24, 5);
    let (p1, p2) = (write_csv(d, "p1.csv", &a.first), write_csv(d, "p2.csv", &a.second));
    let runs: Vec<Vec<&str>> = vec![
        vec!["discover", "fd", "--max-lhs", "4", &wide],
        vec!["discover", "afd", "--threshold", "0.02", "--max-lhs", "3", &wide],
        vec!["validate", "mfd", "--lhs", "c0,c1", "--rhs", "c4", "-p", "100", &wide],
        vec!["scenario", "typo", &typo],
        vec!["scenario", "dedup", "--window", "4", "--auto", "keep-first", &dedup],
        vec!["scenario", "anomaly", "-d", "10", &p1, &p2],
    ];
    for args in &runs {
        let one = cli_json("1", args)?;
        let again = cli_json("1", args)?;
        let many = cli_json("4", args)?;
        ensure!(one == again, "{args:?}: repeated runs differ");
        ensure!(one == many, "{args:?}: --threads 1 and --threads 4 differ");
        ensure!(!one.is_empty(), "{args:?}: empty output");
    }
    Ok(format!("{} commands byte-identical across repeats and --threads 1/4", runs.len()))
}

fn crash_restart() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let f = dedup_fixture(80_000, 60, 12);
    let csv = f.relation.to_csv(',', "").unwrap();
    let s = Served::start(root.path());
    let ds = s.upload(&csv, "people");
    let task = s.submit("scenario_dedup", &ds, json!({"window": 3}));
    ensure!(s.wait(&task)["status"] == "completed", "dedup task failed");
    let decide = |keep_second: bool| -> Result<serde_json::Value, String> {
        let (_, v) = s.post(&format!("/dedup/{task}/propose"), json!({}));
        let p = &v["proposal"];
        let keep = if keep_second { &p["row_b"] } else { &p["row_a"] };
        let (st, ack) = s.post(
            &format!("/dedup/{task}/decide"),
            json!({"row_a": p["row_a"], "row_b": p["row_b"], "keep": keep, "copy_attrs": ["city"]}),
        );
        ensure!(st == 200, "decide returned {st}: {ack}");
        Ok(ack)
    };
    decide(false)?;
    decide(true)?;
    s.post(&format!("/dedup/{task}/undo"), json!({}));
    let ack = decide(true)?;
    let before = ack["state_hash"].clone();
    let version = ack["version"].clone();
    s.kill();

    let s = Served::start(root.path());
    let (st, after) = s.get(&format!("/dedup/{task}/state"));
    ensure!(st == 200, "state after restart returned {st}");
    ensure!(after["state_hash"] == before, "hash {} after restart, {} before", after["state_hash"], before);
    ensure!(after["version"] == version, "version {} vs {}", after["version"], version);
    let (st, _) = s.get(&format!("/tasks/{task}/results"));
    ensure!(st == 200, "results unreadable after restart: {st}");
    Ok(format!("SIGKILL after 4 acknowledged events; replay to version {version} with equal state hash"))
}

fn performance() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv = write_csv(dir.path(), "wide.csv", &wide_relation(90_000, 15, 10_000));
    let start = Instant::now();
    let child = fdscope()
        .args(["--output", "json", "discover", "fd", "--max-lhs", "4", &csv])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let pid = child.id() as libc::pid_t;
    let mut status = 0;
    // SAFETY: zeroed rusage is a valid out-parameter; pid is our own child.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let rc = unsafe { libc::wait4(pid, &mut status, 0, &mut usage) };
    let elapsed = start.elapsed();
    ensure!(rc == pid, "wait4 failed");
    ensure!(libc::WIFEXITED(status) && libc::WEXITSTATUS(status) == 0, "discovery exited with {status}");
    let peak = usage.ru_maxrss as u64 * 1024;
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    ensure!(peak < 1 << 30, "peak memory {} MiB", peak >> 20);
    Ok(format!(
        "15 x 10000, max_lhs 4: {:.2} s, peak {} MiB",
        elapsed.as_secs_f64(),
        peak >> 20
    ))
}

fn main() {
    let criteria: [Check; 9] = [
        ("fd oracle equivalence", fd_oracle),
        ("g1 equivalence", g1_equivalence),
        ("mfd equivalence", mfd_equivalence),
        ("typo scenario recall", typo_recall),
        ("dedup recall", dedup_recall),
        ("anomaly fixture", anomaly_fixture_check),
        ("determinism and parallelism neutrality", determinism),
        ("crash-restart", crash_restart),
        ("performance smoke", performance),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
