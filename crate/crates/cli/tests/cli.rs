use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn evmarl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evmarl")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn train(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--config", p(cfg), "--out", p(out)];
    args.extend_from_slice(extra);
    evmarl(&args)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn metric_rows(dir: &Path) -> Vec<Value> {
    json(&dir.join("metrics.json"))["rows"].as_array().unwrap().clone()
}

#[test]
fn minimal_train_writes_artifacts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&train(&fixture("tiny.toml"), &out, &[]));
    for f in ["checkpoint.json", "curves.csv", "config.toml", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["command"], "train");
    assert_eq!(m["run_id"].as_str().unwrap().len(), 16);
    let files = m["files"].as_array().unwrap();
    assert_eq!(files.len(), 3);
    for f in files {
        let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), sha256sum(&bytes));
    }
    let curves = fs::read_to_string(out.join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 3);
    assert!(curves.starts_with("episode,mean_reward,energy_cost,unfinished_demand"));
}

// digest from the system tool, independent of the binary's hashing
fn sha256sum(bytes: &[u8]) -> String {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("blob");
    fs::write(&path, bytes).unwrap();
    let out = Command::new("sha256sum").arg(&path).output().expect("sha256sum available");
    String::from_utf8(out.stdout).unwrap().split_whitespace().next().unwrap().to_string()
}

#[test]
fn missing_required_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(&fixture("missing_key.toml"), &dir.path().join("run"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_chargers"));
}

#[test]
fn bad_overrides_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    for extra in [
        &["--set", "train.gamma=2.0"][..],
        &["--set", "station.warp=1"],
        &["--set", "no-equals-sign"],
        &["--algorithm", "ppo"],
    ] {
        let out = train(&fixture("tiny.toml"), &run, extra);
        assert_eq!(out.status.code(), Some(2), "{extra:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(!run.join("checkpoint.json").exists());
}

#[test]
fn zero_episodes_succeeds_with_empty_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&train(&fixture("tiny.toml"), &out, &["--episodes", "0"]));
    let curves = fs::read_to_string(out.join("curves.csv")).unwrap();
    assert!(curves.lines().skip(1).next().is_none(), "{curves}");
}

#[test]
fn training_is_reproducible_from_config_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&train(&fixture("tiny.toml"), &a, &["--seed", "4"]));
    ok(&train(&fixture("tiny.toml"), &b, &["--seed", "4"]));
    for f in ["checkpoint.json", "curves.csv", "config.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(json(&a.join("manifest.json"))["run_id"], json(&b.join("manifest.json"))["run_id"]);

    // the snapshot alone reproduces the run
    let c = dir.path().join("c");
    ok(&train(&a.join("config.toml"), &c, &[]));
    assert_eq!(fs::read(a.join("checkpoint.json")).unwrap(), fs::read(c.join("checkpoint.json")).unwrap());
}

#[test]
fn commands_do_not_touch_their_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::copy(fixture("tiny.toml"), &cfg).unwrap();
    let before = fs::read(&cfg).unwrap();
    let run = dir.path().join("run");
    ok(&train(&cfg, &run, &["--episodes", "1", "--set", "train.batch_size=4"]));
    let ck = run.join("checkpoint.json");
    let ck_before = fs::read(&ck).unwrap();
    let ev = dir.path().join("ev");
    ok(&evmarl(&["evaluate", "--checkpoint", p(&ck), "--config", p(&cfg), "--out", p(&ev), "--faults", "on"]));
    assert_eq!(fs::read(&cfg).unwrap(), before);
    assert_eq!(fs::read(&ck).unwrap(), ck_before);
    let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 3, "{names:?}");
}

#[test]
fn zero_policy_leaves_all_demand_unfinished() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ok(&train(&fixture("tiny.toml"), &run, &["--algorithm", "zero"]));
    let ev = dir.path().join("ev");
    let ck = run.join("checkpoint.json");
    ok(&evmarl(&["evaluate", "--checkpoint", p(&ck), "--config", p(&fixture("tiny.toml")), "--out", p(&ev)]));
    let rows = metric_rows(&ev);
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert_eq!(r["variant"], "zero");
    assert!(r["total_demand"].as_f64().unwrap() > 0.0);
    assert!((r["unfinished_demand"].as_f64().unwrap() - r["total_demand"].as_f64().unwrap()).abs() < 1e-9);
    assert!(ev.join("trace-base-seed0.csv").is_file());
}

#[test]
fn file_backed_scenario_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ok(&train(&fixture("files.toml"), &run, &[]));
    let ev = dir.path().join("ev");
    let ck = run.join("checkpoint.json");
    ok(&evmarl(&["evaluate", "--checkpoint", p(&ck), "--config", p(&fixture("files.toml")), "--out", p(&ev)]));
    let r = &metric_rows(&ev)[0];
    assert_eq!(r["episodes"], 1);
    assert!((r["total_demand"].as_f64().unwrap() - 38.0).abs() < 1e-9);
}

#[test]
fn sunny_and_cloudy_write_separate_traces() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ok(&train(&fixture("tiny.toml"), &run, &["--algorithm", "greedy"]));
    let ck = run.join("checkpoint.json");
    let mut charged = Vec::new();
    for w in ["sunny", "cloudy"] {
        let ev = dir.path().join(w);
        ok(&evmarl(&[
            "evaluate", "--checkpoint", p(&ck), "--config", p(&fixture("tiny.toml")), "--out", p(&ev), "--weather", w,
        ]));
        assert!(ev.join(format!("trace-{w}-seed0.csv")).is_file());
        charged.push(metric_rows(&ev)[0]["high_pv_charging_kwh"].as_f64().unwrap());
    }
    assert!(charged[0] >= charged[1], "{charged:?}");
}

#[test]
fn decentralized_faults_report_zero_healthy_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ok(&train(&fixture("tiny.toml"), &run, &[]));
    let ck = run.join("checkpoint.json");
    let ev = dir.path().join("ev");
    ok(&evmarl(&[
        "evaluate", "--checkpoint", p(&ck), "--config", p(&fixture("tiny.toml")), "--out", p(&ev),
        "--faults", "on", "--seeds", "3,4",
    ]));
    for s in [3, 4] {
        let r = json(&ev.join(format!("robustness-base-seed{s}.json")));
        assert_eq!(r["centralized"], false);
        assert_eq!(r["episodes_with_healthy_deviation"], 0);
        assert_eq!(r["faulty"].as_array().unwrap().len(), 2);
        assert_eq!(r["manifest"], "manifest.json");
        for h in r["healthy"].as_array().unwrap() {
            assert_eq!(h["max_abs_kw"].as_f64(), Some(0.0));
        }
        let trace = fs::read_to_string(ev.join(format!("fault-trace-base-seed{s}.csv"))).unwrap();
        assert!(trace.starts_with("episode,slot,charger,action_normal,action_faulty\n"));
    }
    let rows = metric_rows(&ev);
    assert_eq!(rows.len(), 4);
    let modes: Vec<_> = rows.iter().map(|r| r["mode"].as_str().unwrap()).collect();
    assert_eq!(modes, ["normal", "faulty", "normal", "faulty"]);
    let m = json(&ev.join("manifest.json"));
    assert_eq!(m["command"], "evaluate");
    assert_eq!(m["inputs"].as_array().unwrap().len(), 1);
}

#[test]
fn mismatched_checkpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ok(&train(&fixture("files.toml"), &run, &[]));
    let ck = run.join("checkpoint.json");
    let out = evmarl(&["evaluate", "--checkpoint", p(&ck), "--config", p(&fixture("tiny.toml")), "--out", p(&dir.path().join("ev"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("chargers"));

    fs::write(&ck, "{\"format\": \"something-else\"}").unwrap();
    let out = evmarl(&["evaluate", "--checkpoint", p(&ck), "--config", p(&fixture("files.toml")), "--out", p(&dir.path().join("ev"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn report_aggregates_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut evs = Vec::new();
    for alg in ["zero", "greedy"] {
        let run = dir.path().join(alg);
        ok(&train(&fixture("tiny.toml"), &run, &["--algorithm", alg]));
        let ev = dir.path().join(format!("ev-{alg}"));
        let ck = run.join("checkpoint.json");
        ok(&evmarl(&["evaluate", "--checkpoint", p(&ck), "--config", p(&fixture("tiny.toml")), "--out", p(&ev), "--seeds", "1,1"]));
        evs.push(ev);
    }
    let csv = dir.path().join("out/report.csv");
    let out = evmarl(&["report", p(&evs[0]), p(&evs[1]), "--out", p(&csv)]);
    ok(&out);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert!(lines[0].starts_with("variant,weather,mode,runs,energy_cost_median"));
    // greedy buys energy, the zero policy does not
    assert!(lines[1].starts_with("greedy,base,normal,2,"));
    assert!(lines[2].starts_with("zero,base,normal,2,"));
    // both seeds identical, so spreads vanish
    for l in &lines[1..] {
        let cols: Vec<_> = l.split(',').collect();
        assert_eq!(cols[5].parse::<f64>().unwrap(), 0.0);
        assert_eq!(cols[7].parse::<f64>().unwrap(), 0.0);
    }
    assert!(String::from_utf8_lossy(&out.stdout).contains("greedy"));

    let single = evmarl(&["report", p(&evs[0])]);
    ok(&single);
    assert_eq!(String::from_utf8_lossy(&single.stdout).lines().count(), 2);
}

#[test]
fn report_without_runs_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = evmarl(&["report", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert_ne!(evmarl(&["report"]).status.code(), Some(0));
}
