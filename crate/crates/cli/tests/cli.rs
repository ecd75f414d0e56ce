use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dimer-nesting"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("dimer-nesting-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_exact_passes_and_stamps_artifacts() {
    let d = scratch("verify");
    let o = run(&["verify-exact", "--seed", "7"], &d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(d.join("verify_exact.json"));
    assert_eq!(v["all_pass"], true);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    assert!(v["domains"].as_array().unwrap().len() >= 3);
    let csv = fs::read_to_string(d.join("verify_exact.csv")).unwrap();
    assert!(csv.starts_with(&format!("# config_hash={} seed=7\n", v["config_hash"].as_str().unwrap())));
}

#[test]
fn malformed_config_exits_2_with_line_number() {
    let d = scratch("badcfg");
    let cfg = d.join("bad.ini");
    fs::write(&cfg, "[sampling]\nn = 10\nseed = minus one\n").unwrap();
    let o = bin().args(["mc", "--config"]).arg(&cfg).arg("--out").arg(&d).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    fs::write(&cfg, "[nowhere]\n").unwrap();
    let o = bin().args(["mc", "--config"]).arg(&cfg).arg("--out").arg(&d).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["theorem1", "--deltas", "1/0,1/8"], &d).status.code(), Some(2));
    assert_eq!(run(&["det", "--s-grid", "0.4"], &d).status.code(), Some(2));
    assert_eq!(run(&["cle-compare", "--law", "cauchy"], &d).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"], &d).status.code(), Some(2));
}

#[test]
fn config_file_values_reach_the_artifacts() {
    let d = scratch("cfg");
    let cfg = d.join("run.ini");
    fs::write(&cfg, "# small run\n[domain]\nkind = halfplane\ndelta = 1/16\n[points]\npoints = 0,0.25; 0.25,0.25\n[sampling]\nn = 12\nseed = 99\n").unwrap();
    let o = bin().args(["mc", "--config"]).arg(&cfg).arg("--out").arg(&d).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(d.join("mc.json"));
    assert_eq!(v["seed"], 99);
    let stats = v["statistics"].as_array().unwrap();
    assert!(stats.iter().any(|s| s["name"] == "pair_nesting"));
    assert!(stats.iter().all(|s| s["n"] == 12 && s["seed"] == 99));
    let c = json(d.join("config.json"));
    assert_eq!(c["config"]["domain"]["delta"], 1.0 / 16.0);
}

#[test]
fn outputs_do_not_depend_on_thread_count_and_replay_identically() {
    let args = ["theorem1", "--deltas", "1/16,1/32", "--n", "24", "--seed", "5"];
    let mut outs = Vec::new();
    for (k, threads) in ["1", "2", "2"].iter().enumerate() {
        let d = scratch(&format!("threads{k}"));
        let mut a = args.to_vec();
        a.extend(["--threads", threads]);
        let o = run(&a, &d);
        // slope checks are meaningless at this size; only the artifacts are compared
        assert!(matches!(o.status.code(), Some(0) | Some(1)), "{}", String::from_utf8_lossy(&o.stderr));
        outs.push((fs::read(d.join("theorem1.json")).unwrap(), fs::read(d.join("theorem1.csv")).unwrap()));
    }
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[1], outs[2]);

    let d = scratch("seed6");
    run(&["theorem1", "--deltas", "1/16,1/32", "--n", "24", "--seed", "6"], &d);
    assert_ne!(fs::read(d.join("theorem1.json")).unwrap(), outs[0].0);
}

#[test]
fn assertion_failures_exit_nonzero() {
    let d = scratch("fail");
    let o = run(&["cle-compare", "--n", "200", "--depths", "1,2"], &d);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
    assert!(!json(d.join("cle_compare.json"))["failed"].as_array().unwrap().is_empty());
}

#[test]
fn renewal_comparator_passes_for_exponential_steps() {
    let d = scratch("cle");
    let o = run(&["cle-compare", "--law", "exponential", "--n", "5000"], &d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(d.join("cle_compare.json"));
    assert!(v["fit"]["ks"].as_f64().unwrap() < 0.05);
}

#[test]
fn sample_and_det_write_their_files() {
    let d = scratch("sample");
    let o = run(&["sample", "--n", "2", "--seed", "3"], &d);
    assert_eq!(o.status.code(), Some(0));
    let s = json(d.join("sample_1.json"));
    assert_eq!(s["seed"], 3);
    assert!(fs::read_to_string(d.join("height_0.csv")).unwrap().starts_with("# config_hash="));

    let d = scratch("det");
    let o = run(&["det", "--deltas", "1/8,1/16", "--lambda-grid", "0.5"], &d);
    assert!(matches!(o.status.code(), Some(0) | Some(1)));
    let csv = fs::read_to_string(d.join("det_scan.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("delta,lambda,value,deviation,mu,sigma"));
    assert_eq!(csv.lines().count(), 4);
    let lap = fs::read_to_string(d.join("det_laplace.csv")).unwrap();
    assert_eq!(lap.lines().count(), 2 + 2 * 3);
}
