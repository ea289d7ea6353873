use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use geoptics_cli::main_with_args;
use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> i32 {
    let mut all = vec!["geoptics".to_string()];
    all.extend(args.iter().map(|s| s.to_string()));
    all.extend(["--config".into(), cfg.display().to_string(), "--out".into(), out.display().to_string()]);
    main_with_args(all)
}

/// Published files keyed by relative path, cache excluded.
fn artifacts(out: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.file_name().unwrap() == ".cache" {
                continue;
            }
            if p.is_dir() {
                walk(root, &p, acc);
            } else {
                acc.insert(p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(out, out, &mut acc);
    acc
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

/// Values of the named columns of a CSV table.
fn columns(path: &Path, names: &[&str]) -> Vec<f64> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().clone();
    let idx: Vec<usize> = names.iter().map(|n| header.iter().position(|h| h == *n).unwrap()).collect();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        for &i in &idx {
            out.push(rec[i].parse().unwrap());
        }
    }
    out
}

#[test]
fn zero_data_gives_zero_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["run"], &config("zero.toml"), dir.path()), 0);
    let out = dir.path();
    assert!(columns(&out.join("profiles/final.csv"), &["re", "im"]).iter().all(|x| *x == 0.0));
    assert!(columns(&out.join("singular/eps_0.2/final.csv"), &["u0", "u1", "u2"]).iter().all(|x| *x == 0.0));
    let errs = columns(&out.join("convergence.csv"), &["error_e1", "physical", "solution_e2", "picard_1"]);
    assert!(errs.iter().all(|x| *x == 0.0));
    let manifest = json(&out.join("manifest.json"));
    assert!(manifest["stages"].as_array().unwrap().iter().all(|s| s["complete"] == true));
}

#[test]
fn negative_step_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("zero.toml")).unwrap().replace("dt = 0.02", "dt = -0.02");
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, text).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_geoptics"))
        .args(["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.dt"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("zero.toml")).unwrap().replace("[grid]", "[grid]\nnx = 10");
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, text).unwrap();
    assert_eq!(run(&["run"], &cfg, &dir.path().join("out")), 2);
}

#[test]
fn stage_without_upstream_cache_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["solve-profiles"], &config("zero.toml"), dir.path()), 1);
    assert_eq!(run(&["check-assumptions"], &config("zero.toml"), dir.path()), 0);
    assert_eq!(run(&["analyze-modes"], &config("zero.toml"), dir.path()), 0);
    assert!(dir.path().join("modes.json").exists());
    assert!(!dir.path().join("resonances.json").exists());
}

#[test]
fn supersonic_inflow_passes_trivially() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["check-assumptions"], &config("supersonic_inflow.toml"), dir.path()), 0);
    let rep = json(&dir.path().join("assumptions.json"));
    assert_eq!(rep["trivial"], true);
    assert_eq!(rep["p"], rep["n"]);
}

/// Diagonal system with `omega = (1, 2, 3)` at `beta = (1, 1)`.
fn resonant_config(bound: i64) -> String {
    format!(
        r#"beta = [1.0, 1.0]
epsilons = [0.2]

[system]
kind = "custom"
d = 2
a = [
  [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
  [[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -4.0]],
  [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]],
]
b0 = [[0.0, 0.0, 1.0]]

[forcing]
onset = 0.2
terms = []

[grid]
t_final = 0.4
dt = 0.02
x_len = 0.4
dx = 0.04
n_theta = 4
depth = 4.0

[resonance]
bound = {bound}

[checks]
multiplicity_samples = 10
stability_samples = 50
"#
    )
}

#[test]
fn larger_resonance_bound_only_adds() {
    let dir = tempfile::tempdir().unwrap();
    let mut found = Vec::new();
    for bound in [4, 8] {
        let cfg = dir.path().join(format!("b{bound}.toml"));
        fs::write(&cfg, resonant_config(bound)).unwrap();
        let out = dir.path().join(format!("out{bound}"));
        assert_eq!(run(&["run", "--stage", "find-resonances"], &cfg, &out), 0);
        let rep = json(&out.join("resonances.json"));
        found.push(rep["triples"].as_array().unwrap().clone());
    }
    assert!(!found[0].is_empty());
    assert!(found[0].iter().all(|t| found[1].contains(t)));
}

#[test]
fn downstream_cache_loss_leaves_upstream_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(run(&["run"], &config("zero.toml"), out), 0);
    let first = artifacts(out);
    let cache = out.join(".cache");
    let marker = fs::read_dir(cache.join("solve-profiles")).unwrap().next().unwrap().unwrap().path().join("complete");
    let stamp = fs::metadata(&marker).unwrap().modified().unwrap();
    for stage in ["solve-singular", "convergence-study"] {
        fs::remove_dir_all(cache.join(stage)).unwrap();
    }
    assert_eq!(run(&["run"], &config("zero.toml"), out), 0);
    assert_eq!(fs::metadata(&marker).unwrap().modified().unwrap(), stamp);
    assert_eq!(artifacts(out), first);
}

#[test]
fn golden_run_is_reproducible() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(&["run"], &config("golden.toml"), a.path()), 0);
    assert_eq!(run(&["run", "--threads", "1"], &config("golden.toml"), b.path()), 0);
    let (fa, fb) = (artifacts(a.path()), artifacts(b.path()));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(v == &fb[k], "{k} differs");
    }
    for name in ["summary.txt", "convergence.csv"] {
        let want = fs::read(golden.join(name)).unwrap();
        assert!(fa[name] == want, "{name} differs from the frozen copy");
    }
}

#[test]
fn config_invariants_are_enforced() {
    use geoptics_cli::config::RunConfig;
    let base = fs::read_to_string(config("golden.toml")).unwrap();
    assert!(RunConfig::parse(&base).is_ok());
    for (from, to) in [
        ("epsilons = [0.2, 0.1, 0.05]", "epsilons = [0.1, 0.2]"),
        ("amplitude = [0.05]", "amplitude = [0.5]"),
        ("amplitude = [0.05]", "amplitude = [0.05, 0.0]"),
        ("beta = [2.0, 1.0]", "beta = [2.0]"),
        ("base = [1.0, 0.5, -0.4]", "base = [-1.0, 0.5, -0.4]"),
    ] {
        assert!(base.contains(from));
        assert!(RunConfig::parse(&base.replace(from, to)).is_err(), "{to}");
    }
}
