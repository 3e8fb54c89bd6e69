use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bundleneg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bundleneg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn compare_into(dir: &Path, seed: &str) -> Output {
    bundleneg(&[
        "compare",
        "--customers",
        "40",
        "--runs",
        "2",
        "--seed",
        seed,
        "--output",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn missing_config_fails_cleanly() {
    let out = bundleneg(&["run", "--config", "/nonexistent/config.toml"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:"), "{err}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "num_customer = 5\n").unwrap();
    let out = bundleneg(&["run", "--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn compare_prints_all_three_methods() {
    let dir = tempfile::tempdir().unwrap();
    let out = bundleneg(&[
        "compare",
        "--customers",
        "1",
        "--runs",
        "1",
        "--strategy",
        "tdf",
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let header = text.lines().next().unwrap();
    for arm in ["MU_TDF", "S_TDF", "B_TDF"] {
        assert!(header.contains(arm), "{header}");
    }
    assert!(text.contains("rel_percentage"));
    for f in ["per_customer.csv", "moving_avg.csv", "summary.csv", "gains_table_MU_TDF_run0.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    assert!(compare_into(a.path(), "5").status.success());
    assert!(compare_into(b.path(), "5").status.success());
    assert!(compare_into(c.path(), "6").status.success());
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 5);
    for name in &names {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name:?} differs between identical runs");
    }
    let x = fs::read(a.path().join("per_customer.csv")).unwrap();
    let z = fs::read(c.path().join("per_customer.csv")).unwrap();
    assert_ne!(x, z);
}

#[test]
fn traces_can_be_replayed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = bundleneg(&["run", "--customers", "3", "--runs", "1", "--traces", "--output", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let traces = dir.path().join("traces.jsonl");
    let out = bundleneg(&["replay", traces.to_str().unwrap(), "--customer", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("customer 2"), "{text}");
    assert!(text.contains("offer"));
    let out = bundleneg(&["replay", traces.to_str().unwrap(), "--customer", "99"]);
    assert!(!out.status.success());
}

#[test]
fn oracle_check_passes() {
    let out = bundleneg(&["oracle-check", "--instances", "50"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("pass")).count(), 4, "{text}");
}
