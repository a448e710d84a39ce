use std::path::Path;
use std::process::{Command, Output};

fn greenpot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greenpot")).args(args).output().expect("spawn greenpot")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn lattice_green_passes_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = greenpot(&["lattice-green", "--range", "12", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    for f in ["lattice-green.json", "lattice-green.csv", "lattice-green.meta.json"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let meta: serde_json::Value = serde_json::from_str(&read(&dir.path().join("lattice-green.meta.json"))).unwrap();
    assert_eq!(meta["experiment"], "lattice-green");
    assert_eq!(meta["seed"], 1);
    assert_eq!(meta["pass"], true);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = greenpot(&["cmp-random", "--count", "6", "--trials", "500", "--seed", "7", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["cmp-random.json", "cmp-random.csv"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f} differs");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "4")] {
        let o = Command::new(env!("CARGO_BIN_EXE_greenpot"))
            .args(["hadamard-sweep", "--count", "8", "--out", dir.path().to_str().unwrap()])
            .env("GREENPOT_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
    }
    assert_eq!(read(&a.path().join("hadamard-sweep.json")), read(&b.path().join("hadamard-sweep.json")));
}

#[test]
fn non_potential_matrix_fails() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("u.json");
    std::fs::write(&m, "[[1, 2], [2, 1]]").unwrap();
    let o = greenpot(&["check-potential", "--matrix", m.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let report = read(&dir.path().join("check-potential.json"));
    assert!(report.contains("not_potential") || report.contains("NotPotential"), "{report}");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&greenpot(&["no-such-experiment"])), 2);
    assert_eq!(code(&greenpot(&["check-potential", "--matrix", "/nonexistent/m.json", "--out", out])), 2);
    assert_eq!(code(&greenpot(&["killed-green", "--domain", "moon", "--out", out])), 2);
    assert_eq!(code(&greenpot(&["converge-free", "--beta", "3", "--out", out])), 2);
}

#[test]
fn config_conflicts_need_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        format!(r#"{{"experiment": "lattice-green", "seed": 5, "out": {:?}, "range": 11}}"#, out.to_str().unwrap()),
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&greenpot(&["run", "--config", c])), 0);
    let meta: serde_json::Value = serde_json::from_str(&read(&out.join("lattice-green.meta.json"))).unwrap();
    assert_eq!(meta["seed"], 5);

    // agreeing values are fine, disagreeing ones are not
    assert_eq!(code(&greenpot(&["lattice-green", "--config", c, "--range", "11"])), 0);
    assert_eq!(code(&greenpot(&["lattice-green", "--config", c, "--range", "12"])), 2);
    assert_eq!(code(&greenpot(&["lattice-green", "--config", c, "--seed", "6"])), 2);
    assert_eq!(code(&greenpot(&["lattice-green", "--config", c, "--range", "12", "--force"])), 0);

    // the config names another experiment
    assert_eq!(code(&greenpot(&["exp-sweep", "--config", c])), 2);

    std::fs::write(&cfg, r#"{"experiment": "lattice-green", "bogus": 1}"#).unwrap();
    assert_eq!(code(&greenpot(&["run", "--config", c])), 2);
}

#[test]
fn domain_grid_respects_the_sandwich() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut counts = Vec::new();
    for kind in ["interior", "grid", "exterior"] {
        let o = greenpot(&["domain-grid", "--d", "2", "--n", "18", "--kind", kind, "--out", out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_str(&read(&dir.path().join("domain-grid.json"))).unwrap();
        counts.push(v["count"].as_u64().expect("count"));
    }
    assert!(counts[0] <= counts[1] && counts[1] <= counts[2], "{counts:?}");
}
