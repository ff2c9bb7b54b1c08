//! Command-line smoke tests: every subcommand, exit codes, and the round
//! trip through field files.

use std::path::Path;
use std::process::Command;

fn hmlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hmlab"))
}

fn write_config(dir: &Path, json: &str) -> std::path::PathBuf {
    let path = dir.join("cfg.json");
    std::fs::write(&path, json).unwrap();
    path
}

#[test]
fn build_domain_minimize_singular_seminorm() {
    let dir = tempfile::tempdir().unwrap();
    let dom = dir.path().join("dom.sfld");
    let status = hmlab()
        .args(["build-domain", "--kind", "ball", "--n", "17"])
        .arg("--out")
        .arg(&dom)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dom.exists());

    let cfg = write_config(
        dir.path(),
        r#"{
            "experiment": "sharpness",
            "domain": "ball",
            "n": 17,
            "s": 0.6,
            "p": 2.0,
            "lambdas": [1.0],
            "solver": {"max_iters": 1500},
            "seed": 3,
            "out_dir": "unused",
            "family": {"bubble": {"lambda": 1.0, "pole": null}}
        }"#,
    );
    let field = dir.path().join("field.sfld");
    let hist = dir.path().join("hist.csv");
    let status = hmlab()
        .arg("minimize")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&field)
        .arg("--history")
        .arg(&hist)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(field.exists());
    let hist_text = std::fs::read_to_string(&hist).unwrap();
    assert!(hist_text.starts_with("iter,energy,max_node_move"));
    assert!(hist_text.lines().count() > 10);

    let sing = dir.path().join("sing.csv");
    let status = hmlab()
        .arg("singular")
        .arg("--field")
        .arg(&field)
        .arg("--out")
        .arg(&sing)
        .status()
        .unwrap();
    assert!(status.success());
    let sing_text = std::fs::read_to_string(&sing).unwrap();
    assert!(sing_text.starts_with("x,y,z,density,degree,boundary_distance,flags"));
    // degree-one data forces one defect
    assert_eq!(sing_text.lines().count(), 2, "{sing_text}");

    let out = hmlab()
        .arg("seminorm")
        .arg("--trace-from")
        .arg(&field)
        .args(["--s", "0.75", "--p", "2.6667"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let value: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!(value.is_finite() && value > 0.0);
}

#[test]
fn exp_exit_code_reflects_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    // a passing experiment: stability on a coarse grid with tiny deltas
    let cfg = write_config(
        dir.path(),
        r#"{
            "experiment": "stability",
            "domain": "ball",
            "n": 17,
            "s": 1.0,
            "p": 2.0,
            "deltas": [0.4, 0.1],
            "solver": {"max_iters": 4000},
            "seed": 11,
            "out_dir": "OUT"
        }"#,
    );
    let out_dir = dir.path().join("runs");
    let status = hmlab()
        .args(["exp", "stability"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success(), "stability experiment should pass");
    assert!(out_dir.join("stability_cases.csv").exists());
    assert!(out_dir.join("stability_verdicts.csv").exists());
    let verdicts = std::fs::read_to_string(out_dir.join("stability_verdicts.csv")).unwrap();
    assert!(verdicts.lines().all(|l| !l.contains(",false,")), "{verdicts}");
}

#[test]
fn exp_rejects_mismatched_experiment_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "experiment": "stability",
            "domain": "ball",
            "n": 17,
            "s": 1.0,
            "p": 2.0,
            "deltas": [0.1],
            "seed": 1,
            "out_dir": "x"
        }"#,
    );
    let out = hmlab()
        .args(["exp", "sharpness"])
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn singular_rejects_bad_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("junk.sfld");
    std::fs::write(&bad, b"not a field file at all").unwrap();
    let out = hmlab()
        .arg("singular")
        .arg("--field")
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("s.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("magic"), "{err}");
}
