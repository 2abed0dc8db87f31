use std::fs;
use std::process::Command;

use masga::output::{write_levels, LevelRow};

fn masga() -> Command {
    Command::new(env!("CARGO_BIN_EXE_masga"))
}

#[test]
fn rates_on_exact_log_linear_levels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("levels.csv");
    let mut rows = Vec::new();
    for a in 0..=3u32 {
        for b in 0..=3u32 {
            let k = (a + b) as i32;
            rows.push(LevelRow {
                ell1: a,
                ell2: b,
                n: 100,
                mean: 0.5f64.powi(k),
                var: 0.25f64.powi(k),
                cost_per_path: 2f64.powi(k),
            });
        }
    }
    write_levels(&path, &rows).unwrap();
    let out = masga().arg("rates").arg(&path).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("beta_hat = (2.000, 2.000)"), "{text}");
    assert!(text.contains("alpha_hat = (1.000, 1.000)"), "{text}");
    assert!(text.contains("gamma = (1.000, 1.000)"), "{text}");
    assert!(text.contains("< 0: true"), "{text}");
}

#[test]
fn oracle_command_passes() {
    let out = masga().arg("oracle").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.lines().count() >= 4);
    assert!(!text.contains("[FAIL]"));
}

#[test]
fn missing_dataset_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "model = logistic_gaussian\ndata = no_such_file.csv\neps = 0.1\n").unwrap();
    let out = masga().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("no_such_file.csv"), "{err}");
    assert_eq!(err.trim().lines().count(), 1, "{err}");
}

#[test]
fn gen_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        let st = masga()
            .args(["gen-data", "--kind", "mixture", "--m", "200", "--d", "2", "--seed", "3", "--out"])
            .arg(&p)
            .status()
            .unwrap();
        assert!(st.success());
        fs::read(p).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let text = String::from_utf8(a).unwrap();
    let data_rows = text.lines().filter(|l| !l.is_empty()).count();
    assert!(data_rows == 200 || data_rows == 201);
}

#[test]
fn unknown_preset_is_an_error() {
    let out = masga().args(["run", "--preset", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error:"));
}

#[test]
fn ou_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = masga()
        .args(["run", "--preset", "ou", "--eps", "0.05", "--seed", "4", "--threads", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(matches!(out.status.code(), Some(0) | Some(2)), "{text}");
    assert!(text.contains("estimate"));
    for f in ["levels.csv", "convergence.csv", "report.json"] {
        assert!(dir.path().join(f).exists());
    }
}

#[test]
fn compare_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.csv");
    let st = masga()
        .args(["compare", "--preset", "ou", "--levels", "1", "--paths", "50", "--out"])
        .arg(&p)
        .status()
        .unwrap();
    assert!(st.success());
    let text = fs::read_to_string(p).unwrap();
    assert_eq!(text.lines().next().unwrap(), "ell1,ell2,n,mean_antithetic,var_antithetic,var_plain,var_level");
    assert_eq!(text.lines().count(), 5);
}
