use std::path::Path;
use std::process::{Command, Output};

fn predlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_predlab")).args(args).output().expect("binary runs")
}

fn run_into(dir: &Path, scenario: &str, extra: &[&str]) -> Output {
    let mut args = vec!["run", scenario, "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    predlab(&args)
}

fn read(dir: &Path, file: &str) -> Vec<u8> {
    std::fs::read(dir.join(file)).unwrap()
}

#[test]
fn list_shows_every_scenario() {
    let out = predlab(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sc in predlab::harness::scenarios() {
        assert!(text.contains(&sc.id), "{} missing", sc.id);
    }
}

#[test]
fn runs_are_byte_identical_and_reportable() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    let first = run_into(&a, "sine_pair", &["--threads", "1"]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stdout));
    assert_eq!(run_into(&b, "sine_pair", &["--threads", "1"]).status.code(), Some(0));
    assert_eq!(run_into(&c, "sine_pair", &["--threads", "2"]).status.code(), Some(0));
    for file in ["curves.csv", "verdicts.csv"] {
        assert_eq!(read(&a, file), read(&b, file), "{file}");
        assert_eq!(read(&a, file), read(&c, file), "{file} with two threads");
    }
    let header = String::from_utf8(read(&a, "curves.csv")).unwrap();
    assert!(header.starts_with("scenario,condition,f_id,n,statistic,stderr,method\n"));
    assert!(a.join("record.json").exists());
    assert!(std::fs::read_dir(a.join("plot")).unwrap().count() > 0);

    let report = predlab(&["report", a.to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(0));
    assert!(!String::from_utf8(report.stdout).unwrap().contains("DIFFERS"));
}

#[test]
fn report_flags_tampered_curves() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_into(tmp.path(), "triple", &[]).status.code(), Some(0));
    let curves = String::from_utf8(read(tmp.path(), "curves.csv")).unwrap();
    // Push every exceedance probability above the failure line.
    let tampered: String = curves
        .lines()
        .map(|l| {
            if l.contains(",star,") {
                let mut f: Vec<&str> = l.split(',').collect();
                f[4] = "9.0e-1";
                f.join(",")
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(tmp.path().join("curves.csv"), tampered + "\n").unwrap();
    let report = predlab(&["report", tmp.path().to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(1));
    assert!(String::from_utf8(report.stdout).unwrap().contains("DIFFERS"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_into(tmp.path(), "triple", &["--paths", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("batch"));
    assert_eq!(predlab(&["run", "no_such_scenario"]).status.code(), Some(2));

    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\npath = 40\n").unwrap();
    assert_eq!(run_into(tmp.path(), "iid", &["--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&cfg, "scenario = \"triple\"\n").unwrap();
    assert_eq!(run_into(tmp.path(), "iid", &["--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn config_file_overrides_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("iid.toml");
    std::fs::write(&cfg, "seed = 9\npaths = 60\ngrid = [256, 2048, 8192]\n\n[thresholds]\nse_multiple = 3.0\n").unwrap();
    let out = run_into(tmp.path(), "iid", &["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let verdicts = String::from_utf8(read(tmp.path(), "verdicts.csv")).unwrap();
    assert!(verdicts.lines().skip(1).all(|l| l.ends_with(",custom,9") || l.ends_with(",default,9")));
    let record: serde_json::Value = serde_json::from_slice(&read(tmp.path(), "record.json")).unwrap();
    assert_eq!(record["config"]["paths"], 60);
}

#[test]
fn oracle_prints_exact_values() {
    let out = predlab(&["oracle", "m_dependent", "--prefix", "1", "--f", "id"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let value: f64 = text.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert_eq!(value, -0.5);
    let null = predlab(&["oracle", "m_dependent", "--prefix", "1,1"]);
    assert_eq!(null.status.code(), Some(2));
}
