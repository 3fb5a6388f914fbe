use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use steinhaus_lab::experiment::{ExperimentConfig, ExperimentKind, CHAIN_HEADER};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steinhaus-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().to_string())
        .collect()
}

#[test]
fn headers_per_subcommand() {
    let expect = [
        (
            "mean-gain",
            "d,N,g,log_mean_gain,upper_bound_log,asymptotic_log,regime",
        ),
        ("saddle", "g,u0,gamma_g,f2_u0,fprime_u0"),
        (
            "scan-ergodicity",
            "d,g,N,realization,oversample,log_m1,log_mean_gain,log_ratio",
        ),
        (
            "supnorm",
            "d,N,alpha,realization,sup_intensity,bound,violated",
        ),
        ("oracle-check", "route,configuration,value,tolerance,pass"),
    ];
    for (cmd, header) in expect {
        let out = stdout(&[cmd, "--reproducible"]);
        assert_eq!(out.lines().next().unwrap(), header, "{cmd}");
    }
    let out = stdout(&["scan-chain", "--reproducible"]);
    assert_eq!(out.lines().next().unwrap(), CHAIN_HEADER.join(","));
}

#[test]
fn timestamp_line_unless_reproducible() {
    let out = stdout(&["saddle"]);
    assert!(out.starts_with("# saddle generated_unix="));
    assert!(!stdout(&["saddle", "--reproducible"]).starts_with('#'));
}

#[test]
fn single_mode_values() {
    let dir = tempfile::tempdir().unwrap();
    let mean = write_config(
        dir.path(),
        "mean.json",
        r#"{"kind":"mean-gain","dims":[1],"cutoffs":[0],"gains":[0.5],"realizations":1}"#,
    );
    let out = stdout(&["mean-gain", "--config", &mean, "--reproducible"]);
    let v: f64 = column(&out, "log_mean_gain")[0].parse().unwrap();
    assert!((v - 0.5).abs() < 1e-10, "{v}");

    let erg = write_config(
        dir.path(),
        "erg.json",
        r#"{"kind":"scan-ergodicity","dims":[1],"cutoffs":[0],"gains":[0.5],"realizations":3}"#,
    );
    let out = stdout(&["scan-ergodicity", "--config", &erg, "--reproducible"]);
    for r in column(&out, "log_ratio") {
        assert!(r.parse::<f64>().unwrap().abs() < 1e-12, "{r}");
    }
}

#[test]
fn floats_carry_seventeen_digits() {
    let out = stdout(&["saddle", "--reproducible"]);
    for v in column(&out, "u0") {
        let mantissa = v.split('e').next().unwrap();
        assert_eq!(mantissa.replace(['.', '-'], "").len(), 17, "{v}");
    }
}

#[test]
fn out_flag_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sup.csv");
    let p = path.to_str().unwrap();
    let printed = stdout(&["supnorm", "--reproducible", "--out", p]);
    assert!(printed.is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    assert_eq!(written, stdout(&["supnorm", "--reproducible"]));
    assert_ne!(
        written,
        stdout(&["supnorm", "--reproducible", "--seed", "1"])
    );
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("bad.json", "{not json"),
        (
            "gain.json",
            r#"{"kind":"mean-gain","dims":[1],"cutoffs":[1],"gains":[0.0],"realizations":1}"#,
        ),
        (
            "dim.json",
            r#"{"kind":"mean-gain","dims":[4],"cutoffs":[1],"gains":[0.5],"realizations":1}"#,
        ),
        (
            "alpha.json",
            r#"{"kind":"supnorm","dims":[1],"cutoffs":[4],"gains":[1.0],"realizations":5,"alpha":0.5}"#,
        ),
        (
            "extra.json",
            r#"{"kind":"mean-gain","dims":[1],"cutoffs":[1],"gains":[0.5],"realizations":1,"bogus":1}"#,
        ),
    ];
    for (name, json) in cases {
        let path = write_config(dir.path(), name, json);
        let out = run(&["mean-gain", "--config", &path]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(!out.stderr.is_empty());
    }
    let supnorm = dir.path().join("alpha.json");
    let out = run(&["supnorm", "--config", supnorm.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(
        run(&["saddle", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["saddle", "--workers", "0"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn resource_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "huge.json",
        r#"{"kind":"supnorm","dims":[3],"cutoffs":[400],"gains":[1.0],"realizations":1}"#,
    );
    let out = run(&["supnorm", "--config", &path]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn worker_count_does_not_change_output() {
    for cmd in ["scan-chain", "oracle-check"] {
        let a = stdout(&[cmd, "--reproducible", "--workers", "1"]);
        let b = stdout(&[cmd, "--reproducible", "--workers", "5"]);
        assert_eq!(a, b, "{cmd}");
    }
}

fn config_strategy() -> impl Strategy<Value = ExperimentConfig> {
    (
        prop::sample::select(ExperimentKind::ALL.to_vec()),
        prop::collection::vec(0usize..300, 1..5),
        prop::collection::vec(1.01f64..50.0, 1..5),
        1000u64..1_000_000,
        2usize..=8,
        0.51f64..=1.0,
        1usize..16,
        any::<u64>(),
    )
        .prop_map(
            |(kind, cutoffs, gains, realizations, p_max, alpha, oversample, master_seed)| {
                ExperimentConfig {
                    kind,
                    dims: vec![1],
                    cutoffs,
                    gains,
                    realizations,
                    p_max,
                    alpha,
                    oversample,
                    output: None,
                    master_seed,
                }
            },
        )
}

proptest! {
    #[test]
    fn config_json_round_trip(config in config_strategy()) {
        config.validate().unwrap();
        let back = ExperimentConfig::from_json(&config.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, config);
    }
}
