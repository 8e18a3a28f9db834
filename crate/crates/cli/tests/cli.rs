use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use thinsw_cli::emit::sha256_hex;
use thinsw_cli::pipeline::has_structure;
use thinsw_cli::{Config, RunManifest};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thinsw"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            header
                .iter()
                .zip(rec.unwrap().iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

#[test]
fn shipped_default_config_is_valid_and_complete() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let cfg = Config::parse(&text).unwrap();
    assert_eq!(cfg, Config::default());
    let o = run(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn validate_lists_every_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        r#"{"study": {"eps_list": [0.01, 0.02, 0.03, 0.04]}, "params": {"gamma_bar": -0.5}, "probes": {"samples": 10}}"#,
    );
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(
        out.contains("study.eps_list: eps_list must be strictly decreasing"),
        "{out}"
    );
    assert!(out.contains("params.gamma_bar"), "{out}");
    assert!(out.contains("probes.samples"), "{out}");
    assert_eq!(out.lines().count(), 3, "{out}");
}

#[test]
fn parse_errors_carry_their_position() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "broken.json",
        "{\n  \"sw\": {\n    \"dt\": oops\n  }\n}\n",
    );
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("line 3"));
}

#[test]
fn validation_failure_stops_a_run_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", r#"{"params": {"gamma_bar": -1}}"#);
    let out = tmp.path().join("out");
    let o = run(&[
        "sw",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn exit_codes_for_usage_io_and_numerics() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write_config(tmp.path(), "c.json", "{}");
    assert_eq!(
        code(&run(&["frobnicate", "--config", good.to_str().unwrap()])),
        64
    );
    assert_eq!(code(&run(&["sw"])), 64);

    let missing = tmp.path().join("missing.json");
    assert_eq!(
        code(&run(&["sw", "--config", missing.to_str().unwrap()])),
        74
    );

    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let under_file = blocker.join("out");
    let o = run(&[
        "ansatz",
        "--config",
        good.to_str().unwrap(),
        "--out",
        under_file.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 74);

    // A step far above the stability bound is a numerical failure, not a config error.
    let unstable = write_config(tmp.path(), "u.json", r#"{"sw": {"dt": 0.1, "T": 1.0}}"#);
    let o = run(&[
        "sw",
        "--config",
        unstable.to_str().unwrap(),
        "--out",
        tmp.path().join("u").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn equilibrium_study_is_exact_and_flagged_degenerate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "eq.json",
        r#"{"sw": {"init": {"amplitude": 0.0}}, "study": {"refine": false}}"#,
    );
    let out = tmp.path().join("out");
    let o = run(&[
        "study",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for row in csv_rows(&out.join("study.csv")) {
        assert!(row["norm_sup"].parse::<f64>().unwrap() <= 1e-12, "{row:?}");
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("study_summary.json")).unwrap()).unwrap();
    let flags: Vec<&str> = summary["flags"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap())
        .collect();
    for kind in ["interior_momentum", "kinematic", "traction"] {
        assert!(
            flags.contains(&format!("degenerate fit: {kind}").as_str()),
            "{flags:?}"
        );
    }
    assert!(!out.join("claim_discrepancy.json").exists());
}

#[test]
fn korn_rows_show_the_cluster_structure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", "{}");
    let out = tmp.path().join("out");
    assert_eq!(
        code(&run(&[
            "korn",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ])),
        0
    );
    let rows = csv_rows(&out.join("korn_sweep.csv"));
    assert_eq!(rows.len(), 200 * 2);
    for row in rows {
        let m: f64 = row["M"].parse().unwrap();
        let eig: Vec<f64> = (1..=6)
            .map(|i| row[&format!("eig{i}")].parse().unwrap())
            .collect();
        let tol = if m < 0.1 { 1e-4 } else { 1e-6 };
        assert!(
            has_structure(&eig.clone().try_into().unwrap(), tol),
            "{row:?}"
        );
        let lambda: f64 = row["lambda"].parse().unwrap();
        assert!(lambda > 0.0 && lambda <= 1.0 + 1e-12);
        assert!(row["cond_flag"].is_empty());
    }
}

#[test]
fn manifest_lists_exactly_the_files_on_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", "{}");
    let out = tmp.path().join("out");
    let c = cfg.to_str().unwrap();
    let o = out.to_str().unwrap();
    assert_eq!(code(&run(&["laplace", "--config", c, "--out", o])), 0);
    assert_eq!(code(&run(&["ansatz", "--config", c, "--out", o])), 0);

    let m = manifest(&out);
    assert_eq!(m.subcommand, "ansatz");
    assert_eq!(m.config_sha256, sha256_hex(b"{}"));
    let on_disk = read_dir(&out);
    let listed: Vec<&str> = m.files.iter().map(|f| f.file.as_str()).collect();
    let mut expected: Vec<&str> = listed.clone();
    expected.push("manifest.json");
    expected.sort();
    assert_eq!(
        on_disk.keys().map(String::as_str).collect::<Vec<_>>(),
        expected
    );
    for f in &m.files {
        assert_eq!(sha256_hex(&on_disk[&f.file]), f.sha256);
        assert_eq!(on_disk[&f.file].len(), f.bytes);
    }
}

#[test]
fn formats_select_the_emitted_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"output": {"formats": ["json"]}}"#);
    let out = tmp.path().join("out");
    assert_eq!(
        code(&run(&[
            "sw",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ])),
        0
    );
    let names: Vec<String> = read_dir(&out).into_keys().collect();
    assert_eq!(
        names,
        vec!["manifest.json".to_string(), "sw_summary.json".to_string()]
    );
}

#[test]
fn probe_reports_repeat_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"probes": {"seed": 99, "samples": 50}}"#,
    );
    let mut seen = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("t{threads}"));
        let o = run(&[
            "probe",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert_eq!(code(&o), 0);
        let mut files = read_dir(&out);
        files.remove("manifest.json");
        seen.push(files);
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn zero_threads_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", "{}");
    let o = run(&[
        "sw",
        "--config",
        cfg.to_str().unwrap(),
        "--threads",
        "0",
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
}
