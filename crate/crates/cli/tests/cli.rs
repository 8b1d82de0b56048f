use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const HOMOG: &str = "version = 1\n[model]\nmu_hat = 1.0\nkappa = 1.0\n";

fn kpp_lab(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kpp-lab"));
    cmd.args(args).env_remove("KPP_LAB_OUT");
    if let Some(dir) = env_out {
        cmd.env("KPP_LAB_OUT", dir);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn dispersion_reports_the_homogeneous_speed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), HOMOG);
    let out = dir.path().join("out");
    let o = kpp_lab(
        &[
            "dispersion",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("dispersion.json")).unwrap()).unwrap();
    assert!((json["c_star"].as_f64().unwrap() - 2.0).abs() <= 1e-6);
    assert_eq!(json["format_version"], 1);
    let hash = json["config_sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);

    let csv = fs::read_to_string(out.join("dispersion.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        format!("# kpp-lab format_version=1 config_sha256={hash}")
    );
    assert_eq!(lines.next().unwrap(), "lambda,mu,c_of_lambda");
    assert!(!csv.contains('\r'));
    // every value carries 17 significant digits
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!(
        first
            .iter()
            .all(|v| v.trim_start_matches('-').split('e').next().unwrap().len() == 18),
        "{first:?}"
    );
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = kpp_lab(&["frobnicate"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{HOMOG}[scheme]\ndt = -0.1\n"));
    let o = kpp_lab(
        &[
            "simulate",
            "--config",
            &cfg,
            "--out",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scheme.dt must be positive"));

    let missing = kpp_lab(&["simulate", "--config", "/nonexistent.toml"], None);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn strict_promotes_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{HOMOG}[init]\nkind = \"exp_tail\"\nparams = {{ rate = 0.5 }}\n"),
    );
    let out = dir.path().join("out");
    let lax = kpp_lab(
        &[
            "dispersion",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(lax.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&lax.stderr).contains("warning"));
    let strict = kpp_lab(
        &[
            "dispersion",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--strict",
        ],
        None,
    );
    assert_eq!(strict.status.code(), Some(2));
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let from_cfg = dir.path().join("from_cfg");
    let from_env = dir.path().join("from_env");
    let from_flag = dir.path().join("from_flag");
    let cfg = write_config(
        dir.path(),
        &format!("{HOMOG}[output]\ndir = \"{}\"\n", from_cfg.display()),
    );
    assert_eq!(
        kpp_lab(&["dispersion", "--config", &cfg], None)
            .status
            .code(),
        Some(0)
    );
    assert!(from_cfg.join("dispersion.json").exists());
    assert_eq!(
        kpp_lab(&["dispersion", "--config", &cfg], Some(&from_env))
            .status
            .code(),
        Some(0)
    );
    assert!(from_env.join("dispersion.json").exists());
    let flag = kpp_lab(
        &[
            "dispersion",
            "--config",
            &cfg,
            "--out",
            from_flag.to_str().unwrap(),
        ],
        Some(&from_env),
    );
    assert_eq!(flag.status.code(), Some(0));
    assert!(from_flag.join("dispersion.json").exists());
}

#[test]
fn repeated_simulations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{HOMOG}[run]\nt_end = 10.0\nsnapshot_dt = 5.0\nstations = [5.0, 10.0]\n"),
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = kpp_lab(
            &[
                "simulate",
                "--config",
                &cfg,
                "--out",
                out.to_str().unwrap(),
                "--threads",
                threads,
            ],
            None,
        );
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert!(names.len() >= 5);
    for n in names {
        assert_eq!(
            fs::read(a.join(&n)).unwrap(),
            fs::read(b.join(&n)).unwrap(),
            "{n:?}"
        );
    }
    let hits = fs::read_to_string(a.join("hits.csv")).unwrap();
    assert_eq!(hits.lines().count(), 4);
}

#[test]
fn echoed_config_reproduces_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), HOMOG);
    let out = dir.path().join("out");
    assert_eq!(
        kpp_lab(
            &[
                "dispersion",
                "--config",
                &cfg,
                "--out",
                out.to_str().unwrap()
            ],
            None
        )
        .status
        .code(),
        Some(0)
    );
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("dispersion.json")).unwrap()).unwrap();
    let echo = dir.path().join("echo.toml");
    fs::write(&echo, json["config"].as_str().unwrap()).unwrap();
    let out2 = dir.path().join("out2");
    assert_eq!(
        kpp_lab(
            &[
                "dispersion",
                "--config",
                echo.to_str().unwrap(),
                "--out",
                out2.to_str().unwrap()
            ],
            None
        )
        .status
        .code(),
        Some(0)
    );
    assert_eq!(
        fs::read(out.join("dispersion.json")).unwrap(),
        fs::read(out2.join("dispersion.json")).unwrap()
    );
}
