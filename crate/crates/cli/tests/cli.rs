use std::path::Path;
use std::process::Command as Process;

use ricker_ide::model::Frame;
use ricker_ide_cli::{load_config, run, Command, ConfigError, ExperimentConfig, RunOptions};

const MINIMAL: &str = "\
model.r1 = 0.5
model.r2 = 0.5
model.a1 = 2
model.a2 = 3
kernel1.family = gaussian
kernel2.family = gaussian
";

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

fn config_in(dir: &Path, extra: &str) -> ExperimentConfig {
    let text = format!(
        "{MINIMAL}output.dir = {}\n{extra}",
        dir.join("out").display()
    );
    load_config(Some(&write_config(dir, &text)), &[]).unwrap()
}

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn flag_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &format!("{MINIMAL}grid.dx = 0.1\n"));
    let cfg = load_config(Some(&path), &[("grid.dx".into(), "0.05".into())]).unwrap();
    assert_eq!(cfg.dx, 0.05);
    let cfg = load_config(Some(&path), &[]).unwrap();
    assert_eq!(cfg.dx, 0.1);
}

#[test]
fn bad_override_and_missing_file() {
    let err = load_config(None, &[("grid.dx".into(), "fine".into())]).unwrap_err();
    assert!(matches!(err, ConfigError::Override { .. }));
    let err = load_config(Some(Path::new("/nonexistent/run.cfg")), &[]).unwrap_err();
    assert!(matches!(err, ConfigError::Io { .. }));
    let err = load_config(None, &[("grid.dx".into(), "-0.1".into())]).unwrap_err();
    assert!(matches!(err, ConfigError::Invalid(_)));
}

#[test]
fn default_config_validates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        output_dir: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    let report = run(Command::Validate, &cfg, &RunOptions::default()).unwrap();
    assert!(report.passed(), "{report}");
}

#[test]
fn inadmissible_rate_names_the_clause() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), "");
    let cfg = ExperimentConfig {
        model: ricker_ide::ModelParams {
            r1: 1.5,
            ..cfg.model
        },
        ..cfg
    };
    for cmd in [Command::Validate, Command::Speeds { curve: false }] {
        let report = run(cmd, &cfg, &RunOptions::default()).unwrap();
        let failed: Vec<_> = report
            .checks
            .failures()
            .map(|c| c.clause.as_str())
            .collect();
        assert_eq!(failed, vec!["H1 r1 in (0,1)"]);
        let detail = &report.checks.failures().next().unwrap().detail;
        assert_eq!(detail, "r1 = 1.5");
    }
}

#[test]
fn sweep_over_a2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), "sweep.a2 = 2, 3, 4\n");
    let report = run(Command::Sweep, &cfg, &RunOptions { jobs: 3, seed: 0 }).unwrap();
    assert!(report.passed(), "{report}");
    let rows = data_rows(&dir.path().join("out/sweep.csv"));
    assert_eq!(rows.len(), 4);
    for (i, row) in rows[1..].iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[0], i.to_string());
        assert_eq!(cols[4], ["2", "3", "4"][i]);
        assert!(cols[6].parse::<f64>().unwrap() > 0.0);
        assert!(cols[7].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn sweep_rows_do_not_depend_on_jobs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let extra = "sweep.r1 = 0.2, 0.8\nsweep.a1 = 1.5, 3\nsweep.sigma = 0.5, 2\n";
    run(
        Command::Sweep,
        &config_in(a.path(), extra),
        &RunOptions { jobs: 1, seed: 0 },
    )
    .unwrap();
    run(
        Command::Sweep,
        &config_in(b.path(), extra),
        &RunOptions { jobs: 4, seed: 0 },
    )
    .unwrap();
    let ra = data_rows(&a.path().join("out/sweep.csv"));
    assert_eq!(ra.len(), 9);
    assert_eq!(ra, data_rows(&b.path().join("out/sweep.csv")));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), "");
    let cmd = Command::Speeds { curve: true };
    run(cmd, &cfg, &RunOptions::default()).unwrap();
    let first = std::fs::read(dir.path().join("out/speeds_curve.csv")).unwrap();
    run(cmd, &cfg, &RunOptions::default()).unwrap();
    assert_eq!(
        first,
        std::fs::read(dir.path().join("out/speeds_curve.csv")).unwrap()
    );
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with(&format!(
        "# ricker-ide speeds config-sha256 {}\n",
        cfg.digest()
    )));
    assert_eq!(text.lines().nth(1), Some("speed,mu,objective"));
}

#[test]
fn wave_then_validate_profile() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), "");
    let report = run(
        Command::Wave {
            frame: Frame::Original,
        },
        &cfg,
        &RunOptions::default(),
    )
    .unwrap();
    assert!(report.passed(), "{report}");
    let rows = data_rows(&dir.path().join("out/wave.csv"));
    assert_eq!(rows[0], "x,u,v");
    let first: Vec<f64> = rows[1].split(',').map(|s| s.parse().unwrap()).collect();
    let last: Vec<f64> = rows[rows.len() - 1]
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    // original frame: E1 = (1,0) on the left, E2 = (0,1) on the right
    assert!((first[1] - 1.0).abs() < 1e-3 && first[2].abs() < 1e-3);
    assert!(last[1].abs() < 1e-3 && (last[2] - 1.0).abs() < 1e-3);
}

#[test]
fn table_kernel_path_is_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let table: String = (-20..=20)
        .map(|i| {
            let x = i as f64 * 0.1;
            format!("{x} {}\n", (1.0 - x.abs() / 2.0).max(0.0))
        })
        .collect();
    std::fs::write(dir.path().join("tent.txt"), table).unwrap();
    let text = MINIMAL.replace(
        "kernel2.family = gaussian",
        "kernel2.family = table\nkernel2.table = tent.txt",
    );
    let out = dir.path().join("out");
    let path = write_config(
        dir.path(),
        &format!("{text}output.dir = {}\n", out.display()),
    );
    let cfg = load_config(Some(&path), &[]).unwrap();
    let report = run(
        Command::Speeds { curve: false },
        &cfg,
        &RunOptions::default(),
    )
    .unwrap();
    assert!(report.passed(), "{report}");
}

#[test]
fn binary_exit_status() {
    let bin = env!("CARGO_BIN_EXE_ricker-ide");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let ok = Process::new(bin)
        .args(["equilibria", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("all checks passed"));

    let bad = write_config(
        dir.path(),
        &MINIMAL.replace("model.r1 = 0.5", "model.r1 = 1.5"),
    );
    let fail = Process::new(bin)
        .args(["equilibria", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(fail.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&fail.stdout).contains("FAIL H1 r1 in (0,1): r1 = 1.5"));

    let broken = write_config(dir.path(), &format!("{MINIMAL}model.r3 = 1\n"));
    let err = Process::new(bin)
        .arg("validate")
        .arg("--config")
        .arg(&broken)
        .output()
        .unwrap();
    assert_eq!(err.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&err.stderr).contains("line 7"));
}
