use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dfq_cli::commands::{cmd_attack_sweep, cmd_repro_figures, cmd_run, SweepOptions, SWEEP_COLUMNS};
use dfq_cli::config::{RunConfigFile, SecretsMode};
use dfq_cli::error::{EXIT_CONFIG, EXIT_IO};
use dfq_core::adversary::AttackModel;
use dfq_core::circuits::CheckStatus;
use dfq_core::protocol::Verdict;
use dfq_core::{EncodingFamily, LogicalValue};

fn dfq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfq"))
        .args(args)
        .env_remove("DFQ_SEED")
        .output()
        .expect("binary runs")
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn malformed_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{ not json").unwrap();
    let out = dfq(&["run", "--config", path_arg(&cfg), "--out", path_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));

    fs::write(&cfg, r#"{"n": 3, "qubits": 4}"#).unwrap();
    let out = dfq(&["run", "--config", path_arg(&cfg), "--out", path_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&out.stderr).contains("qubits"));

    let out = dfq(&["run", "--n", "1", "--out", path_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn unwritable_output_exits_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = dfq(&["efficiency", "--trials", "5", "--out", path_arg(&blocker.join("sub"))]);
    assert_eq!(out.status.code(), Some(EXIT_IO));
}

#[test]
fn env_seed_is_used_and_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed_env: &str, extra: &[&str], out: &Path| {
        let mut args = vec!["repro-figures", "--shots", "50", "--out", path_arg(out)];
        args.extend_from_slice(extra);
        let status = Command::new(env!("CARGO_BIN_EXE_dfq"))
            .args(&args)
            .env("DFQ_SEED", seed_env)
            .status()
            .unwrap();
        assert!(status.success());
        fs::read_to_string(out.join("fig5.csv")).unwrap()
    };
    let a = run("7", &[], &dir.path().join("a"));
    let b = run("8", &["--seed", "7"], &dir.path().join("b"));
    let c = run("8", &[], &dir.path().join("c"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn config_file_round_trips_through_canonical_form() {
    let text = r#"{"family": "rotation", "l": 4, "attack": {"kind": "intercept_resend", "fake_value": "zero", "fake_family": "rotation"}}"#;
    let cfg = RunConfigFile::parse(text).unwrap();
    assert_eq!(cfg.family, EncodingFamily::Rotation);
    assert_eq!(
        cfg.attack,
        AttackModel::InterceptResend {
            fake_value: LogicalValue::Zero,
            fake_family: EncodingFamily::Rotation
        }
    );
    let canonical = cfg.to_canonical();
    assert_eq!(RunConfigFile::parse(&canonical).unwrap(), cfg);
    assert_eq!(RunConfigFile::parse(&canonical).unwrap().to_canonical(), canonical);
}

#[test]
fn run_reports_correct_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    for (secrets, expected) in [
        (SecretsMode::Equal, Verdict::AllEqual),
        (SecretsMode::OneBitDiffers, Verdict::NotAllEqual),
    ] {
        let cfg = RunConfigFile {
            trials: 30,
            secrets,
            seed: 4,
            out_dir: dir.path().to_path_buf(),
            write_transcripts: true,
            ..Default::default()
        };
        let report = cmd_run(&cfg).unwrap();
        assert_eq!(report.verdict_count(expected), 30);
        assert_eq!(report.correct, 30);
        assert_eq!(report.max_case1_error_rate, 0.0);
    }
    assert!(dir.path().join("run_report.json").exists());
    assert!(dir.path().join("transcripts/trial_00029.jsonl").exists());
}

#[test]
fn sweep_with_zero_groups_never_detects() {
    let dir = tempfile::tempdir().unwrap();
    let opts = SweepOptions {
        model: AttackModel::InterceptResend {
            fake_value: LogicalValue::Zero,
            fake_family: EncodingFamily::Dephasing,
        },
        family: EncodingFamily::Dephasing,
        m_values: vec![0, 2],
        trials: 2000,
        full_protocol_trials: 0,
        entangle_draws: 0,
        seed: 1,
        out_dir: dir.path().to_path_buf(),
    };
    let report = cmd_attack_sweep(&opts).unwrap();
    assert_eq!(report.reports[0].overall_estimate, 0.0);
    assert_eq!(report.reports[0].closed_form_overall, Some(0.0));
    assert_eq!(report.reports[0].overall_pass, Some(true));
    assert!(report.reports[0].full_protocol_estimate.is_none());

    let csv = fs::read_to_string(dir.path().join("attack_sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), SWEEP_COLUMNS.join(","));
    assert_eq!(lines.count(), 2);
}

#[test]
fn too_few_shots_skip_the_checks() {
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_repro_figures(1, 0, dir.path()).unwrap();
    assert!(report.checks.iter().all(|c| c.status == CheckStatus::Skipped));
    assert!(!report.all_pass());
}

#[test]
fn figure_files_hold_only_observed_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_repro_figures(2000, 3, dir.path()).unwrap();
    assert!(report.all_pass());
    assert_eq!(fs::read_to_string(dir.path().join("fig1.csv")).unwrap(), "outcome,count\n11,2000\n");
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    let status_lines: Vec<&str> = summary.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(status_lines.len(), 6);
    assert!(status_lines.iter().all(|l| l.split(' ').nth(1) == Some("PASS")));
}
