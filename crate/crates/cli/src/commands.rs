//! The four subcommands. Each one takes resolved options, writes its report
//! files once at the end, and returns the in-memory report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dfq_core::adversary::{
    entangling_sweep, monte_carlo_detection, AttackModel, DetectionConfig, DetectionReport,
    EntangleSample,
};
use dfq_core::circuits::{check_histogram, run_scenario, Channel, CheckStatus, FigureScenario, ScenarioCheck};
use dfq_core::efficiency::{measure_efficiency, EfficiencyReport, MeasuredEfficiency};
use dfq_core::protocol::{run_protocol_detailed, ProtocolConfig, Verdict};
use dfq_core::EncodingFamily;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfigFile, SecretsMode};
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    write_file(path, &s)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

// ---------------------------------------------------------------- run

/// Protocol parameters echoed into the run report. Output paths are left out
/// so that reports from different directories compare equal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    pub protocol: ProtocolConfig,
    pub trials: usize,
    pub secrets: SecretsMode,
}

/// Physical qubits actually prepared, averaged over trials that ran to the
/// comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizedCounts {
    pub completed_trials: usize,
    pub qubits_prepared_by_tp_mean: f64,
    pub qubits_prepared_by_participants_mean: f64,
    pub compared_bits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: RunEcho,
    pub verdicts: BTreeMap<String, usize>,
    /// Trials whose verdict matches the secrets (equal or not).
    pub correct: usize,
    pub max_case1_error_rate: f64,
    pub efficiency: EfficiencyReport,
    pub realized: RealizedCounts,
}

impl RunReport {
    pub fn verdict_count(&self, v: Verdict) -> usize {
        self.verdicts.get(&v.to_string()).copied().unwrap_or(0)
    }
}

pub fn cmd_run(cfg: &RunConfigFile) -> CliResult<RunReport> {
    cfg.validate()?;
    let protocol = cfg.protocol();
    let mut rng = rng_for(cfg.seed);
    let transcript_dir = cfg.out_dir.join("transcripts");
    create_dir(&cfg.out_dir)?;
    if cfg.write_transcripts {
        create_dir(&transcript_dir)?;
    }

    let mut verdicts: BTreeMap<String, usize> = Verdict::ALL.iter().map(|v| (v.to_string(), 0)).collect();
    let mut correct = 0;
    let mut max_case1_error_rate: f64 = 0.0;
    let (mut completed, mut tp_total, mut part_total) = (0usize, 0usize, 0usize);
    let mut transcripts = Vec::new();
    for trial in 0..cfg.trials {
        let secrets = cfg.secrets.draw(cfg.n, cfg.l, &mut rng)?;
        let run = run_protocol_detailed(&protocol, &secrets, &mut rng)?;
        let verdict = run.result.verdict;
        *verdicts.entry(verdict.to_string()).or_default() += 1;
        let equal = secrets.windows(2).all(|w| w[0] == w[1]);
        if verdict == if equal { Verdict::AllEqual } else { Verdict::NotAllEqual } {
            correct += 1;
        }
        for s in &run.sessions {
            if s.case1_checked > 0 {
                max_case1_error_rate = max_case1_error_rate.max(s.case1_errors as f64 / s.case1_checked as f64);
            }
        }
        if !verdict.is_abort() {
            completed += 1;
            tp_total += run.sessions.iter().map(|s| 2 * s.pairs_prepared_by_tp).sum::<usize>();
            part_total += run.sessions.iter().map(|s| 2 * s.pairs_prepared_by_participant).sum::<usize>();
        }
        if cfg.write_transcripts {
            transcripts.push((transcript_dir.join(format!("trial_{trial:05}.jsonl")), run.transcript.to_jsonl()));
        }
    }
    let mean = |total: usize| if completed == 0 { 0.0 } else { total as f64 / completed as f64 };
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        config: RunEcho {
            protocol,
            trials: cfg.trials,
            secrets: cfg.secrets.clone(),
        },
        verdicts,
        correct,
        max_case1_error_rate,
        efficiency: EfficiencyReport::ideal(cfg.n, cfg.l)?,
        realized: RealizedCounts {
            completed_trials: completed,
            qubits_prepared_by_tp_mean: mean(tp_total),
            qubits_prepared_by_participants_mean: mean(part_total),
            compared_bits: cfg.n * cfg.l,
        },
    };
    for (path, text) in &transcripts {
        write_file(path, text)?;
    }
    write_json(&cfg.out_dir.join("run_report.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- attack sweep

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub model: AttackModel,
    pub family: EncodingFamily,
    pub m_values: Vec<u32>,
    pub trials: usize,
    /// Cap on full-protocol sessions per row; 0 skips that column.
    pub full_protocol_trials: usize,
    /// Coupling unitaries analysed when the model is an entangling attack.
    pub entangle_draws: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntangleSummary {
    pub family: EncodingFamily,
    pub draws: usize,
    pub silent: usize,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub seed: u64,
    pub reports: Vec<DetectionReport>,
    pub entangle: Option<EntangleSummary>,
}

/// Column order of `attack_sweep.csv`.
pub const SWEEP_COLUMNS: [&str; 16] = [
    "schema_version",
    "model",
    "family",
    "m",
    "trials",
    "per_group_estimate",
    "per_group_stderr",
    "closed_form_per_group",
    "per_group_pass",
    "overall_estimate",
    "overall_stderr",
    "closed_form_overall",
    "overall_pass",
    "full_protocol_estimate",
    "full_protocol_stderr",
    "full_protocol_trials",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_sweep_csv(path: &Path, reports: &[DetectionReport]) -> CliResult<()> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(SWEEP_COLUMNS).map_err(&err)?;
    for r in reports {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            r.model.label(),
            r.family.to_string(),
            r.m.to_string(),
            r.trials.to_string(),
            r.per_group_estimate.to_string(),
            r.per_group_stderr.to_string(),
            opt(r.closed_form_per_group),
            opt(r.per_group_pass),
            r.overall_estimate.to_string(),
            r.overall_stderr.to_string(),
            opt(r.closed_form_overall),
            opt(r.overall_pass),
            opt(r.full_protocol_estimate),
            opt(r.full_protocol_stderr),
            r.full_protocol_trials.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_entangle_csv(path: &Path, samples: &[EntangleSample]) -> CliResult<()> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(["params", "detection_prob", "eve_distinguishability", "violates"])
        .map_err(&err)?;
    for s in samples {
        w.write_record([
            s.params.label(),
            format!("{:e}", s.detection_prob),
            format!("{:e}", s.eve_distinguishability),
            s.violates().to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn cmd_attack_sweep(opts: &SweepOptions) -> CliResult<SweepReport> {
    if opts.trials == 0 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    opts.model.validate(opts.family)?;
    create_dir(&opts.out_dir)?;
    let mut rng = rng_for(opts.seed);
    let mut reports = Vec::with_capacity(opts.m_values.len());
    for &m in &opts.m_values {
        let dc = DetectionConfig {
            family: opts.family,
            m,
            full_protocol_trials: opts.full_protocol_trials,
        };
        reports.push(monte_carlo_detection(&dc, &opts.model, opts.trials, &mut rng)?);
    }

    let entangle = if matches!(opts.model, AttackModel::Entangle { .. }) && opts.entangle_draws > 0 {
        let samples = entangling_sweep(opts.family, opts.entangle_draws, &mut rng)?;
        write_entangle_csv(&opts.out_dir.join("entangle_sweep.csv"), &samples)?;
        Some(EntangleSummary {
            family: opts.family,
            draws: samples.len(),
            silent: samples
                .iter()
                .filter(|s| s.detection_prob < dfq_core::adversary::SILENT_DETECTION)
                .count(),
            violations: samples.iter().filter(|s| s.violates()).count(),
        })
    } else {
        None
    };

    let report = SweepReport {
        schema_version: SCHEMA_VERSION,
        seed: opts.seed,
        reports,
        entangle,
    };
    write_sweep_csv(&opts.out_dir.join("attack_sweep.csv"), &report.reports)?;
    write_json(&opts.out_dir.join("attack_sweep.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- figures

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiguresReport {
    pub schema_version: u32,
    pub seed: u64,
    pub shots: u64,
    pub checks: Vec<ScenarioCheck>,
}

impl FiguresReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status == CheckStatus::Pass)
    }
}

const CODEWORD_CONVENTION: &str = "\
# codewords: |0_dp>=|01> |1_dp>=|10> |+_dp>=(|01>+|10>)/sqrt2 |-_dp>=(|01>-|10>)/sqrt2
# codewords: |0_r>=(|00>+|11>)/sqrt2 |1_r>=(|01>-|10>)/sqrt2 |+_r>=(|00>+|01>-|10>+|11>)/2 |-_r>=(|00>-|01>+|10>+|11>)/2
# noise: RZ(pi/5) or RY(pi/5) on each qubit; CTRL reads out in the family's X basis, SIFT measures directly
";

fn scenario_line(s: &FigureScenario, c: &ScenarioCheck) -> String {
    let channel = match s.channel {
        Channel::Secure => "secure".to_string(),
        Channel::Insecure { fake } => format!("fake={fake}"),
    };
    let counts: Vec<String> = c.histogram.rows().iter().map(|(o, n)| format!("{o}:{n}")).collect();
    format!(
        "{} {} family={} prepared={} channel={} op={:?} shots={} max_sigma={:.3} counts={}",
        s.id,
        c.status,
        s.family,
        s.prepared,
        channel,
        s.operation,
        s.shots,
        c.max_sigma,
        counts.join(",")
    )
}

pub fn cmd_repro_figures(shots: u64, seed: u64, out_dir: &Path) -> CliResult<FiguresReport> {
    if shots == 0 {
        return Err(CliError::Config("shots must be at least 1".into()));
    }
    create_dir(out_dir)?;
    let mut rng = rng_for(seed);
    let mut checks = Vec::new();
    let mut summary = String::from(CODEWORD_CONVENTION);
    for s in FigureScenario::all(shots) {
        let h = run_scenario(&s, &mut rng);
        let c = check_histogram(&s, &h);
        let path = out_dir.join(format!("{}.csv", s.id.file_stem()));
        let err = csv_err(&path);
        let mut w = csv::Writer::from_path(&path).map_err(&err)?;
        w.write_record(["outcome", "count"]).map_err(&err)?;
        for (o, n) in h.rows() {
            w.write_record([o, n.to_string()]).map_err(&err)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        writeln!(summary, "{}", scenario_line(&s, &c)).expect("string write");
        checks.push(c);
    }
    write_file(&out_dir.join("summary.txt"), &summary)?;
    Ok(FiguresReport {
        schema_version: SCHEMA_VERSION,
        seed,
        shots,
        checks,
    })
}

// ---------------------------------------------------------------- efficiency

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyOutput {
    pub schema_version: u32,
    pub seed: u64,
    /// Expected-count convention.
    pub ideal: EfficiencyReport,
    /// Realized counts from running steps 1 and 2.
    pub measured: MeasuredEfficiency,
    /// Realized mean participant qubits within 4σ of the expected `5nl`.
    pub measured_matches_ideal: bool,
}

pub fn cmd_efficiency(family: EncodingFamily, n: usize, l: usize, runs: usize, seed: u64, out_dir: &Path) -> CliResult<EfficiencyOutput> {
    let ideal = EfficiencyReport::ideal(n, l)?;
    let mut rng = rng_for(seed);
    let measured = measure_efficiency(family, n, l, runs, &mut rng)?;
    let expected = ideal.qubits_prepared_by_participants as f64;
    let matches = (measured.participant_qubits_mean - expected).abs() < 4.0 * measured.participant_qubits_model_stderr;
    let out = EfficiencyOutput {
        schema_version: SCHEMA_VERSION,
        seed,
        ideal,
        measured,
        measured_matches_ideal: matches,
    };
    create_dir(out_dir)?;
    write_json(&out_dir.join("efficiency.json"), &out)?;
    Ok(out)
}
