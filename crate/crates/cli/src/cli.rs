//! Argument parsing and option resolution.
//!
//! Seeds resolve as `--seed`, then `DFQ_SEED`, then the config file, then 0.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dfq_core::adversary::{AttackModel, EntangleParams};
use dfq_core::circuits::DEFAULT_SHOTS;
use dfq_core::protocol::Verdict;
use dfq_core::{EncodingFamily, LogicalBasis, LogicalValue};

use crate::commands::{cmd_attack_sweep, cmd_efficiency, cmd_repro_figures, cmd_run, SweepOptions};
use crate::config::RunConfigFile;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "dfq", version, about = "Semi-quantum private comparison over decoherence-free logical qubits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Encoding family: dephasing or rotation
    #[arg(long)]
    pub family: Option<EncodingFamily>,

    /// Number of participants
    #[arg(long)]
    pub n: Option<usize>,

    /// Secret length in bits
    #[arg(long)]
    pub l: Option<usize>,

    /// Over-provisioning factor for the TP sequence
    #[arg(long)]
    pub delta: Option<f64>,

    /// Number of trials (protocol runs, Monte Carlo draws, or efficiency runs)
    #[arg(long)]
    pub trials: Option<usize>,

    /// RNG seed
    #[arg(long, env = "DFQ_SEED")]
    pub seed: Option<u64>,

    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    None,
    /// Replace every pair with a fresh logical zero of the same family
    InterceptResend,
    /// Measure in the family's Z basis and resend the outcome
    MeasureResend,
    /// Couple a Haar-random ancilla unitary and sweep coupling unitaries
    Entangle,
}

impl ModelArg {
    fn model(self, family: EncodingFamily, seed: u64) -> AttackModel {
        match self {
            ModelArg::None => AttackModel::None,
            ModelArg::InterceptResend => AttackModel::InterceptResend {
                fake_value: LogicalValue::Zero,
                fake_family: family,
            },
            ModelArg::MeasureResend => AttackModel::MeasureResend {
                measure_basis: LogicalBasis::z(family),
            },
            ModelArg::Entangle => AttackModel::Entangle {
                params: EntangleParams::Haar { seed },
            },
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the comparison protocol end to end
    Run {
        #[command(flatten)]
        common: Common,

        /// Write one JSON-lines transcript per trial
        #[arg(long)]
        transcripts: bool,
    },
    /// Estimate detection probabilities for an attack model
    AttackSweep {
        #[command(flatten)]
        common: Common,

        /// Attack model; defaults to the config's attack, or intercept-resend
        #[arg(long, value_enum)]
        model: Option<ModelArg>,

        /// Attacked group counts, comma separated
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        m: Vec<u32>,

        /// Cap on full-protocol sessions per row (0 to skip)
        #[arg(long, default_value_t = 1000)]
        full_trials: usize,

        /// Coupling unitaries analysed for the entangle model
        #[arg(long, default_value_t = 1200)]
        draws: usize,
    },
    /// Sample the six fixed noise circuits and check their histograms
    ReproFigures {
        #[command(flatten)]
        common: Common,

        #[arg(long, default_value_t = DEFAULT_SHOTS)]
        shots: u64,
    },
    /// Qubit-efficiency accounting, expected and realized
    Efficiency {
        #[command(flatten)]
        common: Common,
    },
}

pub const DEFAULT_SWEEP_TRIALS: usize = 100_000;
pub const DEFAULT_EFFICIENCY_RUNS: usize = 1000;

/// Config file merged with command-line overrides.
pub fn resolve(common: &Common) -> CliResult<RunConfigFile> {
    let mut cfg = match &common.config {
        Some(path) => RunConfigFile::load(path)?,
        None => RunConfigFile::default(),
    };
    if let Some(f) = common.family {
        cfg.family = f;
    }
    if let Some(n) = common.n {
        cfg.n = n;
    }
    if let Some(l) = common.l {
        cfg.l = l;
    }
    if let Some(d) = common.delta {
        cfg.delta = d;
    }
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

/// Runs a parsed command and returns the text to print on success.
pub fn execute(cli: Cli) -> CliResult<String> {
    let mut out = String::new();
    match cli.command {
        Command::Run { common, transcripts } => {
            let mut cfg = resolve(&common)?;
            cfg.write_transcripts |= transcripts;
            let report = cmd_run(&cfg)?;
            for v in Verdict::ALL {
                writeln!(out, "{v}: {}", report.verdict_count(v)).unwrap();
            }
            writeln!(out, "correct: {}/{}", report.correct, cfg.trials).unwrap();
            writeln!(out, "report: {}", cfg.out_dir.join("run_report.json").display()).unwrap();
        }
        Command::AttackSweep { common, model, m, full_trials, draws } => {
            let cfg = resolve(&common)?;
            let model = match model {
                Some(arg) => arg.model(cfg.family, cfg.seed),
                None if cfg.attack != AttackModel::None => cfg.attack.clone(),
                None => ModelArg::InterceptResend.model(cfg.family, cfg.seed),
            };
            let opts = SweepOptions {
                model,
                family: cfg.family,
                m_values: m,
                trials: common.trials.unwrap_or(DEFAULT_SWEEP_TRIALS),
                full_protocol_trials: full_trials,
                entangle_draws: draws,
                seed: cfg.seed,
                out_dir: cfg.out_dir.clone(),
            };
            let report = cmd_attack_sweep(&opts)?;
            for r in &report.reports {
                writeln!(
                    out,
                    "m={} estimate={:.4}±{:.4} closed_form={} pass={}",
                    r.m,
                    r.overall_estimate,
                    r.overall_stderr,
                    r.closed_form_overall.map_or("-".into(), |p| format!("{p:.4}")),
                    r.overall_pass.map_or("-".into(), |p| p.to_string()),
                )
                .unwrap();
            }
            if let Some(e) = &report.entangle {
                writeln!(out, "entangle sweep: {} draws, {} silent, {} violations", e.draws, e.silent, e.violations).unwrap();
            }
        }
        Command::ReproFigures { common, shots } => {
            let cfg = resolve(&common)?;
            let report = cmd_repro_figures(shots, cfg.seed, &cfg.out_dir)?;
            for c in &report.checks {
                writeln!(out, "{} {}", c.id, c.status).unwrap();
            }
        }
        Command::Efficiency { common } => {
            let cfg = resolve(&common)?;
            let runs = common.trials.unwrap_or(DEFAULT_EFFICIENCY_RUNS);
            let e = cmd_efficiency(cfg.family, cfg.n, cfg.l, runs, cfg.seed, &cfg.out_dir)?;
            writeln!(out, "xi = {}", e.ideal.xi).unwrap();
            writeln!(
                out,
                "participant qubits: expected {} measured {:.2}±{:.2}",
                e.ideal.qubits_prepared_by_participants, e.measured.participant_qubits_mean, e.measured.participant_qubits_model_stderr
            )
            .unwrap();
        }
    }
    Ok(out)
}
