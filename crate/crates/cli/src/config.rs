//! JSON run configuration.
//!
//! Every field is optional; missing ones take the defaults below and unknown
//! ones are rejected. The canonical form is pretty-printed JSON with a
//! trailing newline, and parsing then re-serializing it is byte-identical.
//!
//! | field                  | default                     |
//! |------------------------|-----------------------------|
//! | `family`               | `"dephasing"`               |
//! | `n`                    | `3`                         |
//! | `l`                    | `8`                         |
//! | `delta`                | `1.0`                       |
//! | `theta_policy`         | `"random_per_transmission"` |
//! | `seed`                 | `0`                         |
//! | `attack`               | `{"kind": "none"}`          |
//! | `tolerable_error_rate` | `0.0`                       |
//! | `trials`               | `100`                       |
//! | `secrets`              | `{"kind": "random"}`        |
//! | `out_dir`              | `"dfq-out"`                 |
//! | `write_transcripts`    | `false`                     |

use std::path::{Path, PathBuf};

use dfq_core::adversary::AttackModel;
use dfq_core::protocol::{ProtocolConfig, Secret, ThetaPolicy};
use dfq_core::EncodingFamily;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// How participants' secrets are drawn for each trial.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SecretsMode {
    /// Independent uniform bits for every participant.
    #[default]
    Random,
    /// One uniform string shared by all participants.
    Equal,
    /// A shared uniform string with one random bit flipped for the last
    /// participant.
    OneBitDiffers,
    /// Fixed strings, one per participant, reused every trial.
    Explicit { bits: Vec<Vec<u8>> },
}

impl SecretsMode {
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, l: usize, rng: &mut R) -> CliResult<Vec<Secret>> {
        Ok(match self {
            SecretsMode::Random => (0..n).map(|_| Secret::random(l, rng)).collect(),
            SecretsMode::Equal => vec![Secret::random(l, rng); n],
            SecretsMode::OneBitDiffers => {
                let base = Secret::random(l, rng);
                let mut out = vec![base; n];
                let j = rng.random_range(0..l);
                out[n - 1].bits[j] ^= 1;
                out
            }
            SecretsMode::Explicit { bits } => bits
                .iter()
                .map(|b| Secret::new(b.clone()))
                .collect::<Result<_, _>>()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfigFile {
    pub family: EncodingFamily,
    pub n: usize,
    pub l: usize,
    pub delta: f64,
    pub theta_policy: ThetaPolicy,
    pub seed: u64,
    pub attack: AttackModel,
    pub tolerable_error_rate: f64,
    pub trials: usize,
    pub secrets: SecretsMode,
    pub out_dir: PathBuf,
    pub write_transcripts: bool,
}

impl Default for RunConfigFile {
    fn default() -> Self {
        let p = ProtocolConfig::default();
        Self {
            family: p.family,
            n: p.n,
            l: p.l,
            delta: p.delta,
            theta_policy: p.theta_policy,
            seed: p.seed,
            attack: p.attack,
            tolerable_error_rate: p.tolerable_error_rate,
            trials: 100,
            secrets: SecretsMode::Random,
            out_dir: PathBuf::from("dfq-out"),
            write_transcripts: false,
        }
    }
}

impl RunConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_canonical(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            family: self.family,
            n: self.n,
            l: self.l,
            delta: self.delta,
            theta_policy: self.theta_policy,
            seed: self.seed,
            attack: self.attack.clone(),
            tolerable_error_rate: self.tolerable_error_rate,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.protocol().validate()?;
        if self.trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        if let SecretsMode::Explicit { bits } = &self.secrets {
            if bits.len() != self.n || bits.iter().any(|b| b.len() != self.l) {
                return Err(CliError::Config(format!(
                    "explicit secrets must be {} strings of {} bits",
                    self.n, self.l
                )));
            }
            for b in bits {
                Secret::new(b.clone())?;
            }
        }
        Ok(())
    }
}
