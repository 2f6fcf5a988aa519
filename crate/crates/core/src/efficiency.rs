//! Qubit-efficiency accounting: compared classical bits over physical qubits
//! prepared by TP and the participants.

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::codec::EncodingFamily;
use crate::error::{Error, Result};
use crate::protocol::{participant_process, tp_prepare_sequence, ProtocolConfig};
use crate::statevector::StateVector;

fn ratio_as_string<S: Serializer>(r: &Ratio<u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(r)
}

fn ratio_from_string<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Ratio<u64>, D::Error> {
    let text = String::deserialize(d)?;
    text.parse().map_err(serde::de::Error::custom)
}

/// Counts under the expected-value convention at δ = 0: each participant
/// receives `5l` pairs, re-prepares half of them, and `l` bits are compared
/// per participant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub n: usize,
    pub l: usize,
    pub qubits_prepared_by_tp: u64,
    pub qubits_prepared_by_participants: u64,
    pub compared_bits: u64,
    #[serde(serialize_with = "ratio_as_string", deserialize_with = "ratio_from_string")]
    pub xi: Ratio<u64>,
}

impl EfficiencyReport {
    pub fn ideal(n: usize, l: usize) -> Result<Self> {
        if n == 0 || l == 0 {
            return Err(Error::InvalidConfig("n and l must be at least 1".into()));
        }
        let nl = (n * l) as u64;
        let tp = 10 * nl;
        let participants = 5 * nl;
        Ok(Self {
            n,
            l,
            qubits_prepared_by_tp: tp,
            qubits_prepared_by_participants: participants,
            compared_bits: nl,
            xi: Ratio::new(nl, tp + participants),
        })
    }
}

/// Realized counts from actually running steps 1 and 2 at δ = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasuredEfficiency {
    pub n: usize,
    pub l: usize,
    pub runs: usize,
    pub family: EncodingFamily,
    pub qubits_prepared_by_tp: u64,
    pub participant_qubits_mean: f64,
    /// Sample standard error of the mean.
    pub participant_qubits_stderr: f64,
    /// Binomial standard error of the mean under a fair SIFT coin.
    pub participant_qubits_model_stderr: f64,
    pub xi_mean: f64,
}

pub fn measure_efficiency<R: Rng + ?Sized>(
    family: EncodingFamily,
    n: usize,
    l: usize,
    runs: usize,
    rng: &mut R,
) -> Result<MeasuredEfficiency> {
    if runs == 0 {
        return Err(Error::InvalidConfig("runs must be at least 1".into()));
    }
    let config = ProtocolConfig {
        family,
        n,
        l,
        delta: 0.0,
        ..ProtocolConfig::default()
    };
    if n == 0 || l == 0 {
        return Err(Error::InvalidConfig("n and l must be at least 1".into()));
    }
    let tp_qubits = (2 * n * config.sequence_len()) as u64;
    let compared = (n * l) as f64;
    let mut counts = Vec::with_capacity(runs);
    let mut xi_sum = 0.0;
    for _ in 0..runs {
        let mut participant_qubits = 0u64;
        for _ in 0..n {
            let states: Vec<StateVector> = tp_prepare_sequence(&config, rng).into_iter().map(|p| p.state).collect();
            let (_, record) = participant_process(&states, family, rng);
            participant_qubits += 2 * record.sift_count() as u64;
        }
        xi_sum += compared / (tp_qubits + participant_qubits) as f64;
        counts.push(participant_qubits as f64);
    }
    let r = runs as f64;
    let mean = counts.iter().sum::<f64>() / r;
    let var = if runs > 1 {
        counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (r - 1.0)
    } else {
        0.0
    };
    // 2·Binomial(5nl, 1/2) has variance 5nl
    let pairs = (n * config.sequence_len()) as f64;
    Ok(MeasuredEfficiency {
        n,
        l,
        runs,
        family,
        qubits_prepared_by_tp: tp_qubits,
        participant_qubits_mean: mean,
        participant_qubits_stderr: (var / r).sqrt(),
        participant_qubits_model_stderr: (pairs / r).sqrt(),
        xi_mean: xi_sum / r,
    })
}
