//! Append-only protocol event log, serialized one JSON object per line.

use serde::{Deserialize, Serialize};

use crate::adversary::AttackModel;
use crate::codec::{EncodingFamily, LogicalBasis, LogicalOutcome, LogicalValue, SiftBit};
use crate::protocol::{Operation, ThetaPolicy, Verdict};
use crate::statevector::Bitstring;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leg {
    TpToParticipant,
    ParticipantToTp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Case1Entry {
    pub index: usize,
    pub basis: LogicalBasis,
    pub expected: LogicalValue,
    pub raw: Bitstring,
    pub outcome: LogicalOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiftEntry {
    pub index: usize,
    pub raw: Bitstring,
    pub bit: SiftBit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Start {
        family: EncodingFamily,
        n: usize,
        l: usize,
        delta: f64,
        z_pairs: usize,
        x_pairs: usize,
        theta_policy: ThetaPolicy,
        attack: AttackModel,
        tolerable_error_rate: f64,
    },
    /// The key itself never enters the log.
    KeyDistributed { length: usize },
    SequencePrepared { participant: usize, pairs: usize },
    Transmission { participant: usize, leg: Leg, thetas: Vec<f64> },
    Attacked { participant: usize, positions: Vec<usize> },
    /// Participant-private: raw SIFT outcomes and the bits written down.
    SiftMeasurements { participant: usize, entries: Vec<SiftEntry> },
    ZPositionsAnnounced { participant: usize, positions: Vec<usize> },
    OrderAnnounced {
        participant: usize,
        permutation: Vec<usize>,
        operations: Vec<Operation>,
    },
    Case1Measurements { participant: usize, entries: Vec<Case1Entry> },
    Case1Check {
        participant: usize,
        checked: usize,
        errors: usize,
        error_rate: f64,
        tolerable_error_rate: f64,
    },
    Case2Count { participant: usize, count: usize, required: usize },
    Case3Dropped { participant: usize, count: usize },
    TestPositionsAnnounced { participant: usize, positions: Vec<usize> },
    InitialStatesRevealed { participant: usize, values: Vec<LogicalValue> },
    TpHonestyCheck {
        participant: usize,
        tests: usize,
        mismatches: usize,
        error_rate: f64,
    },
    MessagePositionsAnnounced { participant: usize, positions: Vec<usize> },
    AnnouncementPublished { participant: usize, r: Vec<u8> },
    Comparison { u: Vec<Vec<u8>>, c: Vec<usize> },
    Aborted { participant: usize, verdict: Verdict },
    Verdict { verdict: Verdict },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub seq: usize,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProtocolTranscript {
    records: Vec<Record>,
}

impl ProtocolTranscript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: Event) {
        let seq = self.records.len();
        self.records.push(Record { seq, event });
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.records.iter().map(|r| &r.event)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("transcript records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> serde_json::Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<serde_json::Result<Vec<Record>>>()?;
        Ok(Self { records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_roundtrip_and_field_order() {
        let mut t = ProtocolTranscript::new();
        t.push(Event::KeyDistributed { length: 4 });
        t.push(Event::Case2Count {
            participant: 1,
            count: 9,
            required: 8,
        });
        t.push(Event::Verdict {
            verdict: Verdict::AllEqual,
        });
        let text = t.to_jsonl();
        let first = text.lines().next().unwrap();
        assert_eq!(first, r#"{"seq":0,"event":"key_distributed","length":4}"#);
        assert_eq!(ProtocolTranscript::from_jsonl(&text).unwrap(), t);
        assert_eq!(text.lines().count(), 3);
    }
}
