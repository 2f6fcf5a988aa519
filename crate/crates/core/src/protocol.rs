//! Multi-party semi-quantum private comparison.
//!
//! TP runs an independent session with each participant:
//!
//! 1. TP prepares `⌈4l(1+δ)⌉` Z-basis and `⌈l(1+δ)⌉` X-basis logical pairs,
//!    shuffled, and sends them over a noisy (possibly attacked) channel.
//! 2. The participant applies CTRL or SIFT to each pair at random, writes down
//!    SIFT bits, reorders the pairs and sends them back.
//! 3. TP announces Z-basis positions, the participant announces order and
//!    operations, TP checks CTRL pairs (case 1), counts SIFT-on-Z pairs
//!    (case 2) and drops SIFT-on-X pairs (case 3).
//! 4. The participant tests TP's honesty on a subset of case-2 pairs.
//! 5. The participant picks `l` remaining pairs as its message `m` and
//!    publishes `r = K ⊕ x ⊕ m`.
//! 6. TP recovers `M = m` from its descriptors and compares
//!    `u = M ⊕ r` across participants.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{AttackModel, Attacker};
use crate::codec::{
    apply_collective_noise, measure_logical, prepare, sift_measure_and_resend, BasisKind,
    EncodingFamily, LogicalBasis, LogicalValue, SiftBit,
};
use crate::error::{Error, Result};
use crate::statevector::StateVector;
use crate::transcript::{Case1Entry, Event, Leg, ProtocolTranscript, SiftEntry};

/// Slack subtracted before rounding particle counts up, so that products
/// like `4·10·1.1` do not round past their exact value.
const COUNT_ROUNDING_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaPolicy {
    /// The same angle on every transmission.
    Fixed(f64),
    /// A fresh uniform angle in `[0, 2π)` for every pair on every leg.
    RandomPerTransmission,
}

impl ThetaPolicy {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ThetaPolicy::Fixed(t) => t,
            ThetaPolicy::RandomPerTransmission => rng.random::<f64>() * std::f64::consts::TAU,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub family: EncodingFamily,
    pub n: usize,
    pub l: usize,
    pub delta: f64,
    pub theta_policy: ThetaPolicy,
    pub seed: u64,
    pub attack: AttackModel,
    pub tolerable_error_rate: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            family: EncodingFamily::Dephasing,
            n: 3,
            l: 8,
            delta: 1.0,
            theta_policy: ThetaPolicy::RandomPerTransmission,
            seed: 0,
            attack: AttackModel::None,
            tolerable_error_rate: 0.0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!("n must be at least 2, got {}", self.n)));
        }
        if self.l < 1 {
            return Err(Error::InvalidConfig("l must be at least 1".into()));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::InvalidConfig(format!("delta must be finite and >= 0, got {}", self.delta)));
        }
        if !(0.0..1.0).contains(&self.tolerable_error_rate) {
            return Err(Error::InvalidConfig(format!(
                "tolerable_error_rate must lie in [0, 1), got {}",
                self.tolerable_error_rate
            )));
        }
        if let ThetaPolicy::Fixed(t) = self.theta_policy {
            if !t.is_finite() {
                return Err(Error::InvalidConfig("fixed theta must be finite".into()));
            }
        }
        self.attack.validate(self.family)
    }

    pub fn z_pairs(&self) -> usize {
        scaled_count(4 * self.l, self.delta)
    }

    pub fn x_pairs(&self) -> usize {
        scaled_count(self.l, self.delta)
    }

    pub fn sequence_len(&self) -> usize {
        self.z_pairs() + self.x_pairs()
    }

    /// Number of honesty-test pairs drawn from `case2` SIFT-on-Z pairs.
    pub fn test_pair_count(&self, case2: usize) -> usize {
        match self.family {
            EncodingFamily::Dephasing => self.l,
            EncodingFamily::Rotation => case2 / 2,
        }
    }
}

fn scaled_count(base: usize, delta: f64) -> usize {
    ((base as f64 * (1.0 + delta)) - COUNT_ROUNDING_SLACK).ceil().max(1.0) as usize
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Secret {
    pub bits: Vec<u8>,
}

impl Secret {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidConfig("secret bits must be 0 or 1".into()));
        }
        Ok(Self { bits })
    }

    pub fn random<R: Rng + ?Sized>(l: usize, rng: &mut R) -> Self {
        Self {
            bits: random_bits(l, rng),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Key shared by all participants and withheld from TP.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharedKey {
    pub bits: Vec<u8>,
}

impl SharedKey {
    /// Trusted key-distribution stub standing in for a semi-quantum QKD run.
    pub fn distribute<R: Rng + ?Sized>(l: usize, rng: &mut R) -> Self {
        Self {
            bits: random_bits(l, rng),
        }
    }
}

pub fn random_bits<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<u8> {
    (0..len).map(|_| rng.random_range(0..2u8)).collect()
}

/// TP-side ground truth for one pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Descriptor {
    pub basis: LogicalBasis,
    pub value: LogicalValue,
    pub original_index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogicalParticle {
    pub state: StateVector,
    pub descriptor: Descriptor,
}

impl LogicalParticle {
    pub fn new(family: EncodingFamily, value: LogicalValue, original_index: usize) -> Self {
        Self {
            state: prepare(family, value),
            descriptor: Descriptor {
                basis: LogicalBasis::of(family, value),
                value,
                original_index,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Ctrl,
    Sift,
}

/// How a participant picks its per-pair operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperationPolicy {
    FairCoin,
    AllCtrl,
    AllSift,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticipantRecord {
    /// Operation applied to the pair received at each position.
    pub operations: Vec<Operation>,
    /// SIFT results keyed by received position.
    pub sift: BTreeMap<usize, SiftEntry>,
    /// `permutation[k]` is the received position of the pair sent back at `k`.
    pub permutation: Vec<usize>,
}

impl ParticipantRecord {
    pub fn sift_count(&self) -> usize {
        self.sift.len()
    }

    pub fn sift_bit(&self, index: usize) -> Option<SiftBit> {
        self.sift.get(&index).map(|e| e.bit)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AllEqual,
    NotAllEqual,
    AbortedInsecureChannel,
    AbortedInsufficientParticles,
    AbortedDishonestTp,
}

impl Verdict {
    pub fn is_abort(&self) -> bool {
        !matches!(self, Verdict::AllEqual | Verdict::NotAllEqual)
    }

    pub const ALL: [Verdict; 5] = [
        Verdict::AllEqual,
        Verdict::NotAllEqual,
        Verdict::AbortedInsecureChannel,
        Verdict::AbortedInsufficientParticles,
        Verdict::AbortedDishonestTp,
    ];
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::AllEqual => "AllEqual",
            Verdict::NotAllEqual => "NotAllEqual",
            Verdict::AbortedInsecureChannel => "AbortedInsecureChannel",
            Verdict::AbortedInsufficientParticles => "AbortedInsufficientParticles",
            Verdict::AbortedDishonestTp => "AbortedDishonestTP",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub u: Vec<Vec<u8>>,
    pub c: Vec<usize>,
    pub verdict: Verdict,
}

impl ComparisonResult {
    pub fn aborted(verdict: Verdict) -> Self {
        Self {
            u: Vec::new(),
            c: Vec::new(),
            verdict,
        }
    }
}

/// Draws one pair from TP's ensemble: Z basis with probability 4/5, value
/// uniform within the basis.
pub fn draw_ensemble_value<R: Rng + ?Sized>(rng: &mut R) -> LogicalValue {
    let z = rng.random_range(0..5) < 4;
    let coin = rng.random_bool(0.5);
    match (z, coin) {
        (true, false) => LogicalValue::Zero,
        (true, true) => LogicalValue::One,
        (false, false) => LogicalValue::Plus,
        (false, true) => LogicalValue::Minus,
    }
}

pub fn tp_prepare_sequence<R: Rng + ?Sized>(config: &ProtocolConfig, rng: &mut R) -> Vec<LogicalParticle> {
    let mut values: Vec<LogicalValue> = Vec::with_capacity(config.sequence_len());
    for _ in 0..config.z_pairs() {
        values.push(if rng.random_bool(0.5) { LogicalValue::One } else { LogicalValue::Zero });
    }
    for _ in 0..config.x_pairs() {
        values.push(if rng.random_bool(0.5) { LogicalValue::Minus } else { LogicalValue::Plus });
    }
    values.shuffle(rng);
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| LogicalParticle::new(config.family, v, i))
        .collect()
}

pub fn participant_process<R: Rng + ?Sized>(
    particles_in: &[StateVector],
    family: EncodingFamily,
    rng: &mut R,
) -> (Vec<StateVector>, ParticipantRecord) {
    participant_process_with(particles_in, family, OperationPolicy::FairCoin, rng)
}

pub fn participant_process_with<R: Rng + ?Sized>(
    particles_in: &[StateVector],
    family: EncodingFamily,
    policy: OperationPolicy,
    rng: &mut R,
) -> (Vec<StateVector>, ParticipantRecord) {
    let mut operations = Vec::with_capacity(particles_in.len());
    let mut sift = BTreeMap::new();
    let mut processed = Vec::with_capacity(particles_in.len());
    for (i, state) in particles_in.iter().enumerate() {
        let op = match policy {
            OperationPolicy::FairCoin => {
                if rng.random_bool(0.5) {
                    Operation::Sift
                } else {
                    Operation::Ctrl
                }
            }
            OperationPolicy::AllCtrl => Operation::Ctrl,
            OperationPolicy::AllSift => Operation::Sift,
        };
        operations.push(op);
        match op {
            Operation::Ctrl => processed.push(state.clone()),
            Operation::Sift => {
                let r = sift_measure_and_resend(state, family, rng);
                sift.insert(
                    i,
                    SiftEntry {
                        index: i,
                        raw: r.raw,
                        bit: r.bit,
                    },
                );
                processed.push(r.fresh);
            }
        }
    }
    let mut permutation: Vec<usize> = (0..particles_in.len()).collect();
    permutation.shuffle(rng);
    let out = permutation.iter().map(|&k| processed[k].clone()).collect();
    (
        out,
        ParticipantRecord {
            operations,
            sift,
            permutation,
        },
    )
}

/// Thresholds TP applies after classifying the returned pairs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckPolicy {
    pub tolerable_error_rate: f64,
    pub min_case2: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseOutcome {
    pub case1: Vec<Case1Entry>,
    pub case1_errors: usize,
    pub case1_error_rate: f64,
    /// Original positions of SIFT-on-Z pairs, ascending.
    pub case2: Vec<usize>,
    pub case3_dropped: usize,
    pub abort: Option<Verdict>,
}

fn check_permutation(permutation: &[usize], len: usize) -> Result<()> {
    if permutation.len() != len {
        return Err(Error::MalformedPermutation(len));
    }
    let mut seen = vec![false; len];
    for &p in permutation {
        if p >= len || std::mem::replace(&mut seen[p], true) {
            return Err(Error::MalformedPermutation(len));
        }
    }
    Ok(())
}

/// Undoes the participant's reordering: `restored[permutation[k]] = returned[k]`.
pub fn invert_permutation<T: Clone>(returned: &[T], permutation: &[usize]) -> Result<Vec<T>> {
    check_permutation(permutation, returned.len())?;
    let mut slots: Vec<Option<T>> = vec![None; returned.len()];
    for (k, &p) in permutation.iter().enumerate() {
        slots[p] = Some(returned[k].clone());
    }
    Ok(slots.into_iter().map(|s| s.expect("bijection fills every slot")).collect())
}

pub fn tp_classify_and_check<R: Rng + ?Sized>(
    returned: &[StateVector],
    operations: &[Operation],
    permutation: &[usize],
    descriptors: &[Descriptor],
    policy: CheckPolicy,
    rng: &mut R,
) -> Result<CaseOutcome> {
    if operations.len() != returned.len() || descriptors.len() != returned.len() {
        return Err(Error::LengthMismatch {
            expected: returned.len(),
            actual: operations.len().min(descriptors.len()),
        });
    }
    let restored = invert_permutation(returned, permutation)?;

    let mut case1 = Vec::new();
    let mut case2 = Vec::new();
    let mut case3_dropped = 0;
    for (i, state) in restored.iter().enumerate() {
        let d = descriptors[i];
        match (operations[i], d.basis.kind) {
            (Operation::Ctrl, _) => {
                let r = measure_logical(state, d.basis, rng);
                case1.push(Case1Entry {
                    index: i,
                    basis: d.basis,
                    expected: d.value,
                    raw: r.raw,
                    outcome: r.outcome,
                });
            }
            (Operation::Sift, BasisKind::Z) => case2.push(i),
            (Operation::Sift, BasisKind::X) => case3_dropped += 1,
        }
    }
    let case1_errors = case1.iter().filter(|e| !e.outcome.matches(e.expected)).count();
    let case1_error_rate = if case1.is_empty() {
        0.0
    } else {
        case1_errors as f64 / case1.len() as f64
    };
    let abort = if case1_error_rate > policy.tolerable_error_rate {
        Some(Verdict::AbortedInsecureChannel)
    } else if case2.len() < policy.min_case2 {
        Some(Verdict::AbortedInsufficientParticles)
    } else {
        None
    };
    Ok(CaseOutcome {
        case1,
        case1_errors,
        case1_error_rate,
        case2,
        case3_dropped,
        abort,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOutcome {
    pub tests: Vec<usize>,
    pub revealed: Vec<LogicalValue>,
    pub mismatches: usize,
    pub error_rate: f64,
    pub remaining: Vec<usize>,
    pub abort: Option<Verdict>,
}

/// Participant-side honesty check of TP on `test_count` random case-2 pairs.
///
/// `reveal` is TP's answer for a position. Any mismatch aborts, and an
/// `Invalid` SIFT bit counts as a mismatch.
pub fn participant_verify_tp<R, F>(
    case2: &[usize],
    sift: &BTreeMap<usize, SiftEntry>,
    test_count: usize,
    reveal: F,
    rng: &mut R,
) -> Result<VerifyOutcome>
where
    R: Rng + ?Sized,
    F: Fn(usize) -> LogicalValue,
{
    if case2.is_empty() || case2.len() < test_count {
        return Err(Error::InsufficientTestPairs {
            required: test_count.max(1),
            available: case2.len(),
        });
    }
    let mut picked = index::sample(rng, case2.len(), test_count).into_vec();
    picked.sort_unstable();
    let tests: Vec<usize> = picked.iter().map(|&k| case2[k]).collect();
    let remaining: Vec<usize> = case2.iter().copied().filter(|p| !tests.contains(p)).collect();
    let revealed: Vec<LogicalValue> = tests.iter().map(|&p| reveal(p)).collect();
    let mismatches = tests
        .iter()
        .zip(&revealed)
        .filter(|(p, v)| {
            let recorded = sift.get(p).and_then(|e| e.bit.bit());
            recorded.is_none() || recorded != v.bit()
        })
        .count();
    let error_rate = if tests.is_empty() {
        0.0
    } else {
        mismatches as f64 / tests.len() as f64
    };
    Ok(VerifyOutcome {
        tests,
        revealed,
        mismatches,
        error_rate,
        remaining,
        abort: (mismatches > 0).then_some(Verdict::AbortedDishonestTp),
    })
}

/// `r_j = K_j ⊕ x_j ⊕ m_j`.
pub fn encode_announcement(secret: &Secret, key: &SharedKey, m: &[u8]) -> Result<Vec<u8>> {
    let l = secret.len();
    for len in [key.bits.len(), m.len()] {
        if len != l {
            return Err(Error::LengthMismatch { expected: l, actual: len });
        }
    }
    Ok(secret
        .bits
        .iter()
        .zip(&key.bits)
        .zip(m)
        .map(|((x, k), m)| x ^ k ^ m)
        .collect())
}

/// `u = M ⊕ r` per participant, then `C_j = Σ_i (u_{i,j} ⊕ u_{i+1,j})`.
pub fn tp_compare(r: &[Vec<u8>], big_m: &[Vec<u8>]) -> Result<ComparisonResult> {
    if r.len() != big_m.len() {
        return Err(Error::DimensionMismatch {
            expected: r.len(),
            actual: big_m.len(),
        });
    }
    let l = r.first().map_or(0, Vec::len);
    let mut u = Vec::with_capacity(r.len());
    for (ri, mi) in r.iter().zip(big_m) {
        if ri.len() != l || mi.len() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                actual: if ri.len() != l { ri.len() } else { mi.len() },
            });
        }
        u.push(ri.iter().zip(mi).map(|(a, b)| a ^ b).collect::<Vec<u8>>());
    }
    let c: Vec<usize> = (0..l)
        .map(|j| u.windows(2).map(|w| (w[0][j] ^ w[1][j]) as usize).sum())
        .collect();
    let verdict = if c.iter().all(|&cj| cj == 0) {
        Verdict::AllEqual
    } else {
        Verdict::NotAllEqual
    };
    Ok(ComparisonResult { u, c, verdict })
}

/// Which received positions an eavesdropper touches.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AttackTargets {
    All,
    Positions(Vec<usize>),
}

impl AttackTargets {
    fn contains(&self, i: usize) -> bool {
        match self {
            AttackTargets::All => true,
            AttackTargets::Positions(p) => p.contains(&i),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SessionStats {
    pub pairs_prepared_by_tp: usize,
    pub pairs_prepared_by_participant: usize,
    pub case1_checked: usize,
    pub case1_errors: usize,
    pub case2: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SessionOutcome {
    Completed { r: Vec<u8>, big_m: Vec<u8>, m: Vec<u8> },
    Aborted(Verdict),
}

/// One TP ↔ participant exchange (steps 1 to 5 plus TP's recovery of `M`).
#[allow(clippy::too_many_arguments)]
pub fn run_session<R: Rng + ?Sized>(
    config: &ProtocolConfig,
    participant: usize,
    secret: &Secret,
    key: &SharedKey,
    targets: &AttackTargets,
    transcript: &mut ProtocolTranscript,
    rng: &mut R,
) -> Result<(SessionOutcome, SessionStats)> {
    let family = config.family;
    let attacker = Attacker::new(&config.attack, family)?;
    let mut stats = SessionStats::default();

    // Step 1
    let particles = tp_prepare_sequence(config, rng);
    let descriptors: Vec<Descriptor> = particles.iter().map(|p| p.descriptor).collect();
    stats.pairs_prepared_by_tp = particles.len();
    transcript.push(Event::SequencePrepared {
        participant,
        pairs: particles.len(),
    });

    let thetas: Vec<f64> = particles.iter().map(|_| config.theta_policy.draw(rng)).collect();
    let mut in_flight: Vec<StateVector> = particles
        .iter()
        .zip(&thetas)
        .map(|(p, &t)| apply_collective_noise(&p.state, family, t))
        .collect();
    transcript.push(Event::Transmission {
        participant,
        leg: Leg::TpToParticipant,
        thetas,
    });
    if !attacker.is_passive() {
        let mut attacked = Vec::new();
        for (i, state) in in_flight.iter_mut().enumerate() {
            if targets.contains(i) {
                *state = attacker.apply(state, rng).0;
                attacked.push(i);
            }
        }
        transcript.push(Event::Attacked {
            participant,
            positions: attacked,
        });
    }

    // Step 2
    let (returned, record) = participant_process(&in_flight, family, rng);
    stats.pairs_prepared_by_participant = record.sift_count();
    transcript.push(Event::SiftMeasurements {
        participant,
        entries: record.sift.values().cloned().collect(),
    });
    let thetas: Vec<f64> = returned.iter().map(|_| config.theta_policy.draw(rng)).collect();
    let returned: Vec<StateVector> = returned
        .iter()
        .zip(&thetas)
        .map(|(s, &t)| apply_collective_noise(s, family, t))
        .collect();
    transcript.push(Event::Transmission {
        participant,
        leg: Leg::ParticipantToTp,
        thetas,
    });

    // Step 3
    let z_positions: Vec<usize> = descriptors
        .iter()
        .filter(|d| d.basis.kind == BasisKind::Z)
        .map(|d| d.original_index)
        .collect();
    transcript.push(Event::ZPositionsAnnounced {
        participant,
        positions: z_positions,
    });
    transcript.push(Event::OrderAnnounced {
        participant,
        permutation: record.permutation.clone(),
        operations: record.operations.clone(),
    });
    let policy = CheckPolicy {
        tolerable_error_rate: config.tolerable_error_rate,
        min_case2: 2 * config.l,
    };
    let cases = tp_classify_and_check(&returned, &record.operations, &record.permutation, &descriptors, policy, rng)?;
    stats.case1_checked = cases.case1.len();
    stats.case1_errors = cases.case1_errors;
    stats.case2 = cases.case2.len();
    transcript.push(Event::Case1Measurements {
        participant,
        entries: cases.case1.clone(),
    });
    transcript.push(Event::Case1Check {
        participant,
        checked: cases.case1.len(),
        errors: cases.case1_errors,
        error_rate: cases.case1_error_rate,
        tolerable_error_rate: config.tolerable_error_rate,
    });
    transcript.push(Event::Case2Count {
        participant,
        count: cases.case2.len(),
        required: policy.min_case2,
    });
    transcript.push(Event::Case3Dropped {
        participant,
        count: cases.case3_dropped,
    });
    if let Some(v) = cases.abort {
        return Ok((SessionOutcome::Aborted(v), stats));
    }

    // Step 4
    let verify = participant_verify_tp(
        &cases.case2,
        &record.sift,
        config.test_pair_count(cases.case2.len()),
        |p| descriptors[p].value,
        rng,
    )?;
    transcript.push(Event::TestPositionsAnnounced {
        participant,
        positions: verify.tests.clone(),
    });
    transcript.push(Event::InitialStatesRevealed {
        participant,
        values: verify.revealed.clone(),
    });
    transcript.push(Event::TpHonestyCheck {
        participant,
        tests: verify.tests.len(),
        mismatches: verify.mismatches,
        error_rate: verify.error_rate,
    });
    if let Some(v) = verify.abort {
        return Ok((SessionOutcome::Aborted(v), stats));
    }

    // Step 5: message pairs come from the remainder, skipping pairs whose
    // SIFT outcome fell outside the codespace.
    let usable: Vec<usize> = verify
        .remaining
        .iter()
        .copied()
        .filter(|p| record.sift_bit(*p).and_then(|b| b.bit()).is_some())
        .collect();
    if usable.len() < config.l {
        return Ok((SessionOutcome::Aborted(Verdict::AbortedInsufficientParticles), stats));
    }
    let mut chosen = index::sample(rng, usable.len(), config.l).into_vec();
    chosen.sort_unstable();
    let positions: Vec<usize> = chosen.iter().map(|&k| usable[k]).collect();
    let m: Vec<u8> = positions
        .iter()
        .map(|p| record.sift_bit(*p).and_then(|b| b.bit()).expect("usable pairs carry a bit"))
        .collect();
    let r = encode_announcement(secret, key, &m)?;
    transcript.push(Event::MessagePositionsAnnounced {
        participant,
        positions: positions.clone(),
    });
    transcript.push(Event::AnnouncementPublished {
        participant,
        r: r.clone(),
    });

    // Step 6, TP side
    let big_m: Vec<u8> = positions
        .iter()
        .map(|&p| descriptors[p].value.bit().expect("case-2 pairs are Z-basis"))
        .collect();
    Ok((SessionOutcome::Completed { r, big_m, m }, stats))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolRun {
    pub result: ComparisonResult,
    pub transcript: ProtocolTranscript,
    pub sessions: Vec<SessionStats>,
}

pub fn run_protocol<R: Rng + ?Sized>(
    config: &ProtocolConfig,
    secrets: &[Secret],
    rng: &mut R,
) -> Result<(ComparisonResult, ProtocolTranscript)> {
    let run = run_protocol_detailed(config, secrets, rng)?;
    Ok((run.result, run.transcript))
}

pub fn run_protocol_detailed<R: Rng + ?Sized>(
    config: &ProtocolConfig,
    secrets: &[Secret],
    rng: &mut R,
) -> Result<ProtocolRun> {
    config.validate()?;
    if secrets.len() != config.n {
        return Err(Error::LengthMismatch {
            expected: config.n,
            actual: secrets.len(),
        });
    }
    if let Some(s) = secrets.iter().find(|s| s.len() != config.l) {
        return Err(Error::LengthMismatch {
            expected: config.l,
            actual: s.len(),
        });
    }

    let mut transcript = ProtocolTranscript::new();
    transcript.push(Event::Start {
        family: config.family,
        n: config.n,
        l: config.l,
        delta: config.delta,
        z_pairs: config.z_pairs(),
        x_pairs: config.x_pairs(),
        theta_policy: config.theta_policy,
        attack: config.attack.clone(),
        tolerable_error_rate: config.tolerable_error_rate,
    });
    let key = SharedKey::distribute(config.l, rng);
    transcript.push(Event::KeyDistributed { length: config.l });

    let mut r_all = Vec::with_capacity(config.n);
    let mut m_all = Vec::with_capacity(config.n);
    let mut sessions = Vec::with_capacity(config.n);
    for (i, secret) in secrets.iter().enumerate() {
        let participant = i + 1;
        let (outcome, stats) = run_session(config, participant, secret, &key, &AttackTargets::All, &mut transcript, rng)?;
        sessions.push(stats);
        match outcome {
            SessionOutcome::Completed { r, big_m, .. } => {
                r_all.push(r);
                m_all.push(big_m);
            }
            SessionOutcome::Aborted(verdict) => {
                transcript.push(Event::Aborted { participant, verdict });
                transcript.push(Event::Verdict { verdict });
                return Ok(ProtocolRun {
                    result: ComparisonResult::aborted(verdict),
                    transcript,
                    sessions,
                });
            }
        }
    }

    let result = tp_compare(&r_all, &m_all)?;
    transcript.push(Event::Comparison {
        u: result.u.clone(),
        c: result.c.clone(),
    });
    transcript.push(Event::Verdict {
        verdict: result.verdict,
    });
    Ok(ProtocolRun {
        result,
        transcript,
        sessions,
    })
}
