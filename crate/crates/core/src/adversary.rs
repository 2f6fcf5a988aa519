//! Eavesdropping models on the TP → participant leg, their detection
//! statistics, and the exact analysis of ancilla-coupling attacks.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::codec::{
    apply_collective_noise, measure_logical, mismatch_probability, prepare, BasisKind,
    EncodingFamily, LogicalBasis, LogicalValue, Readout,
};
use crate::error::{Error, Result};
use crate::protocol::{
    draw_ensemble_value, run_session, participant_process, tp_classify_and_check, AttackTargets,
    CheckPolicy, Descriptor, ProtocolConfig, Secret, SessionOutcome, SharedKey, ThetaPolicy, Verdict,
};
use crate::statevector::{Circuit, StateVector, Unitary};
use crate::transcript::ProtocolTranscript;

pub const UNITARITY_TOLERANCE: f64 = 1e-10;

/// Weights of the four codewords among CTRL-returned pairs: Z and X pairs
/// are sent 4:1 and values are uniform within a basis.
pub const ENSEMBLE_WEIGHTS: [(LogicalValue, f64); 4] = [
    (LogicalValue::Zero, 0.4),
    (LogicalValue::One, 0.4),
    (LogicalValue::Plus, 0.1),
    (LogicalValue::Minus, 0.1),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackModel {
    None,
    InterceptResend {
        fake_value: LogicalValue,
        fake_family: EncodingFamily,
    },
    MeasureResend {
        measure_basis: LogicalBasis,
    },
    Entangle {
        params: EntangleParams,
    },
}

impl AttackModel {
    pub fn validate(&self, family: EncodingFamily) -> Result<()> {
        match self {
            AttackModel::Entangle { params } => params.unitary(family).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Short label used in report file names and tables.
    pub fn label(&self) -> String {
        match self {
            AttackModel::None => "none".into(),
            AttackModel::InterceptResend { fake_value, fake_family } => {
                format!("intercept-resend({fake_value}_{})", fake_family.suffix())
            }
            AttackModel::MeasureResend { measure_basis } => format!("measure-resend({measure_basis})"),
            AttackModel::Entangle { params } => format!("entangle({})", params.label()),
        }
    }
}

/// Coupling unitary `U_E` on the pair (qubits 1, 2) and a one-qubit ancilla
/// (qubit 3), which starts in `|0⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EntangleParams {
    Identity,
    /// CNOT from a pair qubit onto the ancilla.
    CnotToAncilla { control: usize },
    /// Haar-random 8×8 unitary.
    Haar { seed: u64 },
    /// Attaches the same Haar-random ancilla state to both Z codewords and
    /// leaves the rest of the pair space alone. For `perturbation = ε > 0`
    /// the ancilla for logical one is additionally rotated by `RY(ε)`.
    Transparent { seed: u64, perturbation: f64 },
    /// Row-major 8×8 matrix as `[re, im]` pairs.
    Custom { matrix: Vec<[f64; 2]> },
}

impl EntangleParams {
    pub fn label(&self) -> String {
        match self {
            EntangleParams::Identity => "identity".into(),
            EntangleParams::CnotToAncilla { control } => format!("cnot{control}"),
            EntangleParams::Haar { seed } => format!("haar:{seed}"),
            EntangleParams::Transparent { seed, perturbation } => format!("transparent:{seed}:{perturbation:e}"),
            EntangleParams::Custom { .. } => "custom".into(),
        }
    }

    /// The 8×8 matrix, checked for unitarity.
    pub fn unitary(&self, family: EncodingFamily) -> Result<Unitary> {
        let u = match self {
            EntangleParams::Identity => Unitary::identity(8),
            EntangleParams::CnotToAncilla { control } => {
                if !(1..=2).contains(control) {
                    return Err(Error::QubitOutOfRange {
                        qubit: *control,
                        num_qubits: 2,
                    });
                }
                circuit_unitary(&Circuit::new().cnot(*control, 3))?
            }
            EntangleParams::Haar { seed } => haar_unitary(8, &mut ChaCha8Rng::seed_from_u64(*seed)),
            EntangleParams::Transparent { seed, perturbation } => {
                if !perturbation.is_finite() {
                    return Err(Error::NonFinite);
                }
                transparent_unitary(family, *seed, *perturbation)?
            }
            EntangleParams::Custom { matrix } => Unitary::from_row_major(
                8,
                matrix.iter().map(|&[re, im]| Complex64::new(re, im)).collect(),
            )?,
        };
        let defect = u.unitarity_defect();
        if defect > UNITARITY_TOLERANCE {
            return Err(Error::NotUnitary(defect));
        }
        Ok(u)
    }
}

fn circuit_unitary(c: &Circuit) -> Result<Unitary> {
    let cols = (0..8)
        .map(|j| Ok(c.run(&StateVector::basis(3, j)?)?.amplitudes().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Unitary::from_columns(&cols)
}

/// Haar-distributed unitary via Gram-Schmidt on complex Gaussian columns.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Unitary {
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        for c in &cols {
            let proj: Complex64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, a) in v.iter_mut().zip(c) {
                *x -= proj * a;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        cols.push(v.into_iter().map(|z| z / norm).collect());
    }
    Unitary::from_columns(&cols).expect("square by construction")
}

/// Orthonormal basis of the pair space whose first two vectors are the Z
/// codewords of `family`.
fn pair_basis(family: EncodingFamily) -> [StateVector; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let v = |a: [f64; 4]| StateVector::from_amplitudes(2, a.iter().map(|&x| Complex64::new(x, 0.)).collect()).expect("unit vector");
    let z0 = prepare(family, LogicalValue::Zero);
    let z1 = prepare(family, LogicalValue::One);
    match family {
        EncodingFamily::Dephasing => [z0, z1, v([1., 0., 0., 0.]), v([0., 0., 0., 1.])],
        EncodingFamily::Rotation => [z0, z1, v([h, 0., 0., -h]), v([0., h, h, 0.])],
    }
}

fn transparent_unitary(family: EncodingFamily, seed: u64, eps: f64) -> Result<Unitary> {
    let v = haar_unitary(2, &mut ChaCha8Rng::seed_from_u64(seed));
    let rot = crate::statevector::Gate::Ry(eps).matrix();
    let blocks = [v.clone(), v.matmul(&rot)?, Unitary::identity(2), Unitary::identity(2)];
    let basis = pair_basis(family);
    let mut data = vec![Complex64::ZERO; 64];
    for (c, w) in basis.iter().zip(&blocks) {
        let amps = c.amplitudes();
        for a in 0..4 {
            for b in 0..4 {
                let outer = amps[a] * amps[b].conj();
                if outer == Complex64::ZERO {
                    continue;
                }
                for x in 0..2 {
                    for y in 0..2 {
                        data[(a * 2 + x) * 8 + (b * 2 + y)] += outer * w.get(x, y);
                    }
                }
            }
        }
    }
    Unitary::from_row_major(8, data)
}

/// What Eve keeps after touching one pair.
#[derive(Clone, Debug, PartialEq)]
pub enum EveRecord {
    None,
    Intercepted(StateVector),
    Measured(Readout),
    /// The ancilla travels inside the joint state handed on.
    Entangled,
}

/// An attack model with its coupling unitary built once.
#[derive(Clone, Debug)]
pub struct Attacker {
    model: AttackModel,
    unitary: Option<Unitary>,
}

impl Attacker {
    pub fn new(model: &AttackModel, family: EncodingFamily) -> Result<Self> {
        let unitary = match model {
            AttackModel::Entangle { params } => Some(params.unitary(family)?),
            _ => None,
        };
        Ok(Self {
            model: model.clone(),
            unitary,
        })
    }

    pub fn is_passive(&self) -> bool {
        self.model == AttackModel::None
    }

    pub fn apply<R: Rng + ?Sized>(&self, particle: &StateVector, rng: &mut R) -> (StateVector, EveRecord) {
        match &self.model {
            AttackModel::None => (particle.clone(), EveRecord::None),
            AttackModel::InterceptResend { fake_value, fake_family } => {
                (prepare(*fake_family, *fake_value), EveRecord::Intercepted(particle.clone()))
            }
            AttackModel::MeasureResend { measure_basis } => {
                let r = measure_logical(particle, *measure_basis, rng);
                let forwarded = match r.outcome.value() {
                    Some(v) => prepare(measure_basis.family, v),
                    None => StateVector::basis(2, r.raw.value()).expect("two-bit outcome"),
                };
                (forwarded, EveRecord::Measured(r))
            }
            AttackModel::Entangle { .. } => {
                let u = self.unitary.as_ref().expect("built in new");
                let joint = particle
                    .tensor(&StateVector::basis(1, 0).expect("one qubit"))
                    .and_then(|s| s.apply_unitary(u))
                    .expect("attacks act on a two-qubit pair");
                (joint, EveRecord::Entangled)
            }
        }
    }
}

pub fn apply_attack<R: Rng + ?Sized>(
    model: &AttackModel,
    family: EncodingFamily,
    particle: &StateVector,
    rng: &mut R,
) -> Result<(StateVector, EveRecord)> {
    if particle.num_qubits() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: particle.num_qubits(),
        });
    }
    Ok(Attacker::new(model, family)?.apply(particle, rng))
}

fn per_group_closed_form(model: &AttackModel, family: EncodingFamily) -> Result<f64> {
    let unsupported = || Error::UnsupportedModel(model.label());
    match model {
        AttackModel::None => Ok(0.0),
        AttackModel::InterceptResend { fake_value, fake_family }
            if *fake_family == family && fake_value.basis_kind() == BasisKind::Z =>
        {
            Ok(0.25)
        }
        AttackModel::MeasureResend { measure_basis } if *measure_basis == LogicalBasis::z(family) => Ok(0.05),
        _ => Err(unsupported()),
    }
}

/// `1 − (1 − p)^m` with `p = 1/4` for intercept-resend with a Z-basis fake
/// and `p = 1/20` for Z-basis measure-resend.
pub fn closed_form_detection(model: &AttackModel, family: EncodingFamily, m: u32) -> Result<f64> {
    let p = per_group_closed_form(model, family)?;
    // p·Σ_{k<m} (1−p)^k, which is exact for m = 1
    let mut term = p;
    let mut total = 0.0;
    for _ in 0..m {
        total += term;
        term *= 1.0 - p;
    }
    Ok(total)
}

/// Exact per-group Case-1 detection probability: CTRL with probability 1/2,
/// then TP's readout of the attacked codeword. Measure-resend is averaged
/// over Eve's outcomes; the other models act deterministically.
pub fn exact_per_group_detection(model: &AttackModel, family: EncodingFamily) -> Result<f64> {
    let attacker = Attacker::new(model, family)?;
    let mut total = 0.0;
    for (value, w) in ENSEMBLE_WEIGHTS {
        let genuine = prepare(family, value);
        let basis = LogicalBasis::of(family, value);
        let p = match model {
            AttackModel::MeasureResend { measure_basis } => {
                // average over Eve's outcomes
                let dist = crate::codec::readout_distribution(&genuine, *measure_basis);
                dist.iter()
                    .enumerate()
                    .filter(|(_, &q)| q > 0.0)
                    .map(|(raw, &q)| {
                        let raw = crate::statevector::Bitstring::new(raw, 2);
                        let fwd = match crate::codec::decode(*measure_basis, raw).value() {
                            Some(v) => prepare(measure_basis.family, v),
                            None => StateVector::basis(2, raw.value()).expect("two-bit outcome"),
                        };
                        q * mismatch_probability(&fwd, basis, value)
                    })
                    .sum()
            }
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let (fwd, _) = attacker.apply(&genuine, &mut rng);
                mismatch_probability(&fwd, basis, value)
            }
        };
        total += w * p;
    }
    Ok(0.5 * total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub family: EncodingFamily,
    /// Number of attacked groups per overall trial.
    pub m: u32,
    /// Upper bound on full-protocol sessions simulated for the
    /// protocol-level figure; 0 skips it.
    pub full_protocol_trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub model: AttackModel,
    pub family: EncodingFamily,
    pub m: u32,
    pub trials: usize,
    pub per_group_estimate: f64,
    pub per_group_stderr: f64,
    pub overall_estimate: f64,
    pub overall_stderr: f64,
    pub closed_form_per_group: Option<f64>,
    pub closed_form_overall: Option<f64>,
    pub per_group_pass: Option<bool>,
    pub overall_pass: Option<bool>,
    /// Fraction of single sessions, with `m` random pairs attacked, that end
    /// in a channel or honesty abort.
    pub full_protocol_estimate: Option<f64>,
    pub full_protocol_stderr: Option<f64>,
    pub full_protocol_trials: usize,
}

pub const PASS_SIGMAS: f64 = 4.0;

fn binomial_stderr(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// `|estimate − p| < 4σ` with σ taken from the reference probability; a
/// deterministic reference demands an exact match.
pub fn within_sigmas(estimate: f64, p: f64, n: usize) -> bool {
    let sigma = binomial_stderr(p, n);
    if sigma == 0.0 {
        estimate == p
    } else {
        (estimate - p).abs() < PASS_SIGMAS * sigma
    }
}

/// Attacks `m` independently drawn pairs, runs them through the participant
/// and TP's case classification, and reports whether any Case-1 check failed.
fn attacked_group_detected<R: Rng + ?Sized>(
    attacker: &Attacker,
    family: EncodingFamily,
    m: usize,
    rng: &mut R,
) -> Result<bool> {
    if m == 0 {
        return Ok(false);
    }
    let mut descriptors = Vec::with_capacity(m);
    let mut sent = Vec::with_capacity(m);
    for i in 0..m {
        let value = draw_ensemble_value(rng);
        descriptors.push(Descriptor {
            basis: LogicalBasis::of(family, value),
            value,
            original_index: i,
        });
        let noisy = apply_collective_noise(&prepare(family, value), family, ThetaPolicy::RandomPerTransmission.draw(rng));
        sent.push(attacker.apply(&noisy, rng).0);
    }
    let (returned, record) = participant_process(&sent, family, rng);
    let returned: Vec<StateVector> = returned
        .iter()
        .map(|s| apply_collective_noise(s, family, ThetaPolicy::RandomPerTransmission.draw(rng)))
        .collect();
    let outcome = tp_classify_and_check(
        &returned,
        &record.operations,
        &record.permutation,
        &descriptors,
        CheckPolicy {
            tolerable_error_rate: 0.0,
            min_case2: 0,
        },
        rng,
    )?;
    Ok(outcome.case1_errors > 0)
}

fn full_protocol_detected<R: Rng + ?Sized>(model: &AttackModel, family: EncodingFamily, m: usize, rng: &mut R) -> Result<bool> {
    let l = 4usize.max(m.div_ceil(10));
    let config = ProtocolConfig {
        family,
        n: 2,
        l,
        delta: 1.0,
        theta_policy: ThetaPolicy::RandomPerTransmission,
        seed: 0,
        attack: model.clone(),
        tolerable_error_rate: 0.0,
    };
    let positions = rand::seq::index::sample(rng, config.sequence_len(), m).into_vec();
    let secret = Secret { bits: vec![0; l] };
    let key = SharedKey { bits: vec![0; l] };
    let mut transcript = ProtocolTranscript::new();
    let (outcome, _) = run_session(&config, 1, &secret, &key, &AttackTargets::Positions(positions), &mut transcript, rng)?;
    Ok(matches!(
        outcome,
        SessionOutcome::Aborted(Verdict::AbortedInsecureChannel | Verdict::AbortedDishonestTp)
    ))
}

pub fn monte_carlo_detection<R: Rng + ?Sized>(
    config: &DetectionConfig,
    model: &AttackModel,
    trials: usize,
    rng: &mut R,
) -> Result<DetectionReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let family = config.family;
    let attacker = Attacker::new(model, family)?;

    let mut hits = 0usize;
    for _ in 0..trials {
        hits += attacked_group_detected(&attacker, family, 1, rng)? as usize;
    }
    let per_group_estimate = hits as f64 / trials as f64;

    let mut hits = 0usize;
    for _ in 0..trials {
        hits += attacked_group_detected(&attacker, family, config.m as usize, rng)? as usize;
    }
    let overall_estimate = hits as f64 / trials as f64;

    let full_trials = config.full_protocol_trials.min(trials);
    let (full_protocol_estimate, full_protocol_stderr) = if full_trials > 0 {
        let mut hits = 0usize;
        for _ in 0..full_trials {
            hits += full_protocol_detected(model, family, config.m as usize, rng)? as usize;
        }
        let p = hits as f64 / full_trials as f64;
        (Some(p), Some(binomial_stderr(p, full_trials)))
    } else {
        (None, None)
    };

    let closed_form_per_group = per_group_closed_form(model, family).ok();
    let closed_form_overall = closed_form_detection(model, family, config.m).ok();
    Ok(DetectionReport {
        model: model.clone(),
        family,
        m: config.m,
        trials,
        per_group_estimate,
        per_group_stderr: binomial_stderr(per_group_estimate, trials),
        overall_estimate,
        overall_stderr: binomial_stderr(overall_estimate, trials),
        closed_form_per_group,
        closed_form_overall,
        per_group_pass: closed_form_per_group.map(|p| within_sigmas(per_group_estimate, p, trials)),
        overall_pass: closed_form_overall.map(|p| within_sigmas(overall_estimate, p, trials)),
        full_protocol_estimate,
        full_protocol_stderr,
        full_protocol_trials: full_trials,
    })
}

/// Norms of the pair-outcome branches of `U_E|c⟩|0⟩` for the two Z
/// codewords `c`. Each list sums to one in square.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntangleCoefficients {
    pub lambda: [f64; 4],
    pub omega: [f64; 4],
}

fn attacked_codeword(u: &Unitary, family: EncodingFamily, value: LogicalValue) -> StateVector {
    prepare(family, value)
        .tensor(&StateVector::basis(1, 0).expect("one qubit"))
        .and_then(|s| s.apply_unitary(u))
        .expect("8×8 unitary on three qubits")
}

pub fn entangle_coefficients(params: &EntangleParams, family: EncodingFamily) -> Result<EntangleCoefficients> {
    let u = params.unitary(family)?;
    let branch = |value| {
        let p = attacked_codeword(&u, family, value)
            .marginal_probabilities(&[1, 2])
            .expect("pair qubits exist");
        [p[0].sqrt(), p[1].sqrt(), p[2].sqrt(), p[3].sqrt()]
    };
    Ok(EntangleCoefficients {
        lambda: branch(LogicalValue::Zero),
        omega: branch(LogicalValue::One),
    })
}

/// Ancilla (qubit 3) density matrix of a three-qubit pure state.
fn ancilla_density(state: &StateVector) -> [[Complex64; 2]; 2] {
    let a = state.amplitudes();
    let mut rho = [[Complex64::ZERO; 2]; 2];
    for pair in 0..4 {
        for x in 0..2 {
            for y in 0..2 {
                rho[x][y] += a[pair * 2 + x] * a[pair * 2 + y].conj();
            }
        }
    }
    rho
}

/// Trace distance of two qubit density matrices.
pub fn qubit_trace_distance(r0: &[[Complex64; 2]; 2], r1: &[[Complex64; 2]; 2]) -> f64 {
    // Δ is Hermitian and traceless, so its eigenvalues are ±sqrt(a² + |b|²).
    let a = (r0[0][0] - r1[0][0]).re;
    let b = r0[0][1] - r1[0][1];
    (a * a + b.norm_sqr()).sqrt()
}

/// Exact `(detection_prob, eve_distinguishability)` for a coupling attack.
///
/// Detection is the probability that TP's readout of a CTRL-returned pair
/// disagrees with its descriptor, averaged over the four codewords with the
/// ensemble weights. Distinguishability is the trace distance between Eve's
/// ancilla states after logical zero and logical one.
pub fn entangling_attack_analysis(params: &EntangleParams, family: EncodingFamily) -> Result<(f64, f64)> {
    let u = params.unitary(family)?;
    let detection = ENSEMBLE_WEIGHTS
        .iter()
        .map(|&(value, w)| {
            w * mismatch_probability(&attacked_codeword(&u, family, value), LogicalBasis::of(family, value), value)
        })
        .sum();
    let r0 = ancilla_density(&attacked_codeword(&u, family, LogicalValue::Zero));
    let r1 = ancilla_density(&attacked_codeword(&u, family, LogicalValue::One));
    Ok((detection, qubit_trace_distance(&r0, &r1)))
}

/// Thresholds for the zero-disturbance implies zero-information check.
pub const SILENT_DETECTION: f64 = 1e-9;
pub const SILENT_DISTINGUISHABILITY: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntangleSample {
    pub params: EntangleParams,
    pub detection_prob: f64,
    pub eve_distinguishability: f64,
}

impl EntangleSample {
    /// Undetectable by the threshold yet leaking above it.
    pub fn violates(&self) -> bool {
        self.detection_prob < SILENT_DETECTION && self.eve_distinguishability >= SILENT_DISTINGUISHABILITY
    }
}

/// Draws `count` coupling unitaries, cycling through Haar-random ones,
/// exactly transparent ones, and transparent ones perturbed by
/// `ε = 10^u` with `u` uniform in `[-3, 0]`.
pub fn entangling_sweep<R: Rng + ?Sized>(family: EncodingFamily, count: usize, rng: &mut R) -> Result<Vec<EntangleSample>> {
    (0..count)
        .map(|i| {
            let seed = rng.random::<u64>();
            let params = match i % 3 {
                0 => EntangleParams::Haar { seed },
                1 => EntangleParams::Transparent { seed, perturbation: 0.0 },
                _ => EntangleParams::Transparent {
                    seed,
                    perturbation: 10f64.powf(rng.random_range(-3.0..=0.0)),
                },
            };
            let (detection_prob, eve_distinguishability) = entangling_attack_analysis(&params, family)?;
            Ok(EntangleSample {
                params,
                detection_prob,
                eve_distinguishability,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::LogicalOutcome;
    use crate::statevector::Bitstring;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn intercept_zero(family: EncodingFamily) -> AttackModel {
        AttackModel::InterceptResend {
            fake_value: LogicalValue::Zero,
            fake_family: family,
        }
    }

    #[test]
    fn passthrough_and_substitution() {
        let psi = prepare(EncodingFamily::Dephasing, LogicalValue::Minus);
        let (out, rec) = apply_attack(&AttackModel::None, EncodingFamily::Dephasing, &psi, &mut rng(0)).unwrap();
        assert_eq!(out, psi);
        assert_eq!(rec, EveRecord::None);

        let (out, rec) = apply_attack(&intercept_zero(EncodingFamily::Dephasing), EncodingFamily::Dephasing, &psi, &mut rng(0)).unwrap();
        assert!(out.approx_eq(&StateVector::basis(2, 0b01).unwrap(), 1e-15));
        assert_eq!(rec, EveRecord::Intercepted(psi));
    }

    #[test]
    fn measure_resend_on_plus_forwards_z_codewords() {
        let model = AttackModel::MeasureResend {
            measure_basis: LogicalBasis::z(EncodingFamily::Dephasing),
        };
        let plus = prepare(EncodingFamily::Dephasing, LogicalValue::Plus);
        let mut r = rng(1);
        let mut zero = 0usize;
        let n = 10_000;
        for _ in 0..n {
            let (out, rec) = apply_attack(&model, EncodingFamily::Dephasing, &plus, &mut r).unwrap();
            let EveRecord::Measured(readout) = rec else { panic!() };
            if out.approx_eq(&StateVector::basis(2, 0b01).unwrap(), 1e-15) {
                zero += 1;
                assert_eq!(readout.outcome, LogicalOutcome::Zero);
            } else {
                assert!(out.approx_eq(&StateVector::basis(2, 0b10).unwrap(), 1e-15));
            }
        }
        assert!((zero as f64 - 5000.).abs() < 4. * 50.);
    }

    #[test]
    fn measure_resend_invalid_forwards_raw_state() {
        // a rotation codeword read in the dephasing Z basis can land on 00
        let model = AttackModel::MeasureResend {
            measure_basis: LogicalBasis::z(EncodingFamily::Dephasing),
        };
        let phi = prepare(EncodingFamily::Rotation, LogicalValue::Zero);
        let (out, rec) = apply_attack(&model, EncodingFamily::Rotation, &phi, &mut rng(2)).unwrap();
        let EveRecord::Measured(readout) = rec else { panic!() };
        assert!(matches!(readout.outcome, LogicalOutcome::Invalid(_)));
        assert!(out.approx_eq(&StateVector::basis(2, readout.raw.value()).unwrap(), 0.));
    }

    #[test]
    fn closed_forms() {
        let d = EncodingFamily::Dephasing;
        let ir = intercept_zero(d);
        let mr = AttackModel::MeasureResend { measure_basis: LogicalBasis::z(d) };
        assert_eq!(closed_form_detection(&ir, d, 1).unwrap(), 0.25);
        assert_eq!(closed_form_detection(&mr, d, 1).unwrap(), 0.05);
        for m in [5, 20, 60] {
            let a = closed_form_detection(&mr, d, m).unwrap();
            assert!((a - (1.0 - 0.95f64.powi(m as i32))).abs() < 1e-14);
        }
        assert_eq!(closed_form_detection(&ir, d, 0).unwrap(), 0.0);
        assert!((closed_form_detection(&ir, d, 5).unwrap() - 0.7627).abs() < 1e-4);
        assert!((closed_form_detection(&ir, d, 10).unwrap() - 0.9437).abs() < 1e-4);
        let ent = AttackModel::Entangle { params: EntangleParams::Identity };
        assert!(matches!(closed_form_detection(&ent, d, 1), Err(Error::UnsupportedModel(_))));
        let cross = intercept_zero(EncodingFamily::Rotation);
        assert!(closed_form_detection(&cross, d, 1).is_err());
    }

    #[test]
    fn exact_per_group_matches_closed_forms() {
        for family in EncodingFamily::ALL {
            for fake in [LogicalValue::Zero, LogicalValue::One] {
                let m = AttackModel::InterceptResend { fake_value: fake, fake_family: family };
                assert!((exact_per_group_detection(&m, family).unwrap() - 0.25).abs() < 1e-12);
            }
            let m = AttackModel::MeasureResend { measure_basis: LogicalBasis::z(family) };
            assert!((exact_per_group_detection(&m, family).unwrap() - 0.05).abs() < 1e-12);
            assert_eq!(exact_per_group_detection(&AttackModel::None, family).unwrap(), 0.0);
        }
    }

    #[test]
    fn no_attack_baseline_is_exactly_zero() {
        for family in EncodingFamily::ALL {
            let cfg = DetectionConfig { family, m: 5, full_protocol_trials: 20 };
            let rep = monte_carlo_detection(&cfg, &AttackModel::None, 2000, &mut rng(3)).unwrap();
            assert_eq!(rep.per_group_estimate, 0.0);
            assert_eq!(rep.overall_estimate, 0.0);
            assert_eq!(rep.full_protocol_estimate, Some(0.0));
            assert_eq!(rep.per_group_pass, Some(true));
        }
    }

    #[test]
    fn small_monte_carlo_agrees() {
        let d = EncodingFamily::Rotation;
        let cfg = DetectionConfig { family: d, m: 3, full_protocol_trials: 0 };
        let rep = monte_carlo_detection(&cfg, &intercept_zero(d), 20_000, &mut rng(4)).unwrap();
        assert_eq!(rep.per_group_pass, Some(true), "{rep:?}");
        assert_eq!(rep.overall_pass, Some(true), "{rep:?}");
        assert_eq!(rep.full_protocol_estimate, None);
    }

    #[test]
    fn m_zero_has_zero_estimate() {
        let d = EncodingFamily::Dephasing;
        let cfg = DetectionConfig { family: d, m: 0, full_protocol_trials: 0 };
        let rep = monte_carlo_detection(&cfg, &intercept_zero(d), 100, &mut rng(5)).unwrap();
        assert_eq!((rep.overall_estimate, rep.closed_form_overall), (0.0, Some(0.0)));
        assert_eq!(rep.overall_pass, Some(true));
        assert!(monte_carlo_detection(&cfg, &intercept_zero(d), 0, &mut rng(5)).is_err());
    }

    #[test]
    fn identity_attack_is_invisible_and_uninformative() {
        for family in EncodingFamily::ALL {
            assert_eq!(entangling_attack_analysis(&EntangleParams::Identity, family).unwrap(), (0.0, 0.0));
        }
    }

    #[test]
    fn cnot_copy_is_detected() {
        // on the rotation code the copied bit is uncorrelated with the logical
        // value and commutes with the X readout
        let (det, dist) = entangling_attack_analysis(&EntangleParams::CnotToAncilla { control: 1 }, EncodingFamily::Rotation).unwrap();
        assert!(det < 1e-15 && dist < 1e-15, "{det} {dist}");
        // dephasing: the ancilla copies the first bit, so X codewords fail half the time
        let (det, dist) = entangling_attack_analysis(&EntangleParams::CnotToAncilla { control: 1 }, EncodingFamily::Dephasing).unwrap();
        assert!((det - 0.1).abs() < 1e-12);
        assert!((dist - 1.0).abs() < 1e-12);
        assert!(EntangleParams::CnotToAncilla { control: 3 }.unitary(EncodingFamily::Dephasing).is_err());
    }

    #[test]
    fn transparent_attack_scaling() {
        for family in EncodingFamily::ALL {
            let (det, dist) = entangling_attack_analysis(&EntangleParams::Transparent { seed: 9, perturbation: 0.0 }, family).unwrap();
            assert!(det < 1e-15 && dist < 1e-7, "{det} {dist}");
            for eps in [1e-3, 0.1, 1.0] {
                let p = EntangleParams::Transparent { seed: 9, perturbation: eps };
                let (det, dist) = entangling_attack_analysis(&p, family).unwrap();
                assert!((det - 0.1 * (1.0 - (eps / 2.0).cos())).abs() < 1e-12, "{family} {eps}");
                assert!((dist - (eps / 2.0).sin()).abs() < 1e-9, "{family} {eps}");
            }
        }
        // distinguishability grows like the square root of detection, so a tiny
        // perturbation can sit under a detection threshold of 1e-9 while
        // leaking more than 1e-6
        let p = EntangleParams::Transparent { seed: 9, perturbation: 1e-4 };
        let (det, dist) = entangling_attack_analysis(&p, EncodingFamily::Dephasing).unwrap();
        assert!(det < 1e-9 && dist > 1e-6);
    }

    #[test]
    fn sweep_mixes_kinds_without_violations() {
        let samples = entangling_sweep(EncodingFamily::Rotation, 30, &mut rng(6)).unwrap();
        assert_eq!(samples.len(), 30);
        assert_eq!(samples.iter().filter(|s| matches!(s.params, EntangleParams::Haar { .. })).count(), 10);
        assert!(samples.iter().all(|s| !s.violates()));
        assert!(samples.iter().any(|s| s.detection_prob < SILENT_DETECTION));
    }

    #[test]
    fn haar_unitaries_are_unitary_and_seeded() {
        let a = EntangleParams::Haar { seed: 1 }.unitary(EncodingFamily::Dephasing).unwrap();
        let b = EntangleParams::Haar { seed: 1 }.unitary(EncodingFamily::Rotation).unwrap();
        assert_eq!(a, b);
        assert!(a.unitarity_defect() < 1e-12);
        let c = EntangleParams::Haar { seed: 2 }.unitary(EncodingFamily::Dephasing).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn coefficients_are_normalized() {
        for seed in 0..20 {
            let co = entangle_coefficients(&EntangleParams::Haar { seed }, EncodingFamily::Dephasing).unwrap();
            let s = |v: [f64; 4]| v.iter().map(|x| x * x).sum::<f64>();
            assert!((s(co.lambda) - 1.0).abs() < 1e-10);
            assert!((s(co.omega) - 1.0).abs() < 1e-10);
        }
        let co = entangle_coefficients(&EntangleParams::Identity, EncodingFamily::Dephasing).unwrap();
        assert_eq!(co.lambda, [0., 1., 0., 0.]);
        assert_eq!(co.omega, [0., 0., 1., 0.]);
    }

    #[test]
    fn non_unitary_custom_is_rejected() {
        let mut m = vec![[0.0, 0.0]; 64];
        for i in 0..8 {
            m[i * 8 + i] = [1.0, 0.0];
        }
        assert!(EntangleParams::Custom { matrix: m.clone() }.unitary(EncodingFamily::Dephasing).is_ok());
        m[0] = [2.0, 0.0];
        let p = EntangleParams::Custom { matrix: m };
        assert!(matches!(p.unitary(EncodingFamily::Dephasing), Err(Error::NotUnitary(_))));
        let model = AttackModel::Entangle { params: p };
        let psi = prepare(EncodingFamily::Dephasing, LogicalValue::Zero);
        assert!(apply_attack(&model, EncodingFamily::Dephasing, &psi, &mut rng(0)).is_err());
        assert!(EntangleParams::Custom { matrix: vec![[1.0, 0.0]; 3] }.unitary(EncodingFamily::Dephasing).is_err());
    }

    #[test]
    fn entangled_pair_carries_ancilla() {
        let model = AttackModel::Entangle { params: EntangleParams::CnotToAncilla { control: 1 } };
        let psi = prepare(EncodingFamily::Dephasing, LogicalValue::One);
        let (out, rec) = apply_attack(&model, EncodingFamily::Dephasing, &psi, &mut rng(0)).unwrap();
        assert_eq!(rec, EveRecord::Entangled);
        assert_eq!(out.num_qubits(), 3);
        assert!(out.approx_eq(&StateVector::basis(3, 0b101).unwrap(), 1e-15));
    }

    #[test]
    fn rotation_intercept_on_minus_is_uniform_under_x_readout() {
        // TP expects Minus, Eve forwarded Zero_r; the X_r readout is uniform
        let fake = prepare(EncodingFamily::Rotation, LogicalValue::Zero);
        let basis = LogicalBasis::x(EncodingFamily::Rotation);
        let dist = crate::codec::readout_distribution(&fake, basis);
        for p in dist {
            assert!((p - 0.25).abs() < 1e-12);
        }
        let flagged: Vec<String> = Bitstring::all(2)
            .filter(|b| !crate::codec::decode(basis, *b).matches(LogicalValue::Minus))
            .map(|b| b.to_string())
            .collect();
        assert_eq!(flagged, vec!["00", "11"]);
    }

    #[test]
    fn model_serde_shape() {
        let m = intercept_zero(EncodingFamily::Dephasing);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"kind":"intercept_resend","fake_value":"zero","fake_family":"dephasing"}"#);
        let e = AttackModel::Entangle { params: EntangleParams::Haar { seed: 3 } };
        let back: AttackModel = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(back, e);
    }
}
