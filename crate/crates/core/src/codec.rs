//! Decoherence-free logical encodings over two physical qubits.
//!
//! Dephasing family: `|0⟩ = |01⟩`, `|1⟩ = |10⟩`, `|±⟩ = |ψ±⟩`.
//! Rotation family: `|0⟩ = |φ+⟩`, `|1⟩ = |ψ−⟩`, `|±⟩ = (|φ+⟩ ± |ψ−⟩)/√2`.
//!
//! The logical pair always occupies qubits 1 and 2 of a register. A third
//! qubit, when present, belongs to an eavesdropper and is left untouched by
//! noise and readout.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::statevector::{Bitstring, Circuit, Gate, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingFamily {
    Dephasing,
    Rotation,
}

impl EncodingFamily {
    pub const ALL: [EncodingFamily; 2] = [EncodingFamily::Dephasing, EncodingFamily::Rotation];

    pub fn suffix(&self) -> &'static str {
        match self {
            EncodingFamily::Dephasing => "dp",
            EncodingFamily::Rotation => "r",
        }
    }
}

impl fmt::Display for EncodingFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingFamily::Dephasing => "dephasing",
            EncodingFamily::Rotation => "rotation",
        })
    }
}

impl std::str::FromStr for EncodingFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dephasing" | "dp" => Ok(EncodingFamily::Dephasing),
            "rotation" | "r" => Ok(EncodingFamily::Rotation),
            _ => Err(format!("unknown encoding family {s:?} (expected dephasing or rotation)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Z,
    X,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicalValue {
    Zero,
    One,
    Plus,
    Minus,
}

impl LogicalValue {
    pub const ALL: [LogicalValue; 4] = [
        LogicalValue::Zero,
        LogicalValue::One,
        LogicalValue::Plus,
        LogicalValue::Minus,
    ];

    pub fn basis_kind(&self) -> BasisKind {
        match self {
            LogicalValue::Zero | LogicalValue::One => BasisKind::Z,
            LogicalValue::Plus | LogicalValue::Minus => BasisKind::X,
        }
    }

    /// The classical bit carried by a Z-basis value.
    pub fn bit(&self) -> Option<u8> {
        match self {
            LogicalValue::Zero => Some(0),
            LogicalValue::One => Some(1),
            _ => None,
        }
    }

    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            LogicalValue::Zero
        } else {
            LogicalValue::One
        }
    }
}

impl fmt::Display for LogicalValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogicalValue::Zero => "0",
            LogicalValue::One => "1",
            LogicalValue::Plus => "+",
            LogicalValue::Minus => "-",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LogicalBasis {
    pub family: EncodingFamily,
    pub kind: BasisKind,
}

impl LogicalBasis {
    pub fn new(family: EncodingFamily, kind: BasisKind) -> Self {
        Self { family, kind }
    }

    pub fn z(family: EncodingFamily) -> Self {
        Self::new(family, BasisKind::Z)
    }

    pub fn x(family: EncodingFamily) -> Self {
        Self::new(family, BasisKind::X)
    }

    /// The basis a value belongs to in a given family.
    pub fn of(family: EncodingFamily, value: LogicalValue) -> Self {
        Self::new(family, value.basis_kind())
    }
}

impl fmt::Display for LogicalBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            BasisKind::Z => "Z",
            BasisKind::X => "X",
        };
        write!(f, "{k}_{}", self.family.suffix())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicalOutcome {
    Zero,
    One,
    Plus,
    Minus,
    /// Physical outcome outside the codespace of the measured basis.
    Invalid(Bitstring),
}

impl LogicalOutcome {
    pub fn value(&self) -> Option<LogicalValue> {
        match self {
            LogicalOutcome::Zero => Some(LogicalValue::Zero),
            LogicalOutcome::One => Some(LogicalValue::One),
            LogicalOutcome::Plus => Some(LogicalValue::Plus),
            LogicalOutcome::Minus => Some(LogicalValue::Minus),
            LogicalOutcome::Invalid(_) => None,
        }
    }

    pub fn matches(&self, value: LogicalValue) -> bool {
        self.value() == Some(value)
    }
}

impl From<LogicalValue> for LogicalOutcome {
    fn from(v: LogicalValue) -> Self {
        match v {
            LogicalValue::Zero => LogicalOutcome::Zero,
            LogicalValue::One => LogicalOutcome::One,
            LogicalValue::Plus => LogicalOutcome::Plus,
            LogicalValue::Minus => LogicalOutcome::Minus,
        }
    }
}

/// A logical measurement together with the raw two-bit outcome behind it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Readout {
    pub outcome: LogicalOutcome,
    pub raw: Bitstring,
}

/// Classical bit a participant writes down after a SIFT measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiftBit {
    Zero,
    One,
    Invalid,
}

impl SiftBit {
    pub fn bit(&self) -> Option<u8> {
        match self {
            SiftBit::Zero => Some(0),
            SiftBit::One => Some(1),
            SiftBit::Invalid => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiftResult {
    pub bit: SiftBit,
    pub raw: Bitstring,
    /// Freshly prepared product state equal to the measured basis state.
    pub fresh: StateVector,
}

/// Gate sequence taking `|00⟩` to the codeword.
pub fn preparation_circuit(family: EncodingFamily, value: LogicalValue) -> Circuit {
    use EncodingFamily::*;
    use LogicalValue::*;
    match (family, value) {
        (Dephasing, Zero) => Circuit::new().gate(Gate::I, 1).x(2),
        (Dephasing, One) => Circuit::new().x(1).gate(Gate::I, 2),
        (Dephasing, Plus) => Circuit::new().h(1).x(2).cnot(1, 2),
        (Dephasing, Minus) => Circuit::new().x(1).x(2).h(1).cnot(1, 2),
        (Rotation, Zero) => Circuit::new().h(1).cnot(1, 2),
        (Rotation, One) => Circuit::new().x(1).x(2).h(1).cnot(1, 2),
        (Rotation, Plus) => Circuit::new().h(1).x(2).cnot(1, 2).h(1),
        (Rotation, Minus) => Circuit::new().x(1).h(1).cnot(1, 2).h(1),
    }
}

pub fn prepare(family: EncodingFamily, value: LogicalValue) -> StateVector {
    let ground = StateVector::basis(2, 0).expect("two-qubit register");
    preparation_circuit(family, value)
        .run(&ground)
        .expect("preparation circuits only touch qubits 1 and 2")
}

fn on_pair(state: &StateVector, gate: Gate) -> StateVector {
    state
        .apply_single(&gate, 1)
        .and_then(|s| s.apply_single(&gate, 2))
        .expect("state carries a logical pair on qubits 1 and 2")
}

/// `U ⊗ U` with `U = diag(1, e^{iθ})` on the pair.
pub fn apply_collective_dephasing(state: &StateVector, theta: f64) -> StateVector {
    on_pair(state, Gate::Rz(theta))
}

/// `U ⊗ U` with `U = [[cos θ, −sin θ], [sin θ, cos θ]]` on the pair.
///
/// That matrix is exactly `RY(2θ)`.
pub fn apply_collective_rotation(state: &StateVector, theta: f64) -> StateVector {
    on_pair(state, Gate::Ry(2.0 * theta))
}

pub fn apply_collective_noise(state: &StateVector, family: EncodingFamily, theta: f64) -> StateVector {
    match family {
        EncodingFamily::Dephasing => apply_collective_dephasing(state, theta),
        EncodingFamily::Rotation => apply_collective_rotation(state, theta),
    }
}

/// Circuit applied before a computational measurement for a logical basis.
pub fn readout_circuit(basis: LogicalBasis) -> Circuit {
    match (basis.family, basis.kind) {
        (_, BasisKind::Z) => Circuit::new(),
        (EncodingFamily::Dephasing, BasisKind::X) => Circuit::new().cnot(1, 2).h(1),
        (EncodingFamily::Rotation, BasisKind::X) => Circuit::new().h(2),
    }
}

/// Maps the raw two-bit outcome of a readout circuit to a logical outcome.
pub fn decode(basis: LogicalBasis, raw: Bitstring) -> LogicalOutcome {
    use LogicalOutcome as O;
    match (basis.family, basis.kind) {
        (EncodingFamily::Dephasing, BasisKind::Z) => match raw.value() {
            0b01 => O::Zero,
            0b10 => O::One,
            _ => O::Invalid(raw),
        },
        (EncodingFamily::Dephasing, BasisKind::X) => match raw.value() {
            0b01 => O::Plus,
            0b11 => O::Minus,
            _ => O::Invalid(raw),
        },
        (EncodingFamily::Rotation, BasisKind::Z) => {
            if raw.parity() == 0 {
                O::Zero
            } else {
                O::One
            }
        }
        (EncodingFamily::Rotation, BasisKind::X) => {
            if raw.parity() == 0 {
                O::Plus
            } else {
                O::Minus
            }
        }
    }
}

/// Exact distribution over raw pair outcomes after the readout circuit.
pub fn readout_distribution(state: &StateVector, basis: LogicalBasis) -> Vec<f64> {
    readout_circuit(basis)
        .run(state)
        .and_then(|s| s.marginal_probabilities(&[1, 2]))
        .expect("state carries a logical pair on qubits 1 and 2")
}

/// Probability that a logical measurement in `basis` does not return `value`.
pub fn mismatch_probability(state: &StateVector, basis: LogicalBasis, value: LogicalValue) -> f64 {
    readout_distribution(state, basis)
        .iter()
        .enumerate()
        .filter(|(raw, _)| !decode(basis, Bitstring::new(*raw, 2)).matches(value))
        .map(|(_, p)| p)
        .sum()
}

/// Readout circuit, then computational measurement of the pair, then decode.
///
/// On a three-qubit register only the pair is measured.
pub fn measure_logical<R: Rng + ?Sized>(state: &StateVector, basis: LogicalBasis, rng: &mut R) -> Readout {
    let rotated = readout_circuit(basis)
        .run(state)
        .expect("state carries a logical pair on qubits 1 and 2");
    let (raw, _) = rotated
        .measure_qubits(&[1, 2], rng)
        .expect("pair qubits exist");
    Readout {
        outcome: decode(basis, raw),
        raw,
    }
}

/// Z⊗Z measurement of the pair, classical decoding, and re-preparation of the
/// measured basis state.
pub fn sift_measure_and_resend<R: Rng + ?Sized>(
    state: &StateVector,
    family: EncodingFamily,
    rng: &mut R,
) -> SiftResult {
    let (raw, _) = state
        .measure_qubits(&[1, 2], rng)
        .expect("state carries a logical pair on qubits 1 and 2");
    let bit = match family {
        EncodingFamily::Dephasing => match raw.value() {
            0b01 => SiftBit::Zero,
            0b10 => SiftBit::One,
            _ => SiftBit::Invalid,
        },
        EncodingFamily::Rotation => {
            if raw.parity() == 0 {
                SiftBit::Zero
            } else {
                SiftBit::One
            }
        }
    };
    SiftResult {
        bit,
        raw,
        fresh: StateVector::basis(2, raw.value()).expect("two-bit outcome"),
    }
}
