//! Dense statevector simulation for registers of one to three qubits.
//!
//! Qubits are numbered from 1, and qubit 1 is the most significant bit of the
//! basis index, so `|q1 q2 q3⟩` reads left to right exactly as written in a
//! ket. A register never grows past three qubits: two carry a logical pair,
//! the optional third is an eavesdropper's ancilla.
//!
//! Every operation returns a new value; states are never mutated in place.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Amplitude = Complex64;

/// Tolerance on Σ|amp|² accepted when constructing a state.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Outcome probabilities below this are treated as exactly zero when sampling.
pub const ZERO_PROBABILITY_CUTOFF: f64 = 1e-14;

pub const MAX_QUBITS: usize = 3;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A computational-basis outcome printed most significant qubit first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitstring {
    value: usize,
    width: usize,
}

impl Bitstring {
    pub fn new(value: usize, width: usize) -> Self {
        debug_assert!(width <= usize::BITS as usize && value >> width == 0);
        Self { value, width }
    }

    pub fn value(&self) -> usize {
        self.value
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Bit of qubit `q` (numbered from 1).
    pub fn bit(&self, q: usize) -> u8 {
        ((self.value >> (self.width - q)) & 1) as u8
    }

    pub fn parity(&self) -> u8 {
        (self.value.count_ones() & 1) as u8
    }

    /// All bitstrings of the given width in index order.
    pub fn all(width: usize) -> impl Iterator<Item = Bitstring> {
        (0..1usize << width).map(move |v| Bitstring::new(v, width))
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 1..=self.width {
            write!(f, "{}", self.bit(q))?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Bitstring {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.is_empty() || s.len() > 8 {
            return Err(format!("bad bitstring {s:?}"));
        }
        let mut value = 0;
        for ch in s.chars() {
            value <<= 1;
            match ch {
                '0' => {}
                '1' => value |= 1,
                _ => return Err(format!("bad bitstring {s:?}")),
            }
        }
        Ok(Bitstring::new(value, s.len()))
    }
}

impl Serialize for Bitstring {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bitstring {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Unitary {
    dim: usize,
    data: Vec<Complex64>,
}

impl Unitary {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![Complex64::ZERO; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::ONE;
        }
        Self { dim, data }
    }

    /// Builds a matrix from row-major entries without checking unitarity.
    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::LengthMismatch {
                expected: dim * dim,
                actual: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let dim = columns.len();
        let mut data = vec![Complex64::ZERO; dim * dim];
        for (j, col) in columns.iter().enumerate() {
            if col.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    actual: col.len(),
                });
            }
            for (i, z) in col.iter().enumerate() {
                data[i * dim + j] = *z;
            }
        }
        Self::from_row_major(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn column(&self, col: usize) -> Vec<Complex64> {
        (0..self.dim).map(|r| self.get(r, col)).collect()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut data = vec![Complex64::ZERO; n * n];
        for r in 0..n {
            for col in 0..n {
                data[col * n + r] = self.data[r * n + col].conj();
            }
        }
        Self { dim: n, data }
    }

    pub fn matmul(&self, other: &Unitary) -> Result<Unitary> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        let n = self.dim;
        let mut data = vec![Complex64::ZERO; n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == Complex64::ZERO {
                    continue;
                }
                for col in 0..n {
                    data[r * n + col] += a * other.data[k * n + col];
                }
            }
        }
        Ok(Unitary { dim: n, data })
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Unitary) -> Unitary {
        let (a, b) = (self.dim, other.dim);
        let n = a * b;
        let mut data = vec![Complex64::ZERO; n * n];
        for i in 0..a {
            for j in 0..a {
                let s = self.data[i * a + j];
                for k in 0..b {
                    for l in 0..b {
                        data[(i * b + k) * n + (j * b + l)] = s * other.data[k * b + l];
                    }
                }
            }
        }
        Unitary { dim: n, data }
    }

    /// Largest entry-wise deviation of U†U from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = self
            .adjoint()
            .matmul(self)
            .expect("adjoint has the same dimension");
        let id = Unitary::identity(self.dim);
        prod.data
            .iter()
            .zip(&id.data)
            .map(|(p, i)| (p - i).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    I,
    X,
    H,
    /// `diag(1, e^{iθ})`.
    Rz(f64),
    /// `[[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]]`.
    Ry(f64),
    Cnot { control: usize, target: usize },
}

impl Gate {
    pub fn is_single_qubit(&self) -> bool {
        !matches!(self, Gate::Cnot { .. })
    }

    /// 2×2 for single-qubit gates. CNOT is given on its own two-qubit
    /// register with the control as the more significant qubit.
    pub fn matrix(&self) -> Unitary {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (dim, data) = match *self {
            Gate::I => return Unitary::identity(2),
            Gate::X => (2, vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
            Gate::H => (2, vec![c(h, 0.), c(h, 0.), c(h, 0.), c(-h, 0.)]),
            Gate::Rz(theta) => (
                2,
                vec![c(1., 0.), c(0., 0.), c(0., 0.), Complex64::from_polar(1.0, theta)],
            ),
            Gate::Ry(theta) => {
                let (s, co) = (theta / 2.0).sin_cos();
                (2, vec![c(co, 0.), c(-s, 0.), c(s, 0.), c(co, 0.)])
            }
            Gate::Cnot { .. } => {
                let mut m = Unitary::identity(4);
                m.data[2 * 4 + 2] = Complex64::ZERO;
                m.data[3 * 4 + 3] = Complex64::ZERO;
                m.data[2 * 4 + 3] = Complex64::ONE;
                m.data[3 * 4 + 2] = Complex64::ONE;
                return m;
            }
        };
        Unitary { dim, data }
    }

    pub fn adjoint(&self) -> Gate {
        match *self {
            Gate::Rz(t) => Gate::Rz(-t),
            Gate::Ry(t) => Gate::Ry(-t),
            g => g,
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::I => write!(f, "I"),
            Gate::X => write!(f, "X"),
            Gate::H => write!(f, "H"),
            Gate::Rz(t) => write!(f, "RZ({t})"),
            Gate::Ry(t) => write!(f, "RY({t})"),
            Gate::Cnot { control, target } => write!(f, "CNOT({control},{target})"),
        }
    }
}

/// One instruction of a [`Circuit`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Step {
    Single { gate: Gate, qubit: usize },
    Cnot { control: usize, target: usize },
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Single { gate, qubit } => write!(f, "{gate}[{qubit}]"),
            Step::Cnot { control, target } => write!(f, "CNOT[{control}->{target}]"),
        }
    }
}

/// An ordered gate list, built fluently.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Circuit {
    steps: Vec<Step>,
}

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn gate(mut self, gate: Gate, qubit: usize) -> Self {
        self.steps.push(Step::Single { gate, qubit });
        self
    }

    pub fn x(self, q: usize) -> Self {
        self.gate(Gate::X, q)
    }

    pub fn h(self, q: usize) -> Self {
        self.gate(Gate::H, q)
    }

    pub fn rz(self, theta: f64, q: usize) -> Self {
        self.gate(Gate::Rz(theta), q)
    }

    pub fn ry(self, theta: f64, q: usize) -> Self {
        self.gate(Gate::Ry(theta), q)
    }

    pub fn cnot(mut self, control: usize, target: usize) -> Self {
        self.steps.push(Step::Cnot { control, target });
        self
    }

    pub fn then(mut self, other: &Circuit) -> Self {
        self.steps.extend_from_slice(&other.steps);
        self
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn run(&self, state: &StateVector) -> Result<StateVector> {
        let mut out = state.clone();
        for step in &self.steps {
            out = match *step {
                Step::Single { gate, qubit } => out.apply_single(&gate, qubit)?,
                Step::Cnot { control, target } => out.apply_cnot(control, target)?,
            };
        }
        Ok(out)
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.steps.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    fn check_width(num_qubits: usize) -> Result<()> {
        if (1..=MAX_QUBITS).contains(&num_qubits) {
            Ok(())
        } else {
            Err(Error::UnsupportedWidth(num_qubits))
        }
    }

    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        Self::check_width(num_qubits)?;
        let dim = 1 << num_qubits;
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, num_qubits });
        }
        let mut amps = vec![Complex64::ZERO; dim];
        amps[index] = Complex64::ONE;
        Ok(Self { num_qubits, amps })
    }

    /// Builds a state from explicit amplitudes; they must already be normalized.
    pub fn from_amplitudes(num_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        Self::check_width(num_qubits)?;
        let dim = 1 << num_qubits;
        if amps.len() != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                actual: amps.len(),
            });
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { num_qubits, amps })
    }

    /// Like [`from_amplitudes`](Self::from_amplitudes) but rescales any nonzero vector.
    pub fn normalized(num_qubits: usize, mut amps: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm * norm));
        }
        for z in &mut amps {
            *z /= norm;
        }
        Self::from_amplitudes(num_qubits, amps)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    fn check_qubit(&self, qubit: usize) -> Result<usize> {
        if qubit == 0 || qubit > self.num_qubits {
            return Err(Error::QubitOutOfRange {
                qubit,
                num_qubits: self.num_qubits,
            });
        }
        Ok(self.num_qubits - qubit)
    }

    pub fn apply_single(&self, gate: &Gate, qubit: usize) -> Result<Self> {
        if !gate.is_single_qubit() {
            return Err(Error::NotSingleQubit(gate.to_string()));
        }
        let shift = self.check_qubit(qubit)?;
        let m = gate.matrix();
        let (m00, m01, m10, m11) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
        let mask = 1 << shift;
        let mut amps = self.amps.clone();
        for i in 0..self.dim() {
            if i & mask == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | mask]);
                amps[i] = m00 * a0 + m01 * a1;
                amps[i | mask] = m10 * a0 + m11 * a1;
            }
        }
        Ok(Self {
            num_qubits: self.num_qubits,
            amps,
        })
    }

    pub fn apply_cnot(&self, control: usize, target: usize) -> Result<Self> {
        let cs = self.check_qubit(control)?;
        let ts = self.check_qubit(target)?;
        if control == target {
            return Err(Error::ControlIsTarget(control));
        }
        let amps = (0..self.dim())
            .map(|i| {
                let src = if (i >> cs) & 1 == 1 { i ^ (1 << ts) } else { i };
                self.amps[src]
            })
            .collect();
        Ok(Self {
            num_qubits: self.num_qubits,
            amps,
        })
    }

    pub fn apply_gate(&self, gate: &Gate, qubit: usize) -> Result<Self> {
        match *gate {
            Gate::Cnot { control, target } => self.apply_cnot(control, target),
            _ => self.apply_single(gate, qubit),
        }
    }

    /// Applies a matrix acting on the whole register.
    pub fn apply_unitary(&self, u: &Unitary) -> Result<Self> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: u.dim(),
            });
        }
        let amps = (0..self.dim())
            .map(|r| {
                (0..self.dim())
                    .map(|col| u.get(r, col) * self.amps[col])
                    .sum()
            })
            .collect();
        Ok(Self {
            num_qubits: self.num_qubits,
            amps,
        })
    }

    /// `self ⊗ other`; the qubits of `other` are appended after those of `self`.
    pub fn tensor(&self, other: &StateVector) -> Result<Self> {
        let n = self.num_qubits + other.num_qubits;
        Self::check_width(n)?;
        let mut amps = Vec::with_capacity(1 << n);
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(Self { num_qubits: n, amps })
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            num_qubits: self.num_qubits,
            amps: self.amps.iter().map(|a| a * factor).collect(),
        }
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                actual: other.num_qubits,
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn equal_up_to_global_phase(&self, other: &StateVector, tol: f64) -> Result<bool> {
        Ok(self.inner(other)?.norm() >= 1.0 - tol)
    }

    /// Entry-wise comparison, phase included.
    pub fn approx_eq(&self, other: &StateVector, tol: f64) -> bool {
        self.num_qubits == other.num_qubits
            && self
                .amps
                .iter()
                .zip(&other.amps)
                .all(|(a, b)| (a - b).norm() <= tol)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Outcome distribution over the listed qubits, indexed with the first
    /// listed qubit as most significant bit.
    pub fn marginal_probabilities(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        let shifts = qubits
            .iter()
            .map(|&q| self.check_qubit(q))
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![0.0; 1 << qubits.len()];
        for (i, z) in self.amps.iter().enumerate() {
            out[project_index(i, &shifts)] += z.norm_sqr();
        }
        Ok(out)
    }

    pub fn measure_computational<R: Rng + ?Sized>(&self, rng: &mut R) -> (Bitstring, StateVector) {
        let index = sample_index(&self.probabilities(), rng);
        let post = StateVector::basis(self.num_qubits, index).expect("sampled index is in range");
        (Bitstring::new(index, self.num_qubits), post)
    }

    /// Projective measurement of a subset of qubits; the remaining qubits keep
    /// their (renormalized) conditional state.
    pub fn measure_qubits<R: Rng + ?Sized>(
        &self,
        qubits: &[usize],
        rng: &mut R,
    ) -> Result<(Bitstring, StateVector)> {
        let shifts = qubits
            .iter()
            .map(|&q| self.check_qubit(q))
            .collect::<Result<Vec<_>>>()?;
        let probs = self.marginal_probabilities(qubits)?;
        let outcome = sample_index(&probs, rng);
        let kept: Vec<Complex64> = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, z)| {
                if project_index(i, &shifts) == outcome {
                    *z
                } else {
                    Complex64::ZERO
                }
            })
            .collect();
        let post = StateVector::normalized(self.num_qubits, kept)?;
        Ok((Bitstring::new(outcome, qubits.len()), post))
    }

    /// Draws `shots` independent outcomes without collapsing; returns counts per index.
    pub fn sample_counts<R: Rng + ?Sized>(&self, shots: u64, rng: &mut R) -> Vec<u64> {
        let probs = self.probabilities();
        let mut counts = vec![0; probs.len()];
        for _ in 0..shots {
            counts[sample_index(&probs, rng)] += 1;
        }
        counts
    }
}

fn project_index(i: usize, shifts: &[usize]) -> usize {
    shifts
        .iter()
        .fold(0, |acc, &s| (acc << 1) | ((i >> s) & 1))
}

/// Samples an index with probability proportional to `probs`, never returning
/// an entry below [`ZERO_PROBABILITY_CUTOFF`].
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs
        .iter()
        .filter(|&&p| p >= ZERO_PROBABILITY_CUTOFF)
        .sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p < ZERO_PROBABILITY_CUTOFF {
            continue;
        }
        last = i;
        if u < p {
            return i;
        }
        u -= p;
    }
    last
}
