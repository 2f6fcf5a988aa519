//! Six fixed preparation → noise → readout circuits and their outcome
//! histograms.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{decode, preparation_circuit, readout_circuit, EncodingFamily, LogicalBasis, LogicalValue};
use crate::protocol::Operation;
use crate::statevector::{Bitstring, Circuit, Gate, StateVector};

pub const NOISE_ANGLE: f64 = PI / 5.0;

/// Below this many shots the 4σ checks carry no information and are skipped.
pub const MIN_CHECK_SHOTS: u64 = 100;

pub const DEFAULT_SHOTS: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FigureId {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl FigureId {
    pub const ALL: [FigureId; 6] = [FigureId::Fig1, FigureId::Fig2, FigureId::Fig3, FigureId::Fig4, FigureId::Fig5, FigureId::Fig6];

    pub fn file_stem(&self) -> &'static str {
        match self {
            FigureId::Fig1 => "fig1",
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Channel {
    Secure,
    Insecure { fake: LogicalValue },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FigureScenario {
    pub id: FigureId,
    pub family: EncodingFamily,
    pub prepared: LogicalValue,
    pub channel: Channel,
    pub operation: Operation,
    pub shots: u64,
}

impl FigureScenario {
    pub fn new(id: FigureId, shots: u64) -> Self {
        use EncodingFamily::*;
        let (family, channel, operation) = match id {
            FigureId::Fig1 => (Dephasing, Channel::Secure, Operation::Ctrl),
            FigureId::Fig2 => (Dephasing, Channel::Insecure { fake: LogicalValue::Zero }, Operation::Ctrl),
            FigureId::Fig3 => (Dephasing, Channel::Secure, Operation::Sift),
            FigureId::Fig4 => (Rotation, Channel::Secure, Operation::Ctrl),
            FigureId::Fig5 => (Rotation, Channel::Insecure { fake: LogicalValue::Zero }, Operation::Ctrl),
            FigureId::Fig6 => (Rotation, Channel::Secure, Operation::Sift),
        };
        Self {
            id,
            family,
            prepared: LogicalValue::Minus,
            channel,
            operation,
            shots,
        }
    }

    pub fn all(shots: u64) -> Vec<Self> {
        FigureId::ALL.iter().map(|&id| Self::new(id, shots)).collect()
    }

    /// Value actually on the wire after the channel.
    pub fn transmitted(&self) -> LogicalValue {
        match self.channel {
            Channel::Secure => self.prepared,
            Channel::Insecure { fake } => fake,
        }
    }

    pub fn circuit_at(&self, theta: f64) -> Circuit {
        let noise = match self.family {
            EncodingFamily::Dephasing => Gate::Rz(theta),
            EncodingFamily::Rotation => Gate::Ry(theta),
        };
        let c = preparation_circuit(self.family, self.transmitted()).gate(noise, 1).gate(noise, 2);
        match self.operation {
            Operation::Ctrl => c.then(&readout_circuit(LogicalBasis::x(self.family))),
            Operation::Sift => c,
        }
    }

    pub fn circuit(&self) -> Circuit {
        self.circuit_at(NOISE_ANGLE)
    }

    /// Raw outcomes that reveal a mismatch with the prepared value. Only
    /// CTRL scenarios have a logical readout to compare against.
    pub fn detection_outcomes(&self) -> Vec<Bitstring> {
        match self.operation {
            Operation::Sift => Vec::new(),
            Operation::Ctrl => {
                let basis = LogicalBasis::x(self.family);
                Bitstring::all(2).filter(|b| !decode(basis, *b).matches(self.prepared)).collect()
            }
        }
    }
}

fn final_state(s: &FigureScenario, theta: f64) -> StateVector {
    s.circuit_at(theta)
        .run(&StateVector::basis(2, 0).expect("two qubits"))
        .expect("scenario circuits act on two qubits")
}

/// Exact outcome distribution over `00, 01, 10, 11` with the noise angle `θ`.
pub fn expected_distribution_at(s: &FigureScenario, theta: f64) -> Vec<f64> {
    final_state(s, theta).probabilities()
}

pub fn expected_distribution(s: &FigureScenario) -> Vec<f64> {
    expected_distribution_at(s, NOISE_ANGLE)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: [u64; 4],
    pub shots: u64,
}

impl Histogram {
    pub fn count(&self, outcome: &str) -> u64 {
        outcome
            .parse::<Bitstring>()
            .ok()
            .filter(|b| b.width() == 2)
            .map_or(0, |b| self.counts[b.value()])
    }

    /// `(outcome, count)` rows for outcomes that occurred, in index order.
    pub fn rows(&self) -> Vec<(String, u64)> {
        Bitstring::all(2)
            .filter(|b| self.counts[b.value()] > 0)
            .map(|b| (b.to_string(), self.counts[b.value()]))
            .collect()
    }
}

pub fn run_scenario<R: Rng + ?Sized>(s: &FigureScenario, rng: &mut R) -> Histogram {
    let counts = final_state(s, NOISE_ANGLE).sample_counts(s.shots, rng);
    Histogram {
        counts: counts.try_into().expect("two-qubit register"),
        shots: s.shots,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIPPED",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCheck {
    pub id: FigureId,
    pub status: CheckStatus,
    pub expected: Vec<f64>,
    pub histogram: Histogram,
    /// Largest `|count − shots·p| / σ` over outcomes with σ > 0.
    pub max_sigma: f64,
}

/// Per-outcome check: within 4σ where σ > 0, exact where the outcome is
/// certain or impossible.
pub fn check_histogram(s: &FigureScenario, h: &Histogram) -> ScenarioCheck {
    let expected = expected_distribution(s);
    let mut ok = true;
    let mut max_sigma: f64 = 0.0;
    for (i, &p) in expected.iter().enumerate() {
        let p = if p < 1e-12 {
            0.0
        } else if p > 1.0 - 1e-12 {
            1.0
        } else {
            p
        };
        let n = h.shots as f64;
        let mean = n * p;
        let sigma = (n * p * (1.0 - p)).sqrt();
        let observed = h.counts[i] as f64;
        if sigma == 0.0 {
            ok &= observed == mean;
        } else {
            let z = (observed - mean).abs() / sigma;
            max_sigma = max_sigma.max(z);
            ok &= z < 4.0;
        }
    }
    let status = if h.shots < MIN_CHECK_SHOTS {
        CheckStatus::Skipped
    } else if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    ScenarioCheck {
        id: s.id,
        status,
        expected,
        histogram: h.clone(),
        max_sigma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dist(id: FigureId) -> Vec<f64> {
        expected_distribution(&FigureScenario::new(id, 1))
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn expected_distributions() {
        assert!(close(&dist(FigureId::Fig1), &[0., 0., 0., 1.]));
        assert!(close(&dist(FigureId::Fig2), &[0., 0.5, 0., 0.5]));
        assert!(close(&dist(FigureId::Fig3), &[0., 0.5, 0.5, 0.]));
        assert!(close(&dist(FigureId::Fig4), &[0., 0.5, 0.5, 0.]));
        assert!(close(&dist(FigureId::Fig5), &[0.25; 4]));
        assert!(close(&dist(FigureId::Fig6), &[0.25; 4]));
    }

    #[test]
    fn noise_angle_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for s in FigureScenario::all(1) {
            let base = expected_distribution(&s);
            for _ in 0..20 {
                let theta = rng.random::<f64>() * 2.0 * PI;
                assert!(close(&expected_distribution_at(&s, theta), &base), "{}", s.id);
            }
        }
    }

    #[test]
    fn detection_outcomes() {
        let names = |id| -> Vec<String> {
            FigureScenario::new(id, 1).detection_outcomes().iter().map(|b| b.to_string()).collect()
        };
        assert_eq!(names(FigureId::Fig2), vec!["00", "01", "10"]);
        assert_eq!(names(FigureId::Fig5), vec!["00", "11"]);
        assert!(names(FigureId::Fig3).is_empty());
        // the attacked scenarios put weight on a detection outcome
        for (id, hit) in [(FigureId::Fig2, vec!["01"]), (FigureId::Fig5, vec!["00", "11"])] {
            let s = FigureScenario::new(id, 1);
            let d = expected_distribution(&s);
            let reached: Vec<String> = s.detection_outcomes().iter().filter(|b| d[b.value()] > 0.1).map(|b| b.to_string()).collect();
            assert_eq!(reached, hit);
        }
        // secure CTRL scenarios never land on a detection outcome
        for id in [FigureId::Fig1, FigureId::Fig4] {
            let s = FigureScenario::new(id, 1);
            let d = expected_distribution(&s);
            assert!(s.detection_outcomes().iter().all(|b| d[b.value()] < 1e-12));
        }
    }

    #[test]
    fn sampled_histograms_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for s in FigureScenario::all(DEFAULT_SHOTS) {
            let h = run_scenario(&s, &mut rng);
            assert_eq!(h.counts.iter().sum::<u64>(), DEFAULT_SHOTS);
            assert_eq!(check_histogram(&s, &h).status, CheckStatus::Pass, "{}", s.id);
        }
    }

    #[test]
    fn fig1_is_deterministic() {
        let s = FigureScenario::new(FigureId::Fig1, 500);
        let h = run_scenario(&s, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(h.rows(), vec![("11".to_string(), 500)]);
        assert_eq!(h.count("11"), 500);
        assert_eq!(h.count("bogus"), 0);
    }

    #[test]
    fn few_shots_are_skipped() {
        let s = FigureScenario::new(FigureId::Fig5, 1);
        let h = run_scenario(&s, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(h.shots, 1);
        assert_eq!(check_histogram(&s, &h).status, CheckStatus::Skipped);
    }

    #[test]
    fn corrupted_histogram_fails() {
        let s = FigureScenario::new(FigureId::Fig1, 1000);
        let h = Histogram { counts: [1, 0, 0, 999], shots: 1000 };
        assert_eq!(check_histogram(&s, &h).status, CheckStatus::Fail);
        let s = FigureScenario::new(FigureId::Fig2, 10_000);
        let h = Histogram { counts: [0, 4000, 0, 6000], shots: 10_000 };
        assert_eq!(check_histogram(&s, &h).status, CheckStatus::Fail);
    }
}
