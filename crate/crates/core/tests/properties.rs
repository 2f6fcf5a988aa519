use std::f64::consts::TAU;

use dfq_core::codec::{apply_collective_noise, measure_logical, prepare, LogicalOutcome};
use dfq_core::protocol::{encode_announcement, invert_permutation, tp_compare, Secret, SharedKey, Verdict};
use dfq_core::{Circuit, EncodingFamily, Gate, LogicalBasis, LogicalValue, StateVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn family() -> impl Strategy<Value = EncodingFamily> {
    prop_oneof![Just(EncodingFamily::Dephasing), Just(EncodingFamily::Rotation)]
}

fn value() -> impl Strategy<Value = LogicalValue> {
    prop::sample::select(LogicalValue::ALL.to_vec())
}

fn state(num_qubits: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << num_qubits)
        .prop_filter("nonzero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
        .prop_map(move |v| {
            StateVector::normalized(num_qubits, v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect()).unwrap()
        })
}

fn gate() -> impl Strategy<Value = Gate> {
    prop_oneof![
        Just(Gate::I),
        Just(Gate::X),
        Just(Gate::H),
        (0.0..TAU).prop_map(Gate::Rz),
        (0.0..TAU).prop_map(Gate::Ry),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gate_then_adjoint_restores(s in state(3), g in gate(), q in 1usize..=3) {
        let back = s.apply_gate(&g, q).unwrap().apply_gate(&g.adjoint(), q).unwrap();
        prop_assert!(back.approx_eq(&s, 1e-10));
    }

    #[test]
    fn cnot_is_self_inverse(s in state(3), c in 1usize..=3, t in 1usize..=3) {
        prop_assume!(c != t);
        let back = s.apply_cnot(c, t).unwrap().apply_cnot(c, t).unwrap();
        prop_assert!(back.approx_eq(&s, 1e-12));
    }

    #[test]
    fn gate_sequences_preserve_norm(s in state(3), ops in prop::collection::vec((gate(), 1usize..=3, any::<bool>()), 0..40)) {
        let mut c = Circuit::new();
        for (g, q, cnot) in ops {
            c = if cnot { c.cnot(q, q % 3 + 1) } else { c.gate(g, q) };
        }
        let out = c.run(&s).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn probabilities_ignore_global_phase(s in state(2), phi in 0.0..TAU) {
        let rotated = s.scaled(Complex64::from_polar(1.0, phi));
        for (a, b) in s.probabilities().iter().zip(rotated.probabilities()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn codewords_survive_collective_noise(f in family(), v in value(), theta in 0.0..TAU) {
        let clean = prepare(f, v);
        let noisy = apply_collective_noise(&clean, f, theta);
        prop_assert!(noisy.equal_up_to_global_phase(&clean, 1e-10).unwrap());
        if f == EncodingFamily::Rotation {
            prop_assert!(noisy.approx_eq(&clean, 1e-10));
        }
    }

    #[test]
    fn matching_readout_is_deterministic(f in family(), v in value(), theta in 0.0..TAU, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy = apply_collective_noise(&prepare(f, v), f, theta);
        let r = measure_logical(&noisy, LogicalBasis::of(f, v), &mut rng);
        prop_assert_eq!(r.outcome, LogicalOutcome::from(v));
    }

    #[test]
    fn comparison_matches_direct_sum(
        n in 2usize..=6,
        l in 1usize..=16,
        seed in any::<u64>(),
        equal in any::<bool>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = Secret::random(l, &mut rng);
        let secrets: Vec<Secret> = (0..n).map(|_| if equal { base.clone() } else { Secret::random(l, &mut rng) }).collect();
        let key = SharedKey::distribute(l, &mut rng);
        let ms: Vec<Vec<u8>> = (0..n).map(|_| (0..l).map(|_| rng.random_range(0..2u8)).collect()).collect();
        let r: Vec<Vec<u8>> = secrets.iter().zip(&ms).map(|(x, m)| encode_announcement(x, &key, m).unwrap()).collect();
        let res = tp_compare(&r, &ms).unwrap();
        for j in 0..l {
            let direct: usize = (0..n - 1).map(|i| (secrets[i].bits[j] ^ secrets[i + 1].bits[j]) as usize).sum();
            prop_assert_eq!(res.c[j], direct);
        }
        let identical = secrets.windows(2).all(|w| w[0] == w[1]);
        prop_assert_eq!(res.verdict == Verdict::AllEqual, identical);
    }

    #[test]
    fn permutation_inversion_round_trips(perm in Just((0..20usize).collect::<Vec<_>>()).prop_shuffle()) {
        let items: Vec<usize> = (100..120).collect();
        let sent: Vec<usize> = perm.iter().map(|&p| items[p]).collect();
        prop_assert_eq!(invert_permutation(&sent, &perm).unwrap(), items);
    }
}
