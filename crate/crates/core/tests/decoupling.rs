mod common;

use common::*;
use proptest::prelude::*;
use ratesplit_core::decoupling::*;
use ratesplit_core::linalg::{re, CMat};
use ratesplit_core::tensor::haar_operator;
use ratesplit_core::{Channel, KrausMap, Ket, Operator, Signature};

fn trace_map(d: usize) -> KrausMap {
    let kraus = (0..d).map(|i| CMat::from_fn(1, d, |_, j| re(if i == j { 1.0 } else { 0.0 }))).collect();
    KrausMap::new(sig(&[("A", d)]), sig(&[("R", 1)]), kraus).unwrap()
}

fn two_wire_qmac() -> Channel {
    Channel::builtin("qmac_product", &[0.0, 0.0]).unwrap()
}

#[test]
fn almost_cptp_reproduces_intermediary_state() {
    let mut g = rng(1);
    let control = random_ket(&[("X", 2), ("S", 3)], &mut g);
    let phi = random_ket(&[("X", 2), ("R", 2)], &mut g);
    let t = almost_cptp(&phi, &["X"]).unwrap();
    for _ in 0..10 {
        let u = haar_operator(&sig(&[("X", 2)]), &mut g);
        let ut = Operator::square(u.rows().clone(), u.matrix().transpose()).unwrap();
        let left = t.map.apply(&control.apply(&ut).unwrap().density()).unwrap();
        let right = intermediary_state(&control, &u, &phi).unwrap().density();
        assert!(left.max_diff(&right).unwrap() < 1e-12);
    }
}

#[test]
fn almost_cptp_is_completely_positive() {
    let mut g = rng(2);
    let phi = random_ket(&[("X", 2), ("R", 3)], &mut g);
    let t = almost_cptp(&phi, &["X"]).unwrap();
    assert!(t.choi_min_eigenvalue > -1e-12);
    // trace preserving on π exactly: Tr T(π) = |X| Tr K K† / |X| = 1
    assert!(t.trace_deviation.abs() < 1e-12);
}

#[test]
fn full_trace_map_decouples_exactly() {
    let rho = Operator::maximally_mixed(sig(&[("A", 2)])).tensor(&basis_density("E", 1, 0)).unwrap();
    let setup = SingleSetup { rho, a: vec!["A".into()], map: trace_map(2) };
    let cfg = DecouplingConfig::new(30, 0).unwrap();
    let rep = decoupling_mc(&setup, &cfg).unwrap();
    assert!(rep.values.iter().all(|&v| v.abs() < 1e-12));
    assert!(rep.pass);
}

#[test]
fn bound_halves_when_sender_doubles() {
    let bound = |d: usize| {
        let rho = Operator::maximally_mixed(sig(&[("A", d)])).tensor(&random_density(&[("E", 2)], 2, &mut rng(3))).unwrap();
        let setup = SingleSetup { rho, a: vec!["A".into()], map: trace_map(d) };
        decoupling_bound(&setup, 0.0).unwrap().0
    };
    let (b2, b4) = (bound(2), bound(4));
    assert!((b2 / b4 - 2.0).abs() < 1e-9, "{} {}", b2, b4);
}

#[test]
fn single_sender_reports_respect_the_bound() {
    for seed in 0..4u64 {
        let mut g = rng(100 + seed);
        let rho = random_ket(&[("A", 2), ("E", 2), ("F", 2)], &mut g).reduced(&["A", "E"]).unwrap();
        let ch = Channel::random("r", Signature::single("A", 2).unwrap(), Signature::single("R", 2).unwrap(), 2, &mut g).unwrap();
        let setup = SingleSetup { rho, a: vec!["A".into()], map: ch.map().clone() };
        let rep = decoupling_mc(&setup, &DecouplingConfig::new(60, seed).unwrap()).unwrap();
        assert!(rep.mean - 3.0 * rep.std_error <= rep.theoretical_bound, "{:?}", rep.mean);
        assert!(rep.pass);
    }
}

#[test]
fn reports_are_seed_deterministic() {
    let mut g = rng(4);
    let rho = random_density(&[("A", 2), ("E", 2)], 2, &mut g);
    let ch = Channel::random("r", Signature::single("A", 2).unwrap(), Signature::single("R", 2).unwrap(), 2, &mut g).unwrap();
    let setup = SingleSetup { rho, a: vec!["A".into()], map: ch.map().clone() };
    let cfg = DecouplingConfig::new(30, 9).unwrap();
    assert_eq!(decoupling_mc(&setup, &cfg).unwrap(), decoupling_mc(&setup, &cfg).unwrap());
    let other = DecouplingConfig::new(30, 10).unwrap();
    assert_ne!(decoupling_mc(&setup, &cfg).unwrap().values, decoupling_mc(&setup, &other).unwrap().values);
}

#[test]
fn too_few_trials_rejected() {
    assert!(DecouplingConfig::new(10, 0).is_err());
    assert!(DecouplingConfig::new(MIN_TRIALS, 0).is_ok());
}

#[test]
fn intermediary_with_identity_and_epr_controls() {
    let control = Ket::max_entangled("A", "Ap", 2).unwrap().tensor(&Ket::max_entangled("B", "Bp", 2).unwrap()).unwrap();
    let phi = Ket::max_entangled("B", "R2", 2).unwrap();
    let u = Operator::identity(sig(&[("B", 2)]));
    let w = intermediary_state(&control, &u, &phi).unwrap();
    assert!((w.norm() - 1.0).abs() < 1e-12);
    let ref_part = w.reduced(&["A", "Ap"]).unwrap();
    let epr = Ket::max_entangled("A", "Ap", 2).unwrap().density();
    assert!(ref_part.max_diff(&epr).unwrap() < 1e-12);
    let bp = w.reduced(&["Bp", "R2"]).unwrap().relabel("Bp", "B").unwrap();
    assert!(bp.max_diff(&phi.density()).unwrap() < 1e-12);
}

#[test]
fn intermediary_norm_averages_to_one() {
    let mut g = rng(5);
    let control = random_ket(&[("A", 2), ("B", 2), ("Ap", 2), ("Bp", 2)], &mut g);
    let phi = random_ket(&[("B", 2), ("R2", 2)], &mut g);
    let n = 1000;
    let mut acc = 0.0;
    for _ in 0..n {
        let u = haar_operator(&sig(&[("B", 2)]), &mut g);
        acc += intermediary_state(&control, &u, &phi).unwrap().norm().powi(2);
    }
    assert!((acc / n as f64 - 1.0).abs() < 0.05, "{}", acc / n as f64);
}

#[test]
fn one_haar_on_epr_identity_channel() {
    let control = Ket::max_entangled("A", "Ap", 2).unwrap().tensor(&Ket::max_entangled("B", "Bp", 2).unwrap()).unwrap();
    let psi = Ket::max_entangled("A", "R1", 2).unwrap();
    let phi = Ket::max_entangled("B", "R2", 2).unwrap();
    let ch = two_wire_qmac();
    let cfg = DecouplingConfig::new(40, 1).unwrap();
    let rep = onehaar_mc(&control, &["A"], &psi, &["B"], &phi, &ch, &cfg).unwrap();
    assert!(rep.mean < 1e-9, "{}", rep.mean);
    assert_eq!(rep.checks[0].fraction_within, 1.0);
    assert!(rep.pass);
}

#[test]
fn two_haar_on_epr_identity_channel() {
    let control = Ket::basis(sig(&[("A0", 2)]), &[0])
        .unwrap()
        .tensor(&Ket::max_entangled("A1", "Ap", 2).unwrap())
        .unwrap()
        .tensor(&Ket::max_entangled("B", "Bp", 2).unwrap())
        .unwrap();
    let eta = Ket::max_entangled("A0", "R0", 2).unwrap();
    let transmitted = Ket::max_entangled("A1", "R1", 2).unwrap().tensor(&Ket::max_entangled("B", "R2", 2).unwrap()).unwrap();
    let ch = two_wire_qmac();
    let cfg = DecouplingConfig::new(40, 2).unwrap();
    let rep = product_haar_mc(&control, &["A0"], &eta, &["A1"], &["B"], &transmitted, &ch, &cfg).unwrap();
    assert_eq!(rep.checks[0].fraction_within, 1.0, "{:?}", rep.values);
    assert!(rep.pass);
}

#[test]
fn required_fraction_tracks_k() {
    let values = vec![0.0; 100];
    let at = |k: usize| TrialReport::fraction(values.clone(), vec![("b".into(), 1.0)], k, vec![]).required_fraction.unwrap();
    let nominal = |k: usize| 1.0 - 3.0 / k as f64;
    let se = |k: usize| (nominal(k) * (1.0 - nominal(k)) / 100.0).sqrt();
    for k in [20, 40] {
        assert!((at(k) - (nominal(k) - 3.0 * se(k))).abs() < 1e-15);
    }
    assert!(at(40) > at(20));
}

#[test]
fn protocol_on_identity_channel() {
    let ch = Channel::builtin("identity", &[]).unwrap();
    let omega = Ket::max_entangled(labels::CONTROL, labels::INPUT, 2).unwrap();
    for (theta, d0, d1) in [(0.0, 1, 2), (0.5, 1, 2), (1.0, 2, 1)] {
        let (eta, psi) = epr_messages(d0, d1).unwrap();
        let run = p2p_split_protocol(&ch, &omega, theta, &eta, &psi, &ProtocolConfig::default()).unwrap();
        assert!(run.fidelity >= 0.99, "theta {}: {}", theta, run.fidelity);
        assert!(run.encoder_isometry_error <= 1e-10);
        assert!(!run.failed);
        assert!(run.trace_distance <= run.delta.composed + 1e-12);
    }
}

#[test]
fn protocol_fails_through_full_dephasing() {
    let ch = Channel::builtin("dephasing", &[1.0]).unwrap();
    let omega = Ket::max_entangled(labels::CONTROL, labels::INPUT, 2).unwrap();
    let (eta, psi) = epr_messages(1, 2).unwrap();
    let run = p2p_split_protocol(&ch, &omega, 0.0, &eta, &psi, &ProtocolConfig::default()).unwrap();
    assert!(run.failed);
    assert!(run.fidelity < 0.99);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn composition_of_product_approximations(seed in any::<u64>(), t in 0.0f64..1.0) {
        let mut g = rng(seed);
        let legs = [("A", 2), ("B", 2), ("C", 2)];
        let noise = random_density(&legs, 2, &mut g);
        let prod = random_density(&[("A", 2)], 2, &mut g)
            .tensor(&random_density(&[("B", 2)], 2, &mut g)).unwrap()
            .tensor(&random_density(&[("C", 2)], 2, &mut g)).unwrap();
        let rho = Operator::square(prod.rows().clone(), prod.matrix() * re(1.0 - t) + noise.matrix() * re(t)).unwrap();
        let sa = rho.marginal(&["A"]).unwrap();
        let sab = rho.marginal(&["A", "B"]).unwrap();
        let eta = rho.marginal(&["C"]).unwrap();
        let e1 = trace_norm_distance(&rho, &sa.tensor(&rho.marginal(&["B", "C"]).unwrap()).unwrap()).unwrap();
        let e2 = trace_norm_distance(&rho, &sab.tensor(&eta).unwrap()).unwrap();
        let sb = sab.marginal(&["B"]).unwrap();
        let concl = trace_norm_distance(&rho, &sa.tensor(&sb).unwrap().tensor(&eta).unwrap()).unwrap();
        prop_assert!(concl <= 2.0 * e1 + e2 + 1e-10);
    }
}
