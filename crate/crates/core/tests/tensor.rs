mod common;

use common::*;
use proptest::prelude::*;
use ratesplit_core::linalg::{self, re, CMat};
use ratesplit_core::tensor::{distances, haar_unitary, purified_distance, purify, uhlmann_isometry};
use ratesplit_core::{Complex64, Ket, Operator, Signature};

const OP_TOL: f64 = 1e-12;

#[test]
fn tensor_of_identities_and_mixed_states() {
    let i2a = Operator::identity(sig(&[("A", 2)]));
    let i2b = Operator::identity(sig(&[("B", 2)]));
    let i4 = i2a.tensor(&i2b).unwrap();
    assert_eq!(i4.rows().labels(), vec!["A", "B"]);
    assert!(i4.max_diff(&Operator::identity(sig(&[("A", 2), ("B", 2)]))).unwrap() == 0.0);

    let pa = Operator::maximally_mixed(sig(&[("A", 2)]));
    let pb = Operator::maximally_mixed(sig(&[("B", 2)]));
    let pab = Operator::maximally_mixed(sig(&[("A", 2), ("B", 2)]));
    assert!(pa.tensor(&pb).unwrap().max_diff(&pab).unwrap() < OP_TOL);

    let z = basis_density("A", 2, 0).tensor(&basis_density("B", 2, 1)).unwrap();
    let expect = Ket::basis(sig(&[("A", 2), ("B", 2)]), &[0, 1]).unwrap().density();
    assert!(z.max_diff(&expect).unwrap() < OP_TOL);
    assert!((z.matrix()[(1, 1)].re - 1.0).abs() < OP_TOL);
}

#[test]
fn partial_trace_examples() {
    let phi = Ket::max_entangled("A", "B", 2).unwrap().density();
    let ra = phi.partial_trace(&["B"]).unwrap();
    assert!(ra.max_diff(&Operator::maximally_mixed(sig(&[("A", 2)]))).unwrap() < OP_TOL);

    let mut g = rng(1);
    let rho = random_density(&[("A", 3)], 2, &mut g);
    let sigma = random_density(&[("B", 2)], 2, &mut g).scale(re(0.7));
    let prod = rho.tensor(&sigma).unwrap();
    let back = prod.partial_trace(&["B"]).unwrap();
    assert!(back.max_diff(&rho.scale(re(0.7))).unwrap() < OP_TOL);
}

#[test]
fn op_map_on_basis_vector() {
    let k = Ket::basis(sig(&[("A", 2), ("B", 2)]), &[0, 1]).unwrap();
    let m = k.op_map(&["A"], &["B"]).unwrap();
    assert_eq!(m.rows().labels(), vec!["B"]);
    assert_eq!(m.cols().labels(), vec!["A"]);
    let mut expect = CMat::zeros(2, 2);
    expect[(1, 0)] = re(1.0);
    assert!(linalg::max_abs(&(m.matrix() - expect)) == 0.0);
}

#[test]
fn haar_trivial_dimension_is_a_phase() {
    let u = haar_unitary(1, &mut rng(3));
    assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-12);
}

#[test]
fn haar_first_moment() {
    let mut g = rng(11);
    let mut acc = CMat::zeros(2, 2);
    let n = 10_000;
    for _ in 0..n {
        let u = haar_unitary(2, &mut g);
        let col = u.column(0);
        acc += &col * col.adjoint();
    }
    acc /= re(n as f64);
    let diff = acc - linalg::identity(2) * re(0.5);
    assert!(linalg::trace_norm(&diff) < 0.02);
}

#[test]
fn distance_examples() {
    let mut g = rng(5);
    let rho = random_density(&[("A", 3)], 3, &mut g);
    let d = distances(&rho, &rho).unwrap();
    assert!((d.fidelity - 1.0).abs() < 1e-9 && d.purified < 1e-4 && d.trace < 1e-12);

    let zero = basis_density("A", 2, 0);
    let one = basis_density("A", 2, 1);
    let d = distances(&zero, &one).unwrap();
    assert!(d.fidelity.abs() < 1e-12 && (d.purified - 1.0).abs() < 1e-12 && (d.trace - 1.0).abs() < 1e-12);

    let h = core::f64::consts::FRAC_1_SQRT_2;
    let plus = Ket::from_slice(sig(&[("A", 2)]), &[re(h), re(h)]).unwrap().density();
    let d = distances(&zero, &plus).unwrap();
    for v in [d.fidelity, d.purified, d.trace] {
        assert!((v - h).abs() < 1e-9, "{:?}", d);
    }
    // Trace distance of two pure states from the spectrum of their difference.
    let diff = zero.matrix() - plus.matrix();
    let half_norm: f64 = 0.5 * linalg::eigvalsh(&diff).iter().map(|x| x.abs()).sum::<f64>();
    assert!((half_norm - d.trace).abs() < 1e-12);
}

#[test]
fn purify_examples() {
    let p = purify(&basis_density("A", 2, 0), "R").unwrap();
    assert_eq!(p.signature().dim_of("R").unwrap(), 1);
    assert!((p.amplitudes()[0].norm() - 1.0).abs() < 1e-12);

    let p = purify(&Operator::maximally_mixed(sig(&[("A", 2)])), "R").unwrap();
    assert_eq!(p.signature().dim_of("R").unwrap(), 2);
    let r = p.reduced(&["R"]).unwrap();
    assert!(r.max_diff(&Operator::maximally_mixed(sig(&[("R", 2)]))).unwrap() < 1e-12);
    assert!(p.reduced(&["A"]).unwrap().max_diff(&Operator::maximally_mixed(sig(&[("A", 2)]))).unwrap() < 1e-12);
}

#[test]
fn uhlmann_identity_when_equal() {
    let mut g = rng(8);
    let psi = random_ket(&[("S", 3), ("P", 3)], &mut g);
    let u = uhlmann_isometry(&psi, &psi, &["S"], 1e-9).unwrap();
    let w = u.isometry.matrix();
    assert!(linalg::max_abs(&(w - linalg::identity(3))) < 1e-10);
    assert!((u.overlap - 1.0).abs() < 1e-12 && !u.degraded);
}

#[test]
fn uhlmann_recovers_planted_isometry() {
    let mut g = rng(9);
    let psi = random_ket(&[("S", 3), ("P", 2)], &mut g);
    let u = haar_unitary(3, &mut g);
    let v = Operator::new(sig(&[("Q", 3)]), sig(&[("P", 2)]), u.columns(0, 2).into_owned()).unwrap();
    let phi = psi.apply(&v).unwrap();
    let found = uhlmann_isometry(&psi, &phi, &["S"], 1e-9).unwrap();
    found.isometry.check_isometry().unwrap();
    let moved = psi.apply(&found.isometry).unwrap();
    assert!(moved.distance(&phi).unwrap() <= 1e-10);
}

#[test]
fn uhlmann_overlap_with_equal_marginals() {
    let mut g = rng(10);
    for _ in 0..5 {
        let psi = random_ket(&[("S", 4), ("P", 4)], &mut g);
        let v = Operator::new(sig(&[("P", 4)]), sig(&[("P", 4)]), haar_unitary(4, &mut g)).unwrap();
        let phi = psi.apply(&v).unwrap();
        let found = uhlmann_isometry(&psi, &phi, &["S"], 1e-9).unwrap();
        let ov = phi.inner(&psi.apply(&found.isometry).unwrap()).unwrap().norm();
        assert!(ov >= 1.0 - 1e-10, "{}", ov);
    }
}

#[test]
fn partial_trace_commutes_with_reordering() {
    let mut g = rng(12);
    let rho = random_density(&[("A", 2), ("B", 3), ("C", 2), ("D", 2)], 3, &mut g);
    let a = rho.partial_trace(&["B"]).unwrap().permuted(&["D", "A", "C"]).unwrap();
    let b = rho.permuted(&["D", "B", "A", "C"]).unwrap().partial_trace(&["B"]).unwrap();
    assert_eq!(a.rows(), b.rows());
    assert!(a.matrix() == b.matrix());
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMat {
    let mut g = rng(seed);
    let k = random_ket(&[("M", rows * cols)], &mut g);
    CMat::from_fn(rows, cols, |r, c| k.amplitudes()[r * cols + c] * re(2.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn swap_lemma(seed in any::<u64>(), da in 2usize..=3, db in 2usize..=3, dc in 2usize..=3) {
        let mut g = rng(seed);
        let psi = random_ket(&[("A", da), ("B", db)], &mut g);
        let phi = random_ket(&[("A", da), ("C", dc)], &mut g);
        let left = psi.apply(&phi.op_map(&["A"], &["C"]).unwrap()).unwrap();
        let right = phi.apply(&psi.op_map(&["A"], &["B"]).unwrap()).unwrap();
        prop_assert!(left.distance(&right).unwrap() < OP_TOL);
    }

    #[test]
    fn epr_bending(seed in any::<u64>(), d in 2usize..=4, db in 2usize..=4) {
        let mut g = rng(seed);
        let psi = random_ket(&[("A", d), ("B", db)], &mut g);
        let epr = Ket::max_entangled("A", "A1", d).unwrap();
        let m = psi.op_map(&["A"], &["B"]).unwrap().scale(re((d as f64).sqrt()));
        let out = epr.apply(&m).unwrap();
        let expect = psi.relabel("A", "A1").unwrap();
        prop_assert!(out.distance(&expect).unwrap() < OP_TOL);
    }

    #[test]
    fn bending_absorbs_local_maps(seed in any::<u64>(), da in 2usize..=4, db in 2usize..=4, dc in 2usize..=4) {
        let mut g = rng(seed);
        let psi = random_ket(&[("A", da), ("B", db)], &mut g);
        let m = random_matrix(dc, da, seed ^ 0x5a5a);
        let m_op = Operator::new(sig(&[("C", dc)]), sig(&[("A", da)]), m.clone()).unwrap();
        let moved = psi.apply(&m_op).unwrap();
        let left = moved.op_map(&["C"], &["B"]).unwrap();
        let mt = Operator::new(sig(&[("A", da)]), sig(&[("C", dc)]), m.transpose()).unwrap();
        let right = psi.op_map(&["A"], &["B"]).unwrap().compose(&mt).unwrap();
        prop_assert!(left.max_diff(&right).unwrap() < OP_TOL);
    }

    #[test]
    fn marginal_from_bent_map(seed in any::<u64>(), da in 2usize..=4, db in 2usize..=4) {
        let mut g = rng(seed);
        let psi = random_ket(&[("A", da), ("B", db)], &mut g);
        let m = psi.op_map(&["B"], &["A"]).unwrap();
        let mm = m.compose(&m.dagger()).unwrap();
        prop_assert!(psi.reduced(&["A"]).unwrap().max_diff(&mm).unwrap() < OP_TOL);
        let via_trace = psi.density().partial_trace(&["B"]).unwrap();
        prop_assert!(via_trace.max_diff(&mm).unwrap() < OP_TOL);
    }

    #[test]
    fn purified_distance_is_a_metric(seed in any::<u64>(), d in 2usize..=4) {
        let mut g = rng(seed);
        let legs = [("A", d)];
        let (a, b, c) = (random_density(&legs, 2, &mut g), random_density(&legs, 2, &mut g), random_density(&legs, 2, &mut g));
        let ab = purified_distance(&a, &b).unwrap();
        prop_assert_eq!(ab, purified_distance(&b, &a).unwrap());
        let (bc, ac) = (purified_distance(&b, &c).unwrap(), purified_distance(&a, &c).unwrap());
        prop_assert!(ac <= ab + bc + 1e-10);
    }
}

#[test]
fn apply_keeps_leg_order_for_endomorphisms() {
    let mut g = rng(13);
    let psi = random_ket(&[("A", 2), ("B", 3), ("C", 2)], &mut g);
    let u = Operator::new(sig(&[("B", 3)]), sig(&[("B", 3)]), haar_unitary(3, &mut g)).unwrap();
    let out = psi.apply(&u).unwrap();
    assert_eq!(out.signature().labels(), vec!["A", "B", "C"]);
    assert!((out.norm() - 1.0).abs() < 1e-12);
    let back = out.apply(&u.dagger()).unwrap();
    assert!(back.distance(&psi).unwrap() < 1e-12);
    let _ = Signature::empty();
    let _ = Complex64::new(0.0, 0.0);
}
