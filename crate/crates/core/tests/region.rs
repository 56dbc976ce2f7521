mod common;

use common::*;
use ratesplit_core::entropy::{coherent_information_ket, hmin_cond};
use ratesplit_core::region::*;
use ratesplit_core::{Channel, Ket, Signature};

fn qmac_channels() -> Vec<(String, Channel)> {
    let random = Channel::random("r", sig(&[("Ap", 2), ("Bp", 2)]), Signature::single("C", 4).unwrap(), 2, &mut rng(11)).unwrap();
    vec![
        ("qmac_product".into(), Channel::builtin("qmac_product", &[0.1, 0.2]).unwrap()),
        ("qmac_adder".into(), Channel::builtin("qmac_adder", &[0.15]).unwrap()),
        ("random".into(), random),
    ]
}

fn unsplit(q: &QmacRegion) -> Ket {
    let control = q.omega.tensor(&q.delta).unwrap();
    q.channel.dilate("E").unwrap().apply_ket(&control).unwrap()
}

fn hmin_of(ket: &Ket, a: &[&str], b: &[&str], eps: f64) -> f64 {
    let mut keep = a.to_vec();
    keep.extend_from_slice(b);
    let eps = if eps < MIN_SMOOTHING { 0.0 } else { eps };
    hmin_cond(&ket.reduced(&keep).unwrap(), a, b, eps).unwrap().lower
}

/// `I_min(A>B)` of a pure state as `H_min(A|rest)`.
fn imin_of(ket: &Ket, a: &[&str], b: &[&str], eps: f64) -> f64 {
    let labels = ket.signature().labels();
    let rest: Vec<&str> = labels.iter().copied().filter(|l| !a.contains(l) && !b.contains(l)).collect();
    hmin_of(ket, a, &rest, eps)
}

#[test]
fn splitting_preserves_the_sum_rate_information() {
    for (name, ch) in qmac_channels() {
        let q = QmacRegion::new(&ch, &name, 0.5, (0.0, 0.0)).unwrap();
        let whole = coherent_information_ket(&unsplit(&q), &["X", "Y"], &["C"]).unwrap();
        for theta in theta_grid(41).unwrap() {
            let s = q.split_state(theta).unwrap();
            let split = coherent_information_ket(&s, &["X0", "X1", "Y"], &["C"]).unwrap();
            assert!((split - whole).abs() <= 1e-9, "{} theta {}: {} vs {}", name, theta, split, whole);
        }
    }
}

#[test]
fn one_shot_points_lie_inside_the_single_letter_pentagon() {
    let grid = theta_grid(5).unwrap();
    for (name, ch) in qmac_channels().into_iter().take(2) {
        let pent = qmac_iid_region(&ch, &name, None, 1, (0.0, 0.0)).unwrap().pentagon.unwrap();
        for eps in [0.5, 0.9] {
            let tr = trace(&QmacRegion::new(&ch, &name, eps, (0.0, 0.0)).unwrap(), &grid).unwrap();
            for p in tr.available_points() {
                let (qa, qb) = (p.rate("Q_A").unwrap(), p.rate("Q_B").unwrap());
                assert!(pent.contains(qa, 0.0, qb, 0.0, CONTAINMENT_TOL), "{} eps {} theta {}", name, eps, p.theta);
            }
            // the signed bounds sit below the pentagon sides as well
            for p in tr.available_points() {
                let a = p.signed_rate("Q_A0").unwrap().max(0.0) + p.signed_rate("Q_A1").unwrap().max(0.0);
                assert!(a <= pent.h_a.min(pent.i_a) + CONTAINMENT_TOL);
                assert!(p.signed_rate("Q_B").unwrap() <= pent.h_b.min(pent.i_b) + CONTAINMENT_TOL);
            }
        }
    }
}

#[test]
fn endpoints_recover_unsplit_ingredients() {
    let (name, ch) = qmac_channels().remove(0);
    let eps = 0.5;
    let q = QmacRegion::new(&ch, &name, eps, (0.0, 0.0)).unwrap();
    let eps0 = q.smoothing0();
    let u = unsplit(&q);
    let h_a = hmin_of(&u, &["X"], &[], eps);
    let tol = 1e-6;

    // θ = 0: the whole message rides on A1
    let at0 = q.ingredients_at(0.0).unwrap();
    let get = |ing: &[Ingredient], n: &str| ing.iter().find(|i| i.name == n).unwrap().value;
    assert!((get(&at0, "hmin(A1)") - h_a).abs() < tol);
    assert!((get(&at0, "imin(A1>CA0B)") - imin_of(&u, &["X"], &["C", "Y"], eps0)).abs() < tol);

    // θ = 1: the whole message rides on A0
    let at1 = q.ingredients_at(1.0).unwrap();
    assert!((get(&at1, "hmin(A0)") - h_a).abs() < tol);
    assert!((get(&at1, "imin(A0>C)") - imin_of(&u, &["X"], &["C"], eps0)).abs() < tol);

    let tr = trace(&q, &[0.0, 1.0]).unwrap();
    let s = tr.corner("S").unwrap();
    let t = tr.corner("T").unwrap();
    for p in tr.available_points() {
        let c = if p.theta == 0.0 { s } else { t };
        for r in ["Q_A", "Q_B"] {
            assert!((p.rate(r).unwrap() - c.rate(r).unwrap()).abs() < tol, "{} at {}", r, p.theta);
        }
    }
}

#[test]
fn point_to_point_endpoints_match_corners() {
    let ch = Channel::builtin("identity", &[]).unwrap();
    let q = P2pRegion::new(&ch, "identity", 0.5, &[0.0, 0.5]).unwrap();
    let tr = trace(&q, &[0.0, 1.0]).unwrap();
    // a noiseless qubit sends one qubit from either endpoint
    assert!((tr.corner("theta1_E0").unwrap().rate("Q_A0").unwrap() - 1.0).abs() < 1e-6);
    for e in ["0", "0.5"] {
        let c0 = tr.corner(&format!("theta0_E{}", e)).unwrap();
        let c1 = tr.corner(&format!("theta1_E{}", e)).unwrap();
        let e: f64 = e.parse().unwrap();
        for p in tr.available_points().filter(|p| p.rate("E_A1") == Some(e)) {
            let c = if p.theta == 0.0 { c0 } else { c1 };
            for r in ["Q_A0", "Q_A1"] {
                assert!((p.rate(r).unwrap() - c.rate(r).unwrap()).abs() < 1e-6, "{} at {}", r, p.theta);
            }
        }
    }
}

fn max_jump(tr: &RegionTrace, branch: &str, key: &str) -> f64 {
    let vals: Vec<f64> = tr.available_points().filter(|p| p.branch == branch).map(|p| p.signed_rate(key).unwrap()).collect();
    vals.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
}

#[test]
fn traces_refine_continuously() {
    let ch = Channel::builtin("qmac_adder", &[0.15]).unwrap();
    let q = QmacRegion::new(&ch, "qmac_adder", 0.5, (0.0, 0.0)).unwrap();
    let window = |n: usize| -> Vec<f64> { (0..=n).map(|k| 0.4 + 0.2 * k as f64 / n as f64).collect() };
    let coarse = trace(&q, &window(2)).unwrap();
    let fine = trace(&q, &window(8)).unwrap();
    for branch in ["A0_conditional", "A1_conditional"] {
        for key in ["Q_A0", "Q_A1"] {
            let (c, f) = (max_jump(&coarse, branch, key), max_jump(&fine, branch, key));
            assert!(f <= c + 1e-7, "{} {}: {} vs {}", branch, key, f, c);
            assert!(f < 0.1, "{} {}: {}", branch, key, f);
        }
    }
}

#[test]
fn zero_crosstalk_without_help_is_the_trivial_rectangle() {
    let ch = Channel::builtin("qic_crosstalk", &[0.0, 0.0]).unwrap();
    let q = QicRegion::new(&ch, "qic", 0.5, &[0.0], &[Direction::AHelpsB, Direction::BHelpsA], (0.0, 0.0)).unwrap();
    let tr = trace(&q, &theta_grid(5).unwrap()).unwrap();
    assert_eq!(tr.points.len(), 10);
    for p in &tr.points {
        let c = tr.corner(&format!("trivial_{}", p.branch)).unwrap();
        for (name, v) in &c.rates {
            assert_eq!(p.rate(name), Some(*v), "{} at {}", name, p.theta);
        }
        assert_eq!(p.rate("Q_0"), Some(0.0));
    }
}

#[test]
fn smoothed_ingredients_grow_with_epsilon() {
    let ch = Channel::builtin("qmac_product", &[0.1, 0.2]).unwrap();
    let at = |eps: f64| QmacRegion::new(&ch, "m", eps, (0.0, 0.0)).unwrap().ingredients_at(0.5).unwrap();
    let runs: Vec<Vec<Ingredient>> = [0.2, 0.5, 0.9].iter().map(|&e| at(e)).collect();
    for name in ["hmin(A1)", "hmin(A0)", "hmin(B)"] {
        let vals: Vec<f64> = runs.iter().map(|r| r.iter().find(|i| i.name == name).unwrap().value).collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0] - 1e-7), "{}: {:?}", name, vals);
        assert!(vals[2] > vals[0], "{}: {:?}", name, vals);
    }
}

#[test]
fn helper_message_boosts_the_helped_receiver() {
    let ch = Channel::builtin("qic_crosstalk", &[0.5, 0.05]).unwrap();
    let q = QicRegion::new(&ch, "qic", 0.9, &[0.1], &[Direction::AHelpsB], (0.0, 0.0)).unwrap();
    let tr = trace(&q, &[1.0]).unwrap();
    let p = &tr.points[0];
    let helped = p.ingredient("imin(B>A0D)").unwrap();
    let alone = p.ingredient("imin(B>D)").unwrap();
    assert!(helped >= alone - 1e-7, "{} vs {}", helped, alone);
}

#[test]
fn identity_wires_pentagon() {
    let ch = Channel::builtin("qmac_product", &[0.0, 0.0]).unwrap();
    for k in [1, 2] {
        let p = qmac_iid_region(&ch, "wires", None, k, (0.0, 0.0)).unwrap().pentagon.unwrap();
        let got = [p.h_a, p.i_a, p.h_b, p.i_b, p.i_sum];
        for (g, w) in got.iter().zip([1.0, 1.0, 1.0, 1.0, 2.0]) {
            assert!((g - w).abs() < 1e-9, "k={} {:?}", k, got);
        }
    }
    let v = pentagon_vertices(&qmac_iid_region(&ch, "wires", None, 1, (0.0, 0.0)).unwrap().pentagon.unwrap(), (0.0, 0.0));
    assert!(v.iter().any(|&(a, b)| (a - 1.0).abs() < 1e-9 && (b - 1.0).abs() < 1e-9));
}

#[test]
fn interference_iid_on_zero_crosstalk() {
    let ch = Channel::builtin("qic_crosstalk", &[0.0, 0.0]).unwrap();
    let tr = qic_iid_region(&ch, "qic", 1, &[0.0, 0.5, 1.0], &[Direction::AHelpsB], (0.0, 0.0)).unwrap();
    for p in &tr.points {
        assert!((p.rate("Q_B").unwrap() - 1.0).abs() < 1e-9);
    }
    // at θ = 0 A1 carries everything; at θ = 1 nothing is left for it
    let a: Vec<f64> = tr.points.iter().map(|p| p.rate("Q_A").unwrap()).collect();
    assert!((a[0] - 1.0).abs() < 1e-9 && a[2].abs() < 1e-9, "{:?}", a);
}

#[test]
fn bad_inputs_are_rejected() {
    let ch = Channel::builtin("identity", &[]).unwrap();
    assert!(QmacRegion::new(&ch, "id", 0.5, (0.0, 0.0)).is_err());
    assert!(P2pRegion::new(&ch, "id", 0.9, &[0.0]).is_err());
    assert!(theta_grid(0).is_err());
    let qmac = Channel::builtin("qmac_product", &[0.0, 0.0]).unwrap();
    assert!(qmac_iid_region(&qmac, "w", None, 3, (0.0, 0.0)).is_err());
}
