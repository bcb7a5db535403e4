use nonlocal::qcore::{tensor, CMatrix, PartyDims, C64};
use nonlocal::states::{
    bell_basis, bell_projectors, ginibre, maximally_entangled, random_density, seeded_rng, werner, StateFile,
};
use nonlocal::Tolerances;
use proptest::prelude::*;

#[test]
fn bell_basis_is_orthonormal_and_complete() {
    let (v, p) = bell_basis();
    for i in 0..4 {
        for j in 0..4 {
            let ip = v[i].dotc(&v[j]);
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((ip - C64::new(want, 0.0)).norm() < 1e-15);
        }
    }
    let sum = p.iter().fold(CMatrix::zeros(4, 4), |acc, q| acc + q.operator.matrix());
    assert!((sum - CMatrix::identity(4, 4)).camax() < 1e-15);
    for q in &p {
        let m = q.operator.matrix();
        assert!((m * m - m).camax() < 1e-15);
        assert!((q.operator.trace() - 1.0).abs() < 1e-15);
    }
}

#[test]
fn bell_order_matches_convention() {
    // Φ1,2 = (|00⟩ ± |11⟩)/√2, Φ3,4 = (|01⟩ ± |10⟩)/√2
    let (v, _) = bell_basis();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let want = [[h, 0.0, 0.0, h], [h, 0.0, 0.0, -h], [0.0, h, h, 0.0], [0.0, h, -h, 0.0]];
    for (vi, wi) in v.iter().zip(want) {
        for k in 0..4 {
            assert!((vi[k] - C64::new(wi[k], 0.0)).norm() < 1e-15);
        }
    }
}

#[test]
fn werner_endpoints() {
    let one = werner(1.0).unwrap();
    assert!((one.matrix() - bell_projectors()[0].operator.matrix()).camax() < 1e-15);
    let zero = werner(0.0).unwrap();
    assert!((zero.matrix() - CMatrix::identity(4, 4) * C64::new(0.25, 0.0)).camax() < 1e-15);
    assert!(werner(1.2).is_err());
}

#[test]
fn werner_ppt_boundary_at_one_third() {
    let ppt = |p: f64| werner(p).unwrap().ppt_min_eigenvalue().unwrap();
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ppt(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo - 1.0 / 3.0).abs() < 1e-9, "{lo}");
}

#[test]
fn maximally_entangled_examples() {
    let phi = maximally_entangled(2).unwrap();
    assert!((&phi - &bell_basis().0[0]).norm() < 1e-15);
    for d in 2..5 {
        let phi = maximally_entangled(d).unwrap();
        let mut rng = seeded_rng(d as u64);
        let m = ginibre(d, d, &mut rng);
        let lhs = phi.dotc(&(tensor(&m, &CMatrix::identity(d, d)) * &phi));
        assert!((lhs - m.trace() / C64::new(d as f64, 0.0)).norm() < 1e-10);
    }
}

#[test]
fn different_seeds_differ() {
    let a = random_density(&PartyDims::qubits(), 1);
    let b = random_density(&PartyDims::qubits(), 2);
    assert!((a.matrix() - b.matrix()).camax() > 1e-3);
}

#[test]
fn truncated_file_is_rejected() {
    let text = StateFile::from_density(&werner(0.5).unwrap(), "w").to_json().unwrap();
    assert!(StateFile::from_json(&text[..text.len() / 2]).is_err());
}

#[test]
fn unnormalized_flag_is_honoured() {
    let mut f = StateFile::from_operator(&bell_projectors()[0].operator.scaled(2.0), false, "2 pi");
    assert!(f.to_density(&Tolerances::default()).is_ok());
    f.normalized = true;
    assert!(f.to_density(&Tolerances::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn state_file_round_trip_is_bit_exact(seed in any::<u64>(), da in 1usize..4, db in 1usize..4) {
        let rho = random_density(&PartyDims::simple(da, db).unwrap(), seed);
        let text = StateFile::from_density(&rho, "r").to_json().unwrap();
        let back = StateFile::from_json(&text).unwrap().to_density(&Tolerances::default()).unwrap();
        for (x, y) in rho.matrix().iter().zip(back.matrix().iter()) {
            prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
            prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }

    #[test]
    fn werner_is_a_state(p in 0.0f64..=1.0) {
        let w = werner(p).unwrap();
        prop_assert!((w.trace() - 1.0).abs() < 1e-12);
        prop_assert!(w.min_eigenvalue().unwrap() >= -1e-12);
    }
}
