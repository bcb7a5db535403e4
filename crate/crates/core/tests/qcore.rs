use std::f64::consts::SQRT_2;

use rand::Rng;
use proptest::prelude::*;

use nonlocal::filtering::h_theta;
use nonlocal::qcore::{
    apply_kraus, min_eigenvalue, paulis, tensor, CMatrix, HermitianOperator, KrausMap, PartyDims, C64,
};
use nonlocal::states::{bell_projectors, ginibre, product_pure, random_density, random_vector, seeded_rng};
use nonlocal::Error;

fn random_hermitian(n: usize, seed: u64) -> CMatrix {
    let g = ginibre(n, n, &mut seeded_rng(seed));
    &g + g.adjoint()
}

fn op(dims: PartyDims, m: CMatrix) -> HermitianOperator {
    HermitianOperator::new(dims, m).unwrap()
}

// smallest root of det(X − λI), by sign scan and bisection
fn char_poly_min_root(x: &CMatrix) -> f64 {
    let n = x.nrows();
    let det = |l: f64| (x - CMatrix::identity(n, n) * C64::new(l, 0.0)).determinant().re;
    let bound = (0..n).map(|r| x.row(r).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max) + 1.0;
    let steps = 20_000;
    let h = 2.0 * bound / steps as f64;
    let mut lo = -bound;
    let mut f_lo = det(lo);
    for k in 1..=steps {
        let hi = -bound + h * k as f64;
        let f_hi = det(hi);
        if f_lo == 0.0 {
            return lo;
        }
        if f_lo.signum() != f_hi.signum() {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if det(m).signum() == f_lo.signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            return 0.5 * (a + b);
        }
        lo = hi;
        f_lo = f_hi;
    }
    panic!("no root found");
}

#[test]
fn tensor_of_identities_is_identity() {
    let i2 = CMatrix::identity(2, 2);
    assert_eq!(tensor(&i2, &i2), CMatrix::identity(4, 4));
}

#[test]
fn sigma_x_tensor_is_antidiagonal() {
    let x = &paulis()[1];
    let xx = tensor(x, x);
    for r in 0..4 {
        for c in 0..4 {
            let want = if r + c == 3 { 1.0 } else { 0.0 };
            assert_eq!(xx[(r, c)], C64::new(want, 0.0));
        }
    }
}

#[test]
fn tensor_trace_is_multiplicative() {
    for s in 0..20 {
        let x = random_hermitian(3, s);
        let y = random_hermitian(2, 100 + s);
        let t = tensor(&x, &y).trace();
        assert!((t - x.trace() * y.trace()).norm() < 1e-10);
    }
}

#[test]
fn partial_trace_of_product() {
    let x = random_hermitian(3, 1);
    let y = random_hermitian(2, 2);
    let xy = op(PartyDims::simple(3, 2).unwrap(), tensor(&x, &y));
    let red = xy.partial_trace(&[false, true]).unwrap();
    assert!((red.matrix() - &x * y.trace()).camax() < 1e-12);
}

#[test]
fn bell_marginal_is_maximally_mixed() {
    let pi1 = &bell_projectors()[0].operator;
    let red = pi1.partial_trace(&[false, true]).unwrap();
    assert!((red.matrix() - CMatrix::identity(2, 2) * C64::new(0.5, 0.0)).camax() < 1e-15);
}

#[test]
fn partial_transpose_of_bell_projector() {
    let pt = bell_projectors()[0].operator.partial_transpose();
    assert!((pt.min_eigenvalue().unwrap() + 0.5).abs() < 1e-12);
}

#[test]
fn min_eigenvalue_examples() {
    assert!((min_eigenvalue(&HermitianOperator::identity(PartyDims::qubits())).unwrap() - 1.0).abs() < 1e-15);
    assert!((min_eigenvalue(&h_theta(std::f64::consts::FRAC_PI_4)).unwrap() - (1.0 - SQRT_2)).abs() < 1e-12);
}

#[test]
fn min_eigenvalue_matches_characteristic_polynomial() {
    for s in 0..20 {
        let x = random_hermitian(4, 500 + s);
        let got = op(PartyDims::qubits(), x.clone()).min_eigenvalue().unwrap();
        assert!((got - char_poly_min_root(&x)).abs() < 1e-9, "seed {s}");
    }
}

#[test]
fn constructor_rejects_non_hermitian_and_nan() {
    let mut m = CMatrix::identity(4, 4);
    m[(0, 1)] = C64::new(1e-6, 0.0);
    assert!(matches!(HermitianOperator::new(PartyDims::qubits(), m), Err(Error::NotHermitian(_))));
    let mut m = CMatrix::identity(4, 4);
    m[(2, 2)] = C64::new(f64::NAN, 0.0);
    assert!(HermitianOperator::new(PartyDims::qubits(), m).is_err());
    assert!(HermitianOperator::new(PartyDims::simple(2, 3).unwrap(), CMatrix::identity(4, 4)).is_err());
}

#[test]
fn identity_kraus_pair_is_identity() {
    let rho = random_density(&PartyDims::qubits(), 3);
    let i2 = CMatrix::identity(2, 2);
    let map = KrausMap::new(vec![(i2.clone(), i2)], PartyDims::qubits()).unwrap();
    let out = apply_kraus(&map, &rho).unwrap();
    assert!((out.matrix() - rho.matrix()).camax() < 1e-15);
}

#[test]
fn xx_twirl_keeps_phi1_weight() {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let x = &paulis()[1];
    let i2 = CMatrix::identity(2, 2);
    let map = KrausMap::new(vec![(&i2 * s, i2.clone()), (x * s, x.clone())], PartyDims::qubits()).unwrap();
    let pi1 = bell_projectors()[0].operator.matrix().clone();
    for seed in 0..10 {
        let rho = random_density(&PartyDims::qubits(), seed);
        let out = map.apply(&rho).unwrap();
        assert!((out.expectation(&pi1) - rho.expectation(&pi1)).abs() < 1e-12);
    }
}

#[test]
fn random_separable_maps_preserve_positivity() {
    let mut rng = seeded_rng(77);
    for _ in 0..50 {
        let pairs: Vec<_> = (0..3).map(|_| (ginibre(2, 2, &mut rng), ginibre(3, 2, &mut rng))).collect();
        let map = KrausMap::new(pairs, PartyDims::simple(2, 3).unwrap()).unwrap();
        let rho = random_density(&PartyDims::qubits(), rng.random());
        assert!(map.apply(&rho).unwrap().min_eigenvalue().unwrap() >= -1e-10);
    }
}

#[test]
fn product_state_is_ppt() {
    let mut rng = seeded_rng(4);
    let a = random_vector(3, &mut rng);
    let b = random_vector(2, &mut rng);
    let rho = product_pure(&a, &b).unwrap();
    assert!(rho.ppt_min_eigenvalue().unwrap() >= -1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partial_transpose_is_involution(seed in any::<u64>(), da in 1usize..4, db in 1usize..4) {
        let x = op(PartyDims::simple(da, db).unwrap(), random_hermitian(da * db, seed));
        let back = x.partial_transpose().partial_transpose();
        prop_assert!((back.matrix() - x.matrix()).camax() < 1e-15);
    }

    #[test]
    fn partial_trace_preserves_trace(seed in any::<u64>(), da in 1usize..4, db in 1usize..4, mask in 0u8..4) {
        let x = op(PartyDims::simple(da, db).unwrap(), random_hermitian(da * db, seed));
        let m = [mask & 1 == 1, mask & 2 == 2];
        let red = x.partial_trace(&m).unwrap();
        prop_assert!((red.trace() - x.trace()).abs() < 1e-12 * (1.0 + x.trace().abs()));
    }

    #[test]
    fn eigenvalues_sum_to_trace(seed in any::<u64>(), n in 1usize..7) {
        let x = op(PartyDims::simple(n, 1).unwrap(), random_hermitian(n, seed));
        let s: f64 = x.eigenvalues().unwrap().iter().sum();
        prop_assert!((s - x.trace()).abs() < 1e-10);
    }

    #[test]
    fn random_states_are_states(seed in any::<u64>(), da in 1usize..4, db in 1usize..4) {
        let rho = random_density(&PartyDims::simple(da, db).unwrap(), seed);
        prop_assert!((rho.trace() - 1.0).abs() < 1e-12);
        prop_assert!(rho.min_eigenvalue().unwrap() >= -1e-12);
        let herm = (rho.matrix() - rho.matrix().adjoint()).camax();
        prop_assert!(herm < 1e-12);
    }
}
