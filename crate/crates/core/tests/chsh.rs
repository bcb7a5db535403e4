use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use nalgebra::Matrix3;
use proptest::prelude::*;

use nonlocal::chsh::{
    behavior_from_state, chsh_value, correlation_matrix, correlators, horodecki, optimal_measurements, Behavior,
    Measurement, Relabeling,
};
use nonlocal::optim::NelderMead;
use nonlocal::qcore::{paulis, tensor, CMatrix, HermitianOperator, PartyDims, C64};
use nonlocal::states::{bell_projectors, product_pure, ket, random_density, werner};

fn two_qubit(seed: u64) -> HermitianOperator {
    random_density(&PartyDims::qubits(), seed).into_operator()
}

fn bloch_projector(n: [f64; 3], outcome: usize) -> CMatrix {
    let s = paulis();
    let sign = if outcome == 0 { 1.0 } else { -1.0 };
    let mut m = s[0].clone();
    for k in 0..3 {
        m += &s[k + 1] * C64::new(sign * n[k], 0.0);
    }
    m * C64::new(0.5, 0.0)
}

// Born rule with explicit 4×4 projectors
fn born(rho: &HermitianOperator, m: &Measurement) -> [[[[f64; 2]; 2]; 2]; 2] {
    let mut p = [[[[0.0; 2]; 2]; 2]; 2];
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    let proj = tensor(&bloch_projector(m.alice[x], a), &bloch_projector(m.bob[y], b));
                    p[x][y][a][b] = (rho.matrix() * proj).trace().re;
                }
            }
        }
    }
    p
}

fn pauli_r(rho: &HermitianOperator) -> Matrix3<f64> {
    let s = paulis();
    Matrix3::from_fn(|i, j| (rho.matrix() * tensor(&s[i + 1], &s[j + 1])).trace().re)
}

fn chsh_of(e: [[f64; 2]; 2]) -> f64 {
    let s = [e[0][0], e[0][1], e[1][0], e[1][1]];
    (0..4)
        .map(|k| {
            let t: f64 = s.iter().enumerate().map(|(i, v)| if i == k { -v } else { *v }).sum();
            t.abs()
        })
        .fold(0.0, f64::max)
}

fn sphere(t: f64, f: f64) -> [f64; 3] {
    [t.sin() * f.cos(), t.sin() * f.sin(), t.cos()]
}

#[test]
fn uniform_behavior_examples() {
    let rho = HermitianOperator::identity(PartyDims::qubits()).scaled(0.25);
    let m = Measurement::planar([0.3, 1.1], [2.0, -0.4]);
    let b = behavior_from_state(&rho, &m).unwrap();
    assert!(b.p.iter().flatten().flatten().flatten().all(|&v| (v - 0.25).abs() < 1e-15));
    assert_eq!(correlators(&Behavior::uniform()), [[0.0; 2]; 2]);
    assert_eq!(chsh_value(&Behavior::uniform()).value, 0.0);
}

#[test]
fn bell_state_zz_is_perfectly_correlated() {
    let phi = &bell_projectors()[0].operator;
    let b = behavior_from_state(phi, &Measurement::planar([0.0, 0.0], [0.0, 0.0])).unwrap();
    assert!((b.p[0][0][0][0] + b.p[0][0][1][1] - 1.0).abs() < 1e-15);
}

#[test]
fn behavior_matches_projector_oracle() {
    for s in 0..50u64 {
        let rho = two_qubit(s);
        let f = s as f64;
        let m = Measurement {
            alice: [sphere(0.3 * f, 1.7 * f), sphere(1.1 + f, 0.2 * f)],
            bob: [sphere(2.0 * f, f), sphere(0.7 * f, 3.0 - f)],
        };
        let got = behavior_from_state(&rho, &m).unwrap().p;
        let want = born(&rho, &m);
        for (g, w) in got.iter().flatten().flatten().flatten().zip(want.iter().flatten().flatten().flatten()) {
            assert!((g - w).abs() < 1e-10);
        }
    }
}

#[test]
fn deterministic_correlators_and_chsh() {
    assert_eq!(correlators(&Behavior::deterministic([0, 0], [0, 0])), [[1.0; 2]; 2]);
    for code in 0..16u8 {
        let b = Behavior::deterministic([code & 1, (code >> 1) & 1], [(code >> 2) & 1, (code >> 3) & 1]);
        assert_eq!(chsh_value(&b).value, 2.0);
    }
}

#[test]
fn bell_state_at_standard_angles() {
    let phi = &bell_projectors()[0].operator;
    let m = Measurement::planar([0.0, PI / 2.0], [FRAC_PI_4, -FRAC_PI_4]);
    let c = correlators(&behavior_from_state(phi, &m).unwrap());
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for v in [c[0][0], c[0][1], c[1][0], -c[1][1]] {
        assert!((v - h).abs() < 1e-9, "{c:?}");
    }
    assert!((chsh_value(&born_behavior(phi, &m)).value - 2.0 * SQRT_2).abs() < 1e-9);
}

fn born_behavior(rho: &HermitianOperator, m: &Measurement) -> Behavior {
    Behavior { p: born(rho, m) }
}

#[test]
fn horodecki_examples() {
    let h = horodecki(&bell_projectors()[0].operator).unwrap();
    assert!((h.mu1 - 1.0).abs() < 1e-12 && (h.mu2 - 1.0).abs() < 1e-12);
    assert!((h.chsh_max - 2.0 * SQRT_2).abs() < 1e-12);
    for p in [0.2, 0.7, 0.71, 0.9] {
        let h = horodecki(&werner(p).unwrap()).unwrap();
        assert!((h.mu1 - p).abs() < 1e-12 && (h.mu2 - p).abs() < 1e-12);
        assert_eq!(h.violation, p > 1.0 / SQRT_2);
    }
    let h = horodecki(&product_pure(&ket(2, 0), &ket(2, 0)).unwrap()).unwrap();
    assert!((h.mu1 - 1.0).abs() < 1e-12 && h.mu2.abs() < 1e-12 && !h.violation);
}

#[test]
fn optimal_measurements_close_the_loop() {
    for (rho, want) in [
        (bell_projectors()[0].operator.clone(), 2.0 * SQRT_2),
        (werner(0.8).unwrap().into_operator(), 2.0 * SQRT_2 * 0.8),
    ] {
        let m = optimal_measurements(&rho).unwrap();
        assert!((chsh_value(&born_behavior(&rho, &m)).value - want).abs() < 1e-8);
    }
    let mixed = HermitianOperator::identity(PartyDims::qubits()).scaled(0.25);
    let m = optimal_measurements(&mixed).unwrap();
    assert!(chsh_value(&behavior_from_state(&mixed, &m).unwrap()).value.abs() < 1e-15);
}

#[test]
fn horodecki_matches_closed_loop_on_random_states() {
    for s in 0..200 {
        let rho = two_qubit(1000 + s);
        let h = horodecki(&rho).unwrap();
        let m = optimal_measurements(&rho).unwrap();
        let v = chsh_value(&born_behavior(&rho, &m)).value;
        assert!((v - h.chsh_max).abs() < 1e-7, "seed {s}: {v} vs {}", h.chsh_max);
    }
}

#[test]
fn grid_search_never_beats_horodecki() {
    let grid = 20;
    let angles: Vec<f64> = (0..grid).map(|k| PI * k as f64 / grid as f64).collect();
    for s in 0..200 {
        let rho = two_qubit(5000 + s);
        let r = pauli_r(&rho);
        let bound = horodecki(&rho).unwrap().chsh_max;
        let dir = |t: f64| nalgebra::Vector3::new(t.sin(), 0.0, t.cos());
        let e: Vec<Vec<f64>> = angles
            .iter()
            .map(|&ta| angles.iter().map(|&tb| dir(ta).dot(&(r * dir(tb)))).collect())
            .collect();
        let mut best = (0.0, [0usize; 4]);
        for a0 in 0..grid {
            for a1 in 0..grid {
                for b0 in 0..grid {
                    for b1 in 0..grid {
                        let v = chsh_of([[e[a0][b0], e[a0][b1]], [e[a1][b0], e[a1][b1]]]);
                        if v > best.0 {
                            best = (v, [a0, a1, b0, b1]);
                        }
                    }
                }
            }
        }
        let [a0, a1, b0, b1] = best.1;
        let x0 = [angles[a0], 0.0, angles[a1], 0.0, angles[b0], 0.0, angles[b1], 0.0];
        let settings = |x: &[f64]| Measurement {
            alice: [sphere(x[0], x[1]), sphere(x[2], x[3])],
            bob: [sphere(x[4], x[5]), sphere(x[6], x[7])],
        };
        let nm = NelderMead { max_evals: 3000, ..NelderMead::default() };
        let refined = nm.minimize(|x| -chsh_value(&behavior_from_state(&rho, &settings(x)).unwrap()).value, &x0);
        assert!(best.0 <= bound + 1e-6, "seed {s}");
        assert!(-refined.value <= bound + 1e-6, "seed {s}");
    }
}

#[test]
fn singular_values_are_at_most_one() {
    for s in 0..100 {
        let r = correlation_matrix(&two_qubit(9000 + s)).unwrap();
        assert!(r.singular_values().iter().all(|&v| v <= 1.0 + 1e-9));
        assert!((r - pauli_r(&two_qubit(9000 + s))).abs().max() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chsh_value_is_relabeling_invariant(seed in any::<u64>(), t in prop::array::uniform4(0.0f64..PI)) {
        let rho = two_qubit(seed);
        let b = behavior_from_state(&rho, &Measurement::planar([t[0], t[1]], [t[2], t[3]])).unwrap();
        let v = chsh_value(&b).value;
        for g in Relabeling::all() {
            prop_assert!((chsh_value(&b.relabel(g)).value - v).abs() < 1e-12);
        }
        let (norm, signal) = b.consistency();
        prop_assert!(norm < 1e-10 && signal < 1e-9);
    }
}
