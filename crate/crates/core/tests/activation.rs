use std::f64::consts::SQRT_2;


use nonlocal::activation::{
    activate, ancilla_dims, ppt_cone_minimize, PptSolverConfig, full_witness_value, measure_nu, reduced_objective, reduced_witness, tilde_filters,
    verify_certificate, ActivationConfig, ActivationReport, ActivationStatus, AncillaMembership,
};
use nonlocal::filtering::h_theta;
use nonlocal::qcore::{CMatrix, DensityOperator, HermitianOperator, PartyDims, C64};
use nonlocal::states::{bell_projectors, random_density, random_separable, werner};
use nonlocal::Tolerances;

// full witness written as an explicit index contraction: the filters pick
// a' = a, b' = b and leave (a'', b'') as the two-qubit output
fn contracted_witness(rho: &HermitianOperator, sigma: &HermitianOperator) -> f64 {
    let (da, db) = (sigma.dims().dim_a(), sigma.dims().dim_b());
    let bob = 2 * db;
    let ri = |j: usize, k: usize, m: usize, l: usize| (j * 2 + k) * bob + m * 2 + l;
    let si = |j: usize, m: usize| j * db + m;
    let (r, s) = (rho.matrix(), sigma.matrix());
    let mut tau = CMatrix::zeros(4, 4);
    for k in 0..2 {
        for l in 0..2 {
            for k2 in 0..2 {
                for l2 in 0..2 {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..da {
                        for m in 0..db {
                            for j2 in 0..da {
                                for m2 in 0..db {
                                    acc += r[(ri(j, k, m, l), ri(j2, k2, m2, l2))] * s[(si(j, m), si(j2, m2))];
                                }
                            }
                        }
                    }
                    tau[(k * 2 + l, k2 * 2 + l2)] = acc / C64::new((da * db) as f64, 0.0);
                }
            }
        }
    }
    (tau * h_theta(std::f64::consts::FRAC_PI_4).matrix()).trace().re
}

#[test]
fn tilde_filters_structure() {
    let (a, b) = tilde_filters(2, 2);
    assert_eq!((a.nrows(), a.ncols()), (8, 2));
    let nz: Vec<_> = a.iter().filter(|z| z.norm() > 0.0).collect();
    assert_eq!(nz.len(), 4);
    assert!(nz.iter().all(|z| (z.norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15));
    for d in 1..5 {
        let (a, _) = tilde_filters(d, 1);
        let g = a.adjoint() * &a;
        assert!(g[(0, 1)].norm() < 1e-15);
        assert!((g - CMatrix::identity(2, 2)).camax() < 1e-14);
    }
    assert_eq!(b.nrows(), 8);
    assert_eq!(ancilla_dims(2, 3).total(), 4 * 6);
}

#[test]
fn reduced_witness_trace_and_floor() {
    for s in 0..10 {
        let sigma = random_density(&PartyDims::simple(2, 1 + s as usize % 3).unwrap(), s);
        let w = reduced_witness(&sigma);
        assert!((w.trace() - 4.0).abs() < 1e-12);
        let floor = sigma.max_eigenvalue().unwrap() * (1.0 - SQRT_2);
        assert!((w.min_eigenvalue().unwrap() - floor).abs() < 1e-12);
    }
}

#[test]
fn nu_identity_against_index_oracle() {
    for s in 0..50 {
        let (da, db) = (2, 2);
        let sigma = random_density(&PartyDims::simple(da, db).unwrap(), 100 + s);
        let rho = random_density(&ancilla_dims(da, db), 200 + s);
        let full = full_witness_value(&rho, &sigma).unwrap();
        let reduced = reduced_objective(&rho, &sigma).unwrap();
        assert!((full - contracted_witness(&rho, &sigma)).abs() < 1e-12);
        assert!((full - reduced / 4.0).abs() < 1e-12);
    }
    let (da, db) = (3, 2);
    let sigma = random_density(&PartyDims::simple(da, db).unwrap(), 7);
    let rho = random_density(&ancilla_dims(da, db), 8);
    let full = full_witness_value(&rho, &sigma).unwrap();
    assert!((full - contracted_witness(&rho, &sigma)).abs() < 1e-12);
    assert!((full - reduced_objective(&rho, &sigma).unwrap() / 6.0).abs() < 1e-12);
}

#[test]
fn measured_nu_is_inverse_dimension() {
    for (da, db) in [(2, 2), (2, 3)] {
        let fit = measure_nu(da, db, 50, 11).unwrap();
        assert!((fit.nu - 1.0 / (da * db) as f64).abs() < 1e-10);
        assert!(fit.residual < 1e-10);
    }
}

#[test]
fn ppt_solver_examples() {
    let cfg = PptSolverConfig::default();
    let id = HermitianOperator::identity(ancilla_dims(2, 2));
    assert!((ppt_cone_minimize(&id, &cfg).unwrap().objective - 1.0).abs() < 1e-12);

    // diagonal witness: its ground state is a product basis state
    let diag: Vec<C64> = (0..16).map(|k| C64::new(((7 * k) % 16) as f64 - 5.5, 0.0)).collect();
    let w = HermitianOperator::new(ancilla_dims(2, 2), CMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))).unwrap();
    let sol = ppt_cone_minimize(&w, &cfg).unwrap();
    assert!((sol.objective - w.min_eigenvalue().unwrap()).abs() < 1e-7);
}

#[test]
fn separable_sigma_gives_nonnegative_objective() {
    let cfg = PptSolverConfig::default();
    for s in 0..8 {
        let sigma = random_separable(2, 2, 4, 60 + s).unwrap();
        let w = reduced_witness(&sigma);
        let sol = ppt_cone_minimize(&w, &cfg).unwrap();
        assert!(sol.objective >= -1e-7, "seed {s}: {}", sol.objective);
        assert!(sol.dual_bound <= sol.objective);
        assert!(sol.trace.windows(2).all(|p| p[1] <= p[0]));
        let rho = &sol.rho;
        assert!(rho.min_eigenvalue().unwrap() >= -1e-12 && rho.ppt_min_eigenvalue().unwrap() >= -1e-12);
        // random separable ancillas never beat the solver
        for k in 0..10 {
            let probe = random_separable(4, 4, 3, 1000 * s + k).unwrap();
            assert!(probe.expectation(w.matrix()) >= sol.objective - 1e-9);
        }
    }
}

#[test]
fn npt_sigma_objective_sits_above_unconstrained_bound() {
    let sigma = werner(0.7).unwrap();
    let w = reduced_witness(&sigma);
    let sol = ppt_cone_minimize(&w, &PptSolverConfig::default()).unwrap();
    assert!(sol.objective >= sigma.max_eigenvalue().unwrap() * (1.0 - SQRT_2) - 1e-12);
    assert!(sol.objective < -1e-9);
}

#[test]
fn separable_werner_is_not_activated() {
    let r = activate(&werner(0.2).unwrap(), &ActivationConfig::default()).unwrap();
    assert_eq!(r.status, ActivationStatus::NotFound);
    assert!(r.ppt_objective >= -1e-7);
    assert!(r.certificate.is_none() && r.reason.is_some());
}

#[test]
fn bell_state_certificate_survives_serialization() {
    let sigma = DensityOperator::new(bell_projectors()[0].operator.clone(), &Tolerances::default()).unwrap();
    let r = activate(&sigma, &ActivationConfig::default()).unwrap();
    assert_eq!(r.status, ActivationStatus::PptCertified);
    let text = serde_json::to_string(&r).unwrap();
    let back: ActivationReport = serde_json::from_str(&text).unwrap();
    let cert = back.certificate.unwrap();
    assert_eq!(cert.ancilla_membership, AncillaMembership::PptCertified);
    assert!(cert.end_to_end.chsh.value >= 2.0 * SQRT_2 - 1e-6);
    let check = verify_certificate(&cert, &Tolerances::default()).unwrap();
    assert!(check.passed, "{:?}", check.failures);

    let mut forged = cert.clone();
    forged.objective -= 1e-6;
    assert!(!verify_certificate(&forged, &Tolerances::default()).unwrap().passed);
}
