//! Activation of CHSH violation by a local-realistic ancilla.
//!
//! For an entangled `σ` on `H_A ⊗ H_B` the ancilla lives on
//! `(H_{A'} ⊗ C²) ⊗ (H_{B'} ⊗ C²)` with `H_{A'} = H_A`, `H_{B'} = H_B`. The fixed
//! filters `Ã = |Φ_{A'A}⟩ ⊗ I_{A''}` and `B̃` (with normalized maximally
//! entangled `Φ`) reduce the witness on `ρ ⊗ σ` to
//! `ν · tr[ρ (σᵀ ⊗ H_{π/4})]`, so an ancilla making that trace negative
//! activates `σ`. The search runs over PPT ancillas, which never violate CHSH
//! even after local filtering.
//!
//! Factor layout of `ρ ⊗ σ`: Alice `(A', A'', A)`, Bob `(B', B'', B)`.

mod ppt;

pub use ppt::{ppt_cone_minimize, PptSolution, PptSolverConfig};

use std::f64::consts::FRAC_PI_4;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chsh::{behavior_from_state, chsh_value, horodecki, optimal_measurements, Behavior, ChshValue, Horodecki, Measurement};
use crate::error::{Error, Result};
use crate::filtering::{filtered_chsh, h_theta, search_c_membership, witness_value, SearchConfig, SearchStatus, WitnessInstance};
use crate::qcore::{eigh, CMatrix, DensityOperator, HermitianOperator, PartyDims, C64};
use crate::states::{random_density_with, seeded_rng, StateFile};
use crate::tolerance::{Tolerances, CERT_EPS};

/// CHSH value the end-to-end check must exceed `2` by.
pub const END_TO_END_MARGIN: f64 = 1e-6;

/// `(Ã, B̃)` for a `dim_a × dim_b` state. Each maps `C²` into
/// `H_{A'} ⊗ C² ⊗ H_A` with `Ã^†Ã = I₂`.
pub fn tilde_filters(dim_a: usize, dim_b: usize) -> (CMatrix, CMatrix) {
    (tilde(dim_a), tilde(dim_b))
}

fn tilde(d: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d * 2 * d, 2);
    let amp = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    for j in 0..d {
        for k in 0..2 {
            m[(j * 2 * d + k * d + j, k)] = amp;
        }
    }
    m
}

/// The witness for the whole protocol: `(Ã, B̃)` at `θ = π/4`.
pub fn tilde_witness(dim_a: usize, dim_b: usize) -> WitnessInstance {
    let (a, b) = tilde_filters(dim_a, dim_b);
    WitnessInstance { a, b, theta: FRAC_PI_4 }
}

fn flat(sigma: &HermitianOperator) -> HermitianOperator {
    sigma.with_dims(sigma.dims().flattened()).expect("same total dimension")
}

/// Ancilla party dimensions `([d_A, 2], [d_B, 2])`.
pub fn ancilla_dims(dim_a: usize, dim_b: usize) -> PartyDims {
    PartyDims::new(vec![dim_a, 2], vec![dim_b, 2]).expect("positive dimensions")
}

/// `σᵀ ⊗ H_{π/4}` on the ancilla space, `σᵀ` on `A'B'` and `H` on `A''B''`.
pub fn reduced_witness(sigma: &HermitianOperator) -> HermitianOperator {
    flat(sigma).transpose().bipartite_tensor(&h_theta(FRAC_PI_4))
}

/// `ρ ⊗ σ` with Alice's factors `(A', A'', A)` and Bob's `(B', B'', B)`.
pub fn combined_state(rho: &HermitianOperator, sigma: &HermitianOperator) -> HermitianOperator {
    flat_ancilla(rho).bipartite_tensor(&flat(sigma))
}

fn flat_ancilla(rho: &HermitianOperator) -> HermitianOperator {
    let d = rho.dims();
    if d.alice().len() == 2 && d.bob().len() == 2 {
        rho.clone()
    } else {
        rho.with_dims(ancilla_dims(d.dim_a() / 2, d.dim_b() / 2)).expect("even party dimensions")
    }
}

fn check_ancilla(rho: &HermitianOperator, sigma: &HermitianOperator) -> Result<()> {
    let (da, db) = (sigma.dims().dim_a(), sigma.dims().dim_b());
    if rho.dims().dim_a() != 2 * da || rho.dims().dim_b() != 2 * db {
        return Err(Error::Dimension(format!(
            "ancilla is {}x{}, expected {}x{} for a {}x{} state",
            rho.dims().dim_a(),
            rho.dims().dim_b(),
            2 * da,
            2 * db,
            da,
            db
        )));
    }
    Ok(())
}

/// `tr[(ρ⊗σ)(Ã⊗B̃) H_{π/4} (Ã⊗B̃)^†]`, evaluated on the full space.
pub fn full_witness_value(rho: &HermitianOperator, sigma: &HermitianOperator) -> Result<f64> {
    check_ancilla(rho, sigma)?;
    let (da, db) = (sigma.dims().dim_a(), sigma.dims().dim_b());
    witness_value(&combined_state(rho, sigma), &tilde_witness(da, db))
}

/// `tr[ρ (σᵀ ⊗ H_{π/4})]`.
pub fn reduced_objective(rho: &HermitianOperator, sigma: &HermitianOperator) -> Result<f64> {
    check_ancilla(rho, sigma)?;
    Ok(rho.expectation(reduced_witness(sigma).matrix()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuFit {
    pub nu: f64,
    /// Largest `|full − ν · reduced|` over the sample.
    pub residual: f64,
    pub pairs: usize,
}

/// Fits the single scalar linking the full witness on `ρ⊗σ` to the reduced
/// one, over random state pairs.
pub fn measure_nu(dim_a: usize, dim_b: usize, pairs: usize, seed: u64) -> Result<NuFit> {
    let mut rng = seeded_rng(seed);
    let sdims = PartyDims::simple(dim_a, dim_b)?;
    let adims = ancilla_dims(dim_a, dim_b);
    let mut samples = Vec::with_capacity(pairs);
    for _ in 0..pairs.max(1) {
        let rho = random_density_with(&adims, &mut rng);
        let sigma = random_density_with(&sdims, &mut rng);
        samples.push((full_witness_value(&rho, &sigma)?, reduced_objective(&rho, &sigma)?));
    }
    let (num, den) = samples.iter().fold((0.0, 0.0), |(n, d), (f, r)| (n + f * r, d + r * r));
    if !(den > 0.0) {
        return Err(Error::ZeroNormalization(den));
    }
    let nu = num / den;
    let residual = samples.iter().map(|(f, r)| (f - nu * r).abs()).fold(0.0, f64::max);
    Ok(NuFit {
        nu,
        residual,
        pairs: samples.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AncillaMembership {
    /// The ancilla is PPT, hence undistillable and local under filtering.
    PptCertified,
    /// Only a finite filter search failed to make the ancilla violate CHSH.
    HeuristicOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActivationStatus {
    PptCertified,
    HeuristicOnly,
    NotFound,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EndToEnd {
    /// Normalized two-qubit state after `(Ã, B̃)` act on `ρ⊗σ`.
    pub filtered_state: StateFile,
    pub success_probability: f64,
    pub horodecki: Horodecki,
    pub measurements: Measurement,
    pub behavior: Behavior,
    pub chsh: ChshValue,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Corroboration {
    pub status: SearchStatus,
    pub best_value: f64,
    pub restarts: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ActivationCertificate {
    pub sigma: StateFile,
    pub ancilla: StateFile,
    /// `tr[ρ (σᵀ ⊗ H_{π/4})]`.
    pub objective: f64,
    pub nu: f64,
    pub ancilla_membership: AncillaMembership,
    pub ancilla_ppt_min_eigenvalue: f64,
    pub corroboration: Corroboration,
    pub end_to_end: EndToEnd,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ActivationReport {
    pub status: ActivationStatus,
    /// Best value of the reduced objective over PPT ancillas.
    pub ppt_objective: f64,
    pub solver_iterations: usize,
    pub solver_converged: bool,
    /// Best feasible objective at each solver checkpoint.
    pub objective_trace: Vec<f64>,
    pub nu: NuFit,
    pub fallback_candidates: usize,
    pub certificate: Option<ActivationCertificate>,
    pub reason: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationConfig {
    pub solver: PptSolverConfig,
    pub seed: u64,
    /// Restarts of the filter search run on a PPT ancilla as a cross-check.
    pub corroboration_restarts: usize,
    /// Candidates tried by the heuristic fallback.
    pub fallback_candidates: usize,
    /// Restarts of the filter search screening each fallback candidate.
    pub fallback_restarts: usize,
    pub tolerances: Tolerances,
}

impl Default for ActivationConfig {
    fn default() -> Self {
        Self {
            solver: PptSolverConfig::default(),
            seed: 0,
            corroboration_restarts: 8,
            fallback_candidates: 24,
            fallback_restarts: 16,
            tolerances: Tolerances::default(),
        }
    }
}

/// Filters `ρ⊗σ` with `(Ã, B̃)` and measures the result at its Horodecki-optimal settings.
pub fn end_to_end(rho: &HermitianOperator, sigma: &HermitianOperator) -> Result<EndToEnd> {
    check_ancilla(rho, sigma)?;
    let (a, b) = tilde_filters(sigma.dims().dim_a(), sigma.dims().dim_b());
    let f = filtered_chsh(&combined_state(rho, sigma), &a, &b)?;
    let measurements = optimal_measurements(&f.state)?;
    let behavior = behavior_from_state(&f.state, &measurements)?;
    Ok(EndToEnd {
        filtered_state: StateFile::from_density(&f.state, "filtered"),
        success_probability: f.success_probability,
        horodecki: f.horodecki,
        measurements,
        chsh: chsh_value(&behavior),
        behavior,
    })
}

fn assemble(
    sigma: &DensityOperator,
    rho: &DensityOperator,
    nu: f64,
    membership: AncillaMembership,
    corroboration: Corroboration,
) -> Result<std::result::Result<ActivationCertificate, String>> {
    let objective = reduced_objective(rho, sigma)?;
    let e2e = end_to_end(rho, sigma)?;
    if e2e.chsh.value <= 2.0 + END_TO_END_MARGIN {
        return Ok(Err(format!(
            "objective {objective:e} is negative but the filtered CHSH value {} does not clear 2 by {END_TO_END_MARGIN:e}",
            e2e.chsh.value
        )));
    }
    Ok(Ok(ActivationCertificate {
        sigma: StateFile::from_density(sigma, "sigma"),
        ancilla: StateFile::from_density(rho, "ancilla"),
        objective,
        nu,
        ancilla_membership: membership,
        ancilla_ppt_min_eigenvalue: rho.ppt_min_eigenvalue()?,
        corroboration,
        end_to_end: e2e,
    }))
}

fn corroborate(rho: &HermitianOperator, restarts: usize, seed: u64) -> Result<Corroboration> {
    let report = search_c_membership(
        rho,
        &SearchConfig {
            restarts,
            seed,
            ..Default::default()
        },
    )?;
    Ok(Corroboration {
        status: report.status,
        best_value: report.best_value,
        restarts,
        seed,
    })
}

/// Candidate ancillas for the fallback, ordered by reduced objective: the
/// witness ground state mixed with white noise and with random states.
fn fallback_candidates(w: &HermitianOperator, count: usize, seed: u64) -> Result<Vec<(f64, DensityOperator)>> {
    let (values, vectors) = eigh(w.matrix())?;
    let n = w.dim();
    let g = vectors.column(0).into_owned();
    let ground = &g * g.adjoint();
    let noise = CMatrix::identity(n, n) / C64::new(n as f64, 0.0);
    let mut rng = seeded_rng(seed);
    let mut out = Vec::new();
    let mean = w.trace() / n as f64;
    let lam = values[0];
    // mixing weight of white noise at which the objective reaches zero
    let t_zero = if mean > lam { (-lam / (mean - lam)).clamp(0.0, 1.0) } else { 0.0 };
    for k in 0..count {
        let t = t_zero * (k as f64 + 0.5) / count as f64;
        let m = if k % 2 == 0 {
            &ground * C64::new(1.0 - t, 0.0) + &noise * C64::new(t, 0.0)
        } else {
            let r = random_density_with(w.dims(), &mut rng);
            let s: f64 = rng.random::<f64>() * t;
            &ground * C64::new(1.0 - t, 0.0) + &noise * C64::new(t - s, 0.0) + r.matrix() * C64::new(s, 0.0)
        };
        let rho = DensityOperator::from_trusted(HermitianOperator::new(w.dims().clone(), m)?);
        let value = rho.expectation(w.matrix());
        if value < -CERT_EPS {
            out.push((value, rho));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Runs the full pipeline: PPT-cone minimization, certificate assembly with
/// an end-to-end CHSH check, and a heuristic fallback when no PPT ancilla works.
pub fn activate(sigma: &DensityOperator, cfg: &ActivationConfig) -> Result<ActivationReport> {
    if !sigma.is_normalized() || (sigma.trace() - 1.0).abs() > cfg.tolerances.trace {
        return Err(Error::NotNormalized(sigma.trace()));
    }
    let sigma = DensityOperator::from_trusted(flat(sigma));
    let (da, db) = (sigma.dims().dim_a(), sigma.dims().dim_b());
    let nu = measure_nu(da, db, 50, cfg.seed)?;
    let w = reduced_witness(&sigma);
    let sol = ppt_cone_minimize(&w, &cfg.solver)?;

    let mut report = ActivationReport {
        status: ActivationStatus::NotFound,
        ppt_objective: sol.objective,
        solver_iterations: sol.iterations,
        solver_converged: sol.converged,
        objective_trace: sol.trace.clone(),
        nu,
        fallback_candidates: 0,
        certificate: None,
        reason: None,
    };

    if sol.objective < -CERT_EPS {
        let corroboration = corroborate(&sol.rho, cfg.corroboration_restarts, cfg.seed)?;
        match assemble(&sigma, &sol.rho, nu.nu, AncillaMembership::PptCertified, corroboration)? {
            Ok(cert) => {
                report.status = ActivationStatus::PptCertified;
                report.certificate = Some(cert);
                return Ok(report);
            }
            Err(reason) => report.reason = Some(reason),
        }
    }

    let sigma_ppt = sigma.is_ppt(&cfg.tolerances)?;
    if sigma_ppt && da * db <= 6 {
        report.reason.get_or_insert_with(|| {
            format!(
                "PPT objective {:e} is not negative and sigma is PPT in dimension {da}x{db}, hence separable",
                sol.objective
            )
        });
        return Ok(report);
    }

    let candidates = fallback_candidates(&w, cfg.fallback_candidates, cfg.seed)?;
    report.fallback_candidates = candidates.len();
    for (k, (_, rho)) in candidates.iter().enumerate() {
        let screen = corroborate(rho, cfg.fallback_restarts, cfg.seed.wrapping_add(k as u64))?;
        if screen.status != SearchStatus::NoViolationFound {
            continue;
        }
        if let Ok(cert) = assemble(&sigma, rho, nu.nu, AncillaMembership::HeuristicOnly, screen)? {
            report.status = ActivationStatus::HeuristicOnly;
            report.certificate = Some(cert);
            report.reason = None;
            return Ok(report);
        }
    }
    report.reason.get_or_insert_with(|| {
        format!(
            "PPT objective {:e} is not negative and none of {} fallback candidates passed screening",
            sol.objective,
            candidates.len()
        )
    });
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub passed: bool,
    pub objective: f64,
    pub objective_error: f64,
    pub ancilla_ppt_min_eigenvalue: f64,
    pub ancilla_min_eigenvalue: f64,
    pub chsh_value: f64,
    pub failures: Vec<String>,
}

/// Re-derives every claim of a certificate from its embedded states.
pub fn verify_certificate(cert: &ActivationCertificate, tol: &Tolerances) -> Result<CertificateCheck> {
    let sigma = cert.sigma.to_density(tol)?;
    let rho = cert.ancilla.to_density(tol)?;
    let objective = reduced_objective(&rho, &sigma)?;
    let objective_error = (objective - cert.objective).abs();
    let ppt = rho.ppt_min_eigenvalue()?;
    let psd = rho.min_eigenvalue()?;
    let e2e = end_to_end(&rho, &sigma)?;
    let stored = chsh_value(&cert.end_to_end.behavior).value;
    let fresh_h = horodecki(&cert.end_to_end.filtered_state.to_operator()?)?;

    let mut failures = Vec::new();
    if objective_error > 1e-10 {
        failures.push(format!("objective differs from stored value by {objective_error:e}"));
    }
    if objective >= -CERT_EPS {
        failures.push(format!("objective {objective:e} is not below -{CERT_EPS:e}"));
    }
    if cert.ancilla_membership == AncillaMembership::PptCertified && ppt < -tol.psd {
        failures.push(format!("ancilla partial transpose has eigenvalue {ppt:e}"));
    }
    if e2e.chsh.value <= 2.0 + END_TO_END_MARGIN {
        failures.push(format!("recomputed CHSH value {} does not exceed 2", e2e.chsh.value));
    }
    if stored <= 2.0 + END_TO_END_MARGIN {
        failures.push(format!("stored behavior has CHSH value {stored}"));
    }
    if (fresh_h.chsh_max - e2e.horodecki.chsh_max).abs() > tol.eq {
        failures.push("stored filtered state does not match the recomputed one".into());
    }
    Ok(CertificateCheck {
        passed: failures.is_empty(),
        objective,
        objective_error,
        ancilla_ppt_min_eigenvalue: ppt,
        ancilla_min_eigenvalue: psd,
        chsh_value: e2e.chsh.value,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{bell_projectors, werner};

    #[test]
    fn tilde_filter_shape() {
        let (a, b) = tilde_filters(2, 3);
        assert_eq!((a.nrows(), a.ncols()), (8, 2));
        assert_eq!((b.nrows(), b.ncols()), (18, 2));
        assert_eq!(a.iter().filter(|z| z.norm() > 0.0).count(), 4);
        let g = a.adjoint() * &a;
        assert!((g - CMatrix::identity(2, 2)).camax() < 1e-15);
    }

    #[test]
    fn reduced_witness_trace_and_floor() {
        let s = werner(0.6).unwrap();
        let w = reduced_witness(&s);
        assert!((w.trace() - 4.0).abs() < 1e-12);
        let want = s.max_eigenvalue().unwrap() * (1.0 - 2f64.sqrt());
        assert!((w.min_eigenvalue().unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn nu_is_inverse_dimension_product() {
        let fit = measure_nu(2, 2, 10, 7).unwrap();
        assert!((fit.nu - 0.25).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn bell_state_activates_trivially() {
        let sigma = DensityOperator::from_trusted(bell_projectors()[0].operator.clone());
        let r = activate(&sigma, &ActivationConfig::default()).unwrap();
        assert_eq!(r.status, ActivationStatus::PptCertified);
        let cert = r.certificate.unwrap();
        let check = verify_certificate(&cert, &Tolerances::default()).unwrap();
        assert!(check.passed, "{:?}", check.failures);
    }
}
