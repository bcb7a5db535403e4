//! Witnesses for CHSH violation after local filtering.
//!
//! A state is outside the set of states that never violate CHSH under
//! stochastic local operations exactly when some filter pair `A: C² → H_A`,
//! `B: C² → H_B` and angle `θ ∈ [0, π/4]` give
//! `tr[ρ (A⊗B) H_θ (A⊗B)^†] < 0`, with
//! `H_θ = I⊗I − cos θ σx⊗σx − sin θ σz⊗σz`.
//!
//! The search never treats `θ` as a free variable: for fixed filters the
//! filtered two-qubit state's correlation matrix fixes the best local frame and
//! `θ = atan2(μ2, μ1)`, so minimizing the witness and maximizing the filtered
//! CHSH value are the same problem.

use std::f64::consts::FRAC_PI_4;

use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chsh::{diagonalizing_unitaries, horodecki, Horodecki};
use crate::error::{Error, Result};
use crate::optim::NelderMead;
use crate::qcore::{operator_norm, paulis, tensor, CMatrix, DensityOperator, HermitianOperator, PartyDims, C64};
use crate::states::ginibre;
use crate::tolerance::CERT_EPS;

/// `I⊗I − cos θ σx⊗σx − sin θ σz⊗σz`.
pub fn h_theta(theta: f64) -> HermitianOperator {
    let [i, x, _, z] = paulis();
    let m = tensor(&i, &i) - tensor(&x, &x) * C64::new(theta.cos(), 0.0) - tensor(&z, &z) * C64::new(theta.sin(), 0.0);
    HermitianOperator::from_hermitian(PartyDims::qubits(), m)
}

/// `θ ∈ [0, π/4]` maximizing `μ1 cos θ + μ2 sin θ`.
pub fn optimal_theta(mu1: f64, mu2: f64) -> f64 {
    mu2.atan2(mu1).clamp(0.0, FRAC_PI_4)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessInstance {
    /// `dim_A × 2`.
    #[serde(with = "crate::serde_util::complex_matrix")]
    pub a: CMatrix,
    /// `dim_B × 2`.
    #[serde(with = "crate::serde_util::complex_matrix")]
    pub b: CMatrix,
    pub theta: f64,
}

impl WitnessInstance {
    pub fn new(a: CMatrix, b: CMatrix, theta: f64) -> Result<Self> {
        if a.ncols() != 2 || b.ncols() != 2 {
            return Err(Error::Dimension(format!(
                "filters must map C^2 into each party, got {}x{} and {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(Self { a, b, theta })
    }

    /// `(A⊗B) H_θ (A⊗B)^†` on the filtered party dimensions.
    pub fn operator(&self) -> HermitianOperator {
        let k = tensor(&self.a, &self.b);
        let dims = PartyDims::simple(self.a.nrows(), self.b.nrows()).expect("non-empty filters");
        h_theta(self.theta).conjugate(&k, dims).expect("shapes agree")
    }

    /// Both filters have rank two.
    pub fn full_rank(&self) -> bool {
        column_rank_two(&self.a) && column_rank_two(&self.b)
    }

    /// Rescales both filters to unit operator norm.
    pub fn normalized(&self) -> Self {
        let na = operator_norm(&self.a);
        let nb = operator_norm(&self.b);
        let scale = |m: &CMatrix, n: f64| if n > 0.0 { m / C64::new(n, 0.0) } else { m.clone() };
        Self {
            a: scale(&self.a, na),
            b: scale(&self.b, nb),
            theta: self.theta,
        }
    }
}

fn column_rank_two(m: &CMatrix) -> bool {
    let s = m.clone().singular_values();
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    m.nrows() >= 2 && max > 0.0 && min > 1e-9 * max
}

fn check_filter_dims(rho: &HermitianOperator, a: &CMatrix, b: &CMatrix) -> Result<()> {
    let d = rho.dims();
    if a.nrows() != d.dim_a() || b.nrows() != d.dim_b() || a.ncols() != 2 || b.ncols() != 2 {
        return Err(Error::Dimension(format!(
            "filters {}x{} and {}x{} do not fit a {}x{} state",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            d.dim_a(),
            d.dim_b()
        )));
    }
    Ok(())
}

/// `tr[ρ (A⊗B) H_θ (A⊗B)^†]`.
pub fn witness_value(rho: &HermitianOperator, w: &WitnessInstance) -> Result<f64> {
    check_filter_dims(rho, &w.a, &w.b)?;
    let k = tensor(&w.a, &w.b);
    let filtered = k.adjoint() * rho.matrix() * &k;
    Ok(crate::qcore::hs_inner(h_theta(w.theta).matrix(), &filtered).re)
}

/// Unnormalized `(A⊗B)^† ρ (A⊗B)`.
pub fn filter_state(rho: &HermitianOperator, a: &CMatrix, b: &CMatrix) -> Result<HermitianOperator> {
    check_filter_dims(rho, a, b)?;
    rho.conjugate(&tensor(a, b).adjoint(), PartyDims::qubits())
}

#[derive(Clone, Debug)]
pub struct FilteredChsh {
    pub state: DensityOperator,
    pub success_probability: f64,
    pub horodecki: Horodecki,
}

impl FilteredChsh {
    pub fn chsh_max(&self) -> f64 {
        self.horodecki.chsh_max
    }
}

/// Applies the filter pair, renormalizes, and evaluates the Horodecki criterion.
pub fn filtered_chsh(rho: &HermitianOperator, a: &CMatrix, b: &CMatrix) -> Result<FilteredChsh> {
    let tau = filter_state(rho, a, b)?;
    let s = tau.trace();
    let scale = (a.norm_squared() * b.norm_squared()).max(f64::MIN_POSITIVE) * rho.trace().abs().max(1.0);
    if !(s > 1e-15 * scale) {
        return Err(Error::ZeroNormalization(s));
    }
    let state = DensityOperator::from_trusted(tau.scaled(1.0 / s));
    let horodecki = horodecki(&state)?;
    Ok(FilteredChsh {
        state,
        success_probability: s / rho.trace(),
        horodecki,
    })
}

/// Absorbs the local frame of the filtered state into the filters and picks the
/// optimal angle. Returns the witness and its value; the value is negative
/// exactly when the filtered state violates CHSH.
pub fn optimal_witness(rho: &HermitianOperator, a: &CMatrix, b: &CMatrix) -> Result<(WitnessInstance, f64)> {
    let tau = filter_state(rho, a, b)?;
    let frame = diagonalizing_unitaries(&tau)?;
    let w = WitnessInstance::new(
        a * frame.u.adjoint(),
        b * frame.v.adjoint(),
        optimal_theta(frame.mu1, frame.mu2),
    )?;
    let value = witness_value(rho, &w)?;
    Ok((w, value))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SearchStatus {
    ViolationFound,
    /// Heuristic: no restart found a violating filter, which is evidence for
    /// membership but not a proof.
    NoViolationFound,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessReport {
    pub status: SearchStatus,
    pub heuristic: bool,
    pub best_value: f64,
    /// Filters normalized to unit operator norm.
    pub witness: WitnessInstance,
    pub filtered_chsh_max: f64,
    pub success_probability: f64,
    pub restarts_used: usize,
    pub seed: u64,
    /// Best witness value reached by each restart, in restart order.
    pub restart_values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub restarts: usize,
    pub seed: u64,
    /// Function evaluations per restart.
    pub max_evals: usize,
    pub cert_eps: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 64,
            seed: 0,
            max_evals: 6000,
            cert_eps: CERT_EPS,
        }
    }
}

fn correlation_of(tau: &CMatrix) -> Matrix3<f64> {
    let s = paulis();
    Matrix3::from_fn(|i, j| crate::qcore::hs_inner(&tensor(&s[i + 1], &s[j + 1]), tau).re)
}

/// Witness value at the optimal local frame and angle, for filters given
/// unnormalized: `tr τ − sqrt(σ1² + σ2²)` with `σ` the singular values of the
/// correlation matrix of `τ = (A⊗B)^† ρ (A⊗B)`.
fn reduced_objective(rho: &CMatrix, a: &CMatrix, b: &CMatrix) -> f64 {
    let k = tensor(a, b);
    let tau = k.adjoint() * rho * &k;
    let tr = tau.trace().re;
    let mut s: Vec<f64> = correlation_of(&tau).singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    tr - (s[0] * s[0] + s[1] * s[1]).sqrt()
}

/// Quadratic form of the witness in the Alice filter for fixed `B` and `θ`,
/// indexed by `vec(A)` in row-major order.
fn alice_form(rho: &CMatrix, b: &CMatrix, h: &CMatrix, da: usize) -> CMatrix {
    let lift = tensor(&crate::qcore::identity(da), b);
    let rb = lift.adjoint() * rho * &lift;
    CMatrix::from_fn(2 * da, 2 * da, |r, c| {
        let (a1, i1) = (r / 2, r % 2);
        let (a0, i0) = (c / 2, c % 2);
        let mut acc = C64::new(0.0, 0.0);
        for be in 0..2 {
            for be1 in 0..2 {
                acc += rb[(a1 * 2 + be1, a0 * 2 + be)] * h[(i0 * 2 + be, i1 * 2 + be1)];
            }
        }
        acc
    })
}

fn bob_form(rho: &CMatrix, a: &CMatrix, h: &CMatrix, db: usize) -> CMatrix {
    let lift = tensor(a, &crate::qcore::identity(db));
    let ra = lift.adjoint() * rho * &lift;
    CMatrix::from_fn(2 * db, 2 * db, |r, c| {
        let (b1, j1) = (r / 2, r % 2);
        let (b0, j0) = (c / 2, c % 2);
        let mut acc = C64::new(0.0, 0.0);
        for al in 0..2 {
            for al1 in 0..2 {
                acc += ra[(al1 * db + b1, al * db + b0)] * h[(al * 2 + j0, al1 * 2 + j1)];
            }
        }
        acc
    })
}

fn lowest_filter(form: CMatrix, rows: usize) -> Option<CMatrix> {
    let form = (&form + form.adjoint()) * C64::new(0.5, 0.0);
    let (vals, vecs) = crate::qcore::eigh(&form).ok()?;
    let _ = vals;
    Some(CMatrix::from_fn(rows, 2, |r, c| vecs[(r * 2 + c, 0)]))
}

/// Alternates exact minimizations over each filter at unit Frobenius norm,
/// re-absorbing the optimal local frame between steps. Never increases the
/// Frobenius-normalized witness value.
fn polish(rho: &HermitianOperator, a: CMatrix, b: CMatrix, iterations: usize) -> (CMatrix, CMatrix) {
    let (da, db) = (rho.dims().dim_a(), rho.dims().dim_b());
    let mat = rho.matrix();
    let (mut a, mut b) = (a, b);
    let mut current = reduced_objective(mat, &a, &b);
    for _ in 0..iterations {
        let Ok((w, _)) = optimal_witness(rho, &a, &b) else { break };
        let h = h_theta(w.theta).into_matrix();
        let Some(na) = lowest_filter(alice_form(mat, &w.b, &h, da), da) else { break };
        let Some(nb) = lowest_filter(bob_form(mat, &na, &h, db), db) else { break };
        let next = reduced_objective(mat, &na, &nb);
        if !(next < current) {
            break;
        }
        let gain = current - next;
        a = na;
        b = nb;
        current = next;
        if gain < 1e-16 {
            break;
        }
    }
    (a, b)
}

/// Isometric factor `W Z^†` of `A = W Σ Z^†`; returns `A` unchanged when rank
/// deficient.
fn polar_part(a: &CMatrix) -> CMatrix {
    if !column_rank_two(a) {
        return a.clone();
    }
    let svd = a.clone().svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => u * v_t,
        _ => a.clone(),
    }
}

fn unpack(x: &[f64], da: usize, db: usize) -> (CMatrix, CMatrix) {
    let a = CMatrix::from_fn(da, 2, |r, c| {
        let k = 2 * (r * 2 + c);
        C64::new(x[k], x[k + 1])
    });
    let off = 4 * da;
    let b = CMatrix::from_fn(db, 2, |r, c| {
        let k = off + 2 * (r * 2 + c);
        C64::new(x[k], x[k + 1])
    });
    (a, b)
}

fn unit_frobenius(m: CMatrix) -> CMatrix {
    let n = m.norm();
    if n > 0.0 {
        m / C64::new(n, 0.0)
    } else {
        m
    }
}

/// Multi-start Nelder–Mead over filter pairs. Each restart draws a Ginibre
/// starting point from its own stream `(seed, restart)`; results are merged by
/// a min-reduction in restart order, so the report is independent of thread
/// scheduling.
pub fn search_c_membership(rho: &HermitianOperator, cfg: &SearchConfig) -> Result<WitnessReport> {
    let (da, db) = (rho.dims().dim_a(), rho.dims().dim_b());
    let nparams = 4 * (da + db);
    let mat = rho.matrix().clone();
    let restarts = cfg.restarts.max(1);

    let runs: Vec<(f64, CMatrix, CMatrix)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let a0 = ginibre(da, 2, &mut rng);
            let b0 = ginibre(db, 2, &mut rng);
            let mut x0 = Vec::with_capacity(nparams);
            for m in [&a0, &b0] {
                for r in 0..m.nrows() {
                    for c in 0..2 {
                        x0.push(m[(r, c)].re);
                        x0.push(m[(r, c)].im);
                    }
                }
            }
            let objective = |x: &[f64]| {
                let (a, b) = unpack(x, da, db);
                reduced_objective(&mat, &unit_frobenius(a), &unit_frobenius(b))
            };
            let mut best = NelderMead {
                max_evals: cfg.max_evals / 2,
                initial_step: 0.5,
                ..Default::default()
            }
            .minimize(objective, &x0);
            let mut budget = cfg.max_evals - best.evals.min(cfg.max_evals);
            let mut step = 0.1;
            while budget > 0 {
                let next = NelderMead {
                    max_evals: budget,
                    initial_step: step,
                    ..Default::default()
                }
                .minimize(objective, &best.x);
                budget -= next.evals.min(budget);
                let gain = best.value - next.value;
                if next.value < best.value {
                    best = next;
                }
                if gain < 1e-15 {
                    if step < 1e-6 {
                        break;
                    }
                    step *= 0.1;
                }
            }
            let (a, b) = unpack(&best.x, da, db);
            let (a, b) = polish(rho, unit_frobenius(a), unit_frobenius(b), 500);
            (reduced_objective(&mat, &a, &b), a, b)
        })
        .collect();

    let mut restart_values = Vec::with_capacity(restarts);
    let mut best: Option<(f64, WitnessInstance)> = None;
    for (_, a, b) in &runs {
        let mut restart_best: Option<(f64, WitnessInstance)> = None;
        let candidates = [(a.clone(), b.clone()), (polar_part(a), polar_part(b))];
        for (ca, cb) in candidates {
            let Ok((w, _)) = optimal_witness(rho, &ca, &cb) else { continue };
            let w = w.normalized();
            let v = witness_value(rho, &w)?;
            if restart_best.as_ref().map_or(true, |(bv, _)| v < *bv) {
                restart_best = Some((v, w));
            }
        }
        let (v, w) = match restart_best {
            Some(found) => found,
            None => {
                let w = WitnessInstance::new(a.clone(), b.clone(), 0.0)?.normalized();
                (witness_value(rho, &w)?, w)
            }
        };
        restart_values.push(v);
        if best.as_ref().map_or(true, |(bv, _)| v < *bv) {
            best = Some((v, w));
        }
    }
    let (best_value, witness) = best.expect("at least one restart");
    let filtered = filtered_chsh(rho, &witness.a, &witness.b).ok();
    let violation = best_value < -cfg.cert_eps && witness.full_rank();
    Ok(WitnessReport {
        status: if violation {
            SearchStatus::ViolationFound
        } else {
            SearchStatus::NoViolationFound
        },
        heuristic: !violation,
        best_value,
        filtered_chsh_max: filtered.as_ref().map_or(0.0, |f| f.chsh_max()),
        success_probability: filtered.as_ref().map_or(0.0, |f| f.success_probability),
        witness,
        restarts_used: restarts,
        seed: cfg.seed,
        restart_values,
    })
}
