//! `min tr[ρW]` over states with positive partial transpose.
//!
//! ADMM on the splitting `X = Y`, `Γ(X) = Z` with `Y, Z ⪰ 0` and `tr X = 1`,
//! where `Γ` is the partial transpose on Bob's factors. Feasible iterates are
//! extracted by mixing with the maximally mixed state just enough to clear
//! both cones, so every recorded objective belongs to an exactly feasible
//! state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{eigh, project_psd, transpose_factors, CMatrix, DensityOperator, HermitianOperator, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PptSolverConfig {
    pub max_iter: usize,
    /// Target gap between the feasible objective and the dual bound, relative
    /// to the largest entry of `W`.
    pub tol: f64,
    /// Iterations between feasibility extractions.
    pub check_every: usize,
}

impl Default for PptSolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: 1e-9,
            check_every: 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PptSolution {
    pub rho: DensityOperator,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Certified lower bound on the objective over all PPT states.
    pub dual_bound: f64,
    /// Best feasible objective after each extraction; non-increasing.
    pub trace: Vec<f64>,
}

fn min_eig(m: &CMatrix) -> Result<f64> {
    Ok(eigh(m)?.0[0])
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Smallest mixture `(1−t) X + t I/n` with both `X` and `Γ(X)` made PSD.
/// `X` must have unit trace.
fn make_feasible(x: &CMatrix, gamma: &dyn Fn(&CMatrix) -> CMatrix) -> Result<CMatrix> {
    let n = x.nrows();
    let x = hermitian_part(x);
    let lam = min_eig(&x)?.min(min_eig(&gamma(&x))?);
    if lam >= 0.0 {
        return Ok(x);
    }
    let floor = 1.0 / n as f64;
    // a little past the exact crossing so round-off cannot leave a negative eigenvalue
    let t = ((-lam) / (floor - lam) * (1.0 + 1e-12)).min(1.0);
    Ok(x * C64::new(1.0 - t, 0.0) + CMatrix::identity(n, n) * C64::new(t * floor, 0.0))
}

/// `λ_min(W − S₁ − Γ(S₂))` with `S₁, S₂` the PSD parts of the scaled multipliers
/// `−ρU`, `−ρV`; every PPT state has `tr[ρW] ≥` this value.
fn dual_bound(ws: &CMatrix, u: &CMatrix, v: &CMatrix, penalty: f64, gamma: &dyn Fn(&CMatrix) -> CMatrix) -> Result<f64> {
    let s1 = project_psd(&(u * C64::new(-penalty, 0.0)))?;
    let s2 = project_psd(&(v * C64::new(-penalty, 0.0)))?;
    min_eig(&hermitian_part(&(ws - s1 - gamma(&s2))))
}

pub fn ppt_cone_minimize(w: &HermitianOperator, cfg: &PptSolverConfig) -> Result<PptSolution> {
    let dims = w.dims().clone();
    let factors = dims.factors();
    let na = dims.alice().len();
    let mask: Vec<bool> = (0..factors.len()).map(|k| k >= na).collect();
    let gamma = |m: &CMatrix| transpose_factors(m, &factors, &mask).expect("mask matches factors");
    let n = w.dim();
    let identity = CMatrix::identity(n, n);

    let scale = w.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !scale.is_finite() {
        return Err(Error::NonFinite);
    }
    let ws = if scale > 0.0 {
        w.matrix() / C64::new(scale, 0.0)
    } else {
        w.matrix().clone()
    };

    let mut x = &identity / C64::new(n as f64, 0.0);
    let mut y = x.clone();
    let mut z = gamma(&x);
    let mut u = CMatrix::zeros(n, n);
    let mut v = CMatrix::zeros(n, n);
    let mut penalty = 1.0;

    let mut best_x = x.clone();
    let mut best = hs_re(&ws, &x);
    let mut trace = vec![best * scale];
    let mut lower = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=cfg.max_iter {
        iterations = it;
        let p = &y - &u;
        let q = gamma(&(&z - &v));
        x = (p + q) * C64::new(0.5, 0.0) - &ws * C64::new(0.5 / penalty, 0.0);
        x = hermitian_part(&x);
        let shift = (1.0 - x.trace().re) / n as f64;
        x += &identity * C64::new(shift, 0.0);

        let gx = gamma(&x);
        let y_prev = std::mem::replace(&mut y, project_psd(&(&x + &u))?);
        let z_prev = std::mem::replace(&mut z, project_psd(&(&gx + &v))?);
        let ry = &x - &y;
        let rz = &gx - &z;
        u += &ry;
        v += &rz;

        let primal = (ry.norm_squared() + rz.norm_squared()).sqrt();
        let dual = penalty * ((&y - &y_prev).norm_squared() + (&z - &z_prev).norm_squared()).sqrt();

        if it % cfg.check_every.max(1) == 0 || it == cfg.max_iter {
            let feasible = make_feasible(&x, &gamma)?;
            let value = hs_re(&ws, &feasible);
            if value < best {
                best = value;
                best_x = feasible;
            }
            trace.push(best * scale);
            lower = lower.max(dual_bound(&ws, &u, &v, penalty, &gamma)?);
            if best - lower <= cfg.tol {
                converged = true;
                break;
            }
        }

        // residual balancing
        if it % 50 == 0 {
            if primal > 10.0 * dual && penalty < 1e4 {
                penalty *= 2.0;
                u *= C64::new(0.5, 0.0);
                v *= C64::new(0.5, 0.0);
            } else if dual > 10.0 * primal && penalty > 1e-4 {
                penalty *= 0.5;
                u *= C64::new(2.0, 0.0);
                v *= C64::new(2.0, 0.0);
            }
        }
    }

    let rho_op = HermitianOperator::new(dims, best_x)?;
    let objective = rho_op.expectation(w.matrix());
    Ok(PptSolution {
        rho: DensityOperator::from_trusted(rho_op),
        objective,
        iterations,
        converged,
        dual_bound: (lower * scale).min(objective),
        trace,
    })
}

fn hs_re(a: &CMatrix, b: &CMatrix) -> f64 {
    crate::qcore::hs_inner(a, b).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::PartyDims;
    use crate::states::{bell_projectors, ket, product_pure};

    #[test]
    fn identity_objective_is_one() {
        let w = HermitianOperator::identity(PartyDims::qubits());
        let sol = ppt_cone_minimize(&w, &PptSolverConfig::default()).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_ground_state_is_reached() {
        let prod = product_pure(&ket(2, 0), &ket(2, 1)).unwrap();
        let w = HermitianOperator::identity(PartyDims::qubits()).scaled(1.0).matrix() - prod.matrix() * C64::new(3.0, 0.0);
        let w = HermitianOperator::new(PartyDims::qubits(), w).unwrap();
        let sol = ppt_cone_minimize(&w, &PptSolverConfig::default()).unwrap();
        assert!((sol.objective + 2.0).abs() < 1e-7, "{}", sol.objective);
    }

    #[test]
    fn bell_projector_is_bounded_by_separable_value() {
        // max overlap of a PPT two-qubit state with a Bell state is 1/2
        let w = bell_projectors()[0].operator.scaled(-1.0);
        let sol = ppt_cone_minimize(&w, &PptSolverConfig::default()).unwrap();
        assert!((sol.objective + 0.5).abs() < 1e-7, "{}", sol.objective);
        assert!(sol.rho.ppt_min_eigenvalue().unwrap() >= -1e-12);
        assert!(sol.rho.min_eigenvalue().unwrap() >= -1e-12);
        assert!((sol.rho.trace() - 1.0).abs() < 1e-12);
        assert!(sol.trace.windows(2).all(|p| p[1] <= p[0]));
    }
}
