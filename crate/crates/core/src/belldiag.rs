//! Bell-diagonal reduction of `μᵀ⊗H_{π/4} − Σ_x Ω_x(H_{θ_x}) ⪰ 0`.
//!
//! Maps `Ω: [C²]⊗[C²] → [H_{A'}⊗C²]⊗[H_{B'}⊗C²]` are given as separable Kraus
//! lists whose outputs have Alice factors `(A', A'')` and Bob factors
//! `(B', B'')`. Continuous families are finite weighted lists; weights are
//! folded into the Kraus operators.
//!
//! Bell indices are 0-based: component `k` is `Φ_{k+1}` in the usual 1-based labelling.

use std::f64::consts::FRAC_PI_4;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtering::h_theta;
use crate::nnls::nnls;
use crate::optim::LevenbergMarquardt;
use crate::qcore::{
    ket_matrix, partial_trace_factors, paulis, permute_factors, tensor, CMatrix, CVector, HermitianOperator,
    KrausMap, PartyDims, C64,
};
use crate::states::{bell_projectors, bell_weights, random_vector, seeded_rng, StateFile};
use crate::tolerance::Tolerances;

pub type Mat4 = [[f64; 4]; 4];

/// Residual below which a pD+qG fit counts as exact.
pub const DECOMPOSITION_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NVector {
    pub theta: f64,
    pub components: [f64; 4],
}

/// Spectrum of `H_θ` in Bell order: `(1−c−s, 1+c−s, 1−c+s, 1+c+s)`.
pub fn n_vector(theta: f64) -> NVector {
    let (s, c) = theta.sin_cos();
    NVector {
        theta,
        components: [1.0 - c - s, 1.0 + c - s, 1.0 - c + s, 1.0 + c + s],
    }
}

pub fn mat_vec(m: &Mat4, v: &[f64; 4]) -> [f64; 4] {
    std::array::from_fn(|i| (0..4).map(|j| m[i][j] * v[j]).sum())
}

#[cfg(test)]
fn mat_sub_norm(a: &Mat4, b: &Mat4) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `P` with `(P v)_i = v[perm[i]]`.
pub fn permutation_matrix(perm: &[usize; 4]) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for (i, &j) in perm.iter().enumerate() {
        m[i][j] = 1.0;
    }
    m
}

/// All 24 permutations in lexicographic order.
pub fn permutations() -> Vec<[usize; 4]> {
    (0..4)
        .permutations(4)
        .map(|p| [p[0], p[1], p[2], p[3]])
        .collect()
}

pub fn g0() -> Mat4 {
    [[1.0, 1.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [0.0; 4], [0.0; 4]]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GVertex {
    /// Rows and columns of the 2×2 block of ones.
    pub rows: [usize; 2],
    pub cols: [usize; 2],
    pub matrix: Mat4,
}

/// Distinct matrices obtained by permuting rows and columns of `G₀`
/// independently, sorted by block position.
pub fn g_vertices() -> Vec<GVertex> {
    let g = g0();
    let mut out: Vec<GVertex> = Vec::new();
    for r in permutations() {
        for c in permutations() {
            let m: Mat4 = std::array::from_fn(|i| std::array::from_fn(|j| g[r[i]][c[j]]));
            if out.iter().any(|v| v.matrix == m) {
                continue;
            }
            let rows: Vec<usize> = (0..4).filter(|&i| m[i].iter().any(|&x| x > 0.0)).collect();
            let cols: Vec<usize> = (0..4).filter(|&j| m.iter().any(|row| row[j] > 0.0)).collect();
            out.push(GVertex {
                rows: [rows[0], rows[1]],
                cols: [cols[0], cols[1]],
                matrix: m,
            });
        }
    }
    out.sort_by_key(|v| (v.rows, v.cols));
    out
}

fn check_signature(map: &KrausMap) -> Result<(usize, usize)> {
    let out = map.out_dims();
    let ok = map.in_dims() == (2, 2)
        && out.alice().len() == 2
        && out.bob().len() == 2
        && out.alice()[1] == 2
        && out.bob()[1] == 2;
    if !ok {
        return Err(Error::Dimension(format!(
            "map must send [C2]x[C2] to [H x C2]x[H x C2], got input {:?} and output {:?}",
            map.in_dims(),
            out
        )));
    }
    Ok((out.alice()[0], out.bob()[0]))
}

/// `tr_{A''B''}[(I ⊗ Π_i) X]` for `X` with factors `(A', A'', B', B'')`.
fn bell_block(x: &CMatrix, da: usize, db: usize, pi: &CMatrix) -> Result<CMatrix> {
    let factors = [da, 2, db, 2];
    let regrouped = permute_factors(x, &factors, &[0, 2, 1, 3])?;
    let weighted = tensor(&CMatrix::identity(da * db, da * db), pi) * regrouped;
    partial_trace_factors(&weighted, &[da, db, 2, 2], &[false, false, true, true])
}

/// `ω[i][j] = tr_{A''B''}[(I⊗Π_i) Ω(Π_j)]`, each on `H_{A'}⊗H_{B'}`.
pub fn omega_matrices(map: &KrausMap) -> Result<Vec<Vec<HermitianOperator>>> {
    let (da, db) = check_signature(map)?;
    let dims = PartyDims::simple(da, db)?;
    let bell = bell_projectors();
    let images: Vec<HermitianOperator> = bell.iter().map(|p| map.apply(&p.operator)).collect::<Result<_>>()?;
    bell.iter()
        .map(|pi| {
            images
                .iter()
                .map(|img| HermitianOperator::new(dims.clone(), bell_block(img.matrix(), da, db, pi.operator.matrix())?))
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MMatrix {
    pub entries: Mat4,
}

pub fn m_matrix(omega: &[Vec<HermitianOperator>]) -> MMatrix {
    MMatrix {
        entries: std::array::from_fn(|i| std::array::from_fn(|j| omega[i][j].trace())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Feasibility {
    Feasible,
    Infeasible,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolytopeDecomposition {
    pub status: Feasibility,
    /// One weight per entry of [`permutations`].
    pub d_weights: Vec<f64>,
    /// One weight per entry of [`g_vertices`].
    pub g_weights: Vec<f64>,
    pub p: f64,
    pub q: f64,
    pub residual: f64,
}

impl PolytopeDecomposition {
    pub fn reconstruct(&self) -> Mat4 {
        let mut m = [[0.0; 4]; 4];
        let vertices = permutations()
            .iter()
            .map(permutation_matrix)
            .zip(&self.d_weights)
            .chain(g_vertices().iter().map(|g| g.matrix).zip(&self.g_weights))
            .collect::<Vec<_>>();
        for (v, &w) in vertices {
            for i in 0..4 {
                for j in 0..4 {
                    m[i][j] += w * v[i][j];
                }
            }
        }
        m
    }

    /// `Σ_k d_k P_k`, i.e. `p·D`.
    pub fn d_part(&self) -> Mat4 {
        let mut m = [[0.0; 4]; 4];
        for (perm, &w) in permutations().iter().zip(&self.d_weights) {
            for (i, &j) in perm.iter().enumerate() {
                m[i][j] += w;
            }
        }
        m
    }
}

/// Non-negative fit of `M` over the 24 permutation matrices and the 36 `G` vertices.
pub fn decompose_pdqg(m: &Mat4) -> PolytopeDecomposition {
    let perms = permutations();
    let gs = g_vertices();
    let cols: Vec<Mat4> = perms.iter().map(permutation_matrix).chain(gs.iter().map(|g| g.matrix)).collect();
    let a = DMatrix::from_fn(16, cols.len(), |r, c| cols[c][r / 4][r % 4]);
    let b = DVector::from_fn(16, |r, _| m[r / 4][r % 4]);
    let sol = nnls(&a, &b);
    let d_weights: Vec<f64> = sol.x.iter().take(perms.len()).copied().collect();
    let g_weights: Vec<f64> = sol.x.iter().skip(perms.len()).copied().collect();
    PolytopeDecomposition {
        status: if sol.residual < DECOMPOSITION_TOL {
            Feasibility::Feasible
        } else {
            Feasibility::Infeasible
        },
        p: d_weights.iter().sum(),
        q: g_weights.iter().sum(),
        d_weights,
        g_weights,
        residual: sol.residual,
    }
}

/// One member of a finite family `{Ω_x, θ_x}`.
#[derive(Clone, Debug)]
pub struct MapTerm {
    pub map: KrausMap,
    pub theta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IoChainReport {
    pub terms: usize,
    /// Smallest eigenvalue of each operator inequality, one per Bell index.
    pub uk_min_eigenvalues: [f64; 4],
    pub uk_holds: bool,
    /// `N_{π/4} − Σ_x M_x N_{θ_x}`.
    pub io_vector: [f64; 4],
    pub io_holds: bool,
    /// The operator inequalities built from `ω` agree with the Bell-projected
    /// full operator, and their traces agree with the trace-level vector.
    pub consistent: bool,
    pub principal_min_eigenvalue: f64,
    pub decompositions_feasible: bool,
    /// `Σ_x p_x` from the pD+qG split of each `M_x`.
    pub p_total: f64,
    pub p_total_within_one: bool,
    /// `N_{π/4} − Σ_x p_x D_x N_{θ_x}`.
    pub d_vector: [f64; 4],
    pub d_holds: bool,
    pub failures: Vec<String>,
}

/// Evaluates the operator inequalities for each Bell index, their traces,
/// and the permutation-part consequence, each computed independently.
pub fn verify_io_chain(mu: &HermitianOperator, family: &[MapTerm], tol: &Tolerances) -> Result<IoChainReport> {
    let (da, db) = (mu.dims().dim_a(), mu.dims().dim_b());
    let mu_t = mu.with_dims(PartyDims::simple(da, db)?)?.transpose();
    let n4 = n_vector(FRAC_PI_4).components;
    let bell = bell_projectors();

    let mut principal = mu_t.bipartite_tensor(&h_theta(FRAC_PI_4)).into_matrix();
    let mut uk: Vec<CMatrix> = (0..4).map(|i| mu_t.matrix() * C64::new(n4[i], 0.0)).collect();
    let mut io = n4;
    let mut d_vec = n4;
    let mut p_total = 0.0;
    let mut feasible = true;

    for term in family {
        let (ma, mb) = check_signature(&term.map)?;
        if (ma, mb) != (da, db) {
            return Err(Error::Dimension(format!(
                "map outputs {ma}x{mb} on the fixed factors, state is {da}x{db}"
            )));
        }
        let nt = n_vector(term.theta).components;
        principal -= term.map.apply(&h_theta(term.theta))?.matrix();
        let omega = omega_matrices(&term.map)?;
        for i in 0..4 {
            for j in 0..4 {
                uk[i] -= omega[i][j].matrix() * C64::new(nt[j], 0.0);
            }
        }
        let m = m_matrix(&omega).entries;
        let mn = mat_vec(&m, &nt);
        let dec = decompose_pdqg(&m);
        feasible &= dec.status == Feasibility::Feasible;
        p_total += dec.p;
        let dn = mat_vec(&dec.d_part(), &nt);
        for i in 0..4 {
            io[i] -= mn[i];
            d_vec[i] -= dn[i];
        }
    }

    let mut consistent = true;
    let mut uk_min = [0.0; 4];
    for i in 0..4 {
        let direct = bell_block(&principal, da, db, bell[i].operator.matrix())?;
        consistent &= (&direct - &uk[i]).camax() <= tol.eq;
        consistent &= (uk[i].trace().re - io[i]).abs() <= tol.eq;
        uk_min[i] = HermitianOperator::new(PartyDims::simple(da, db)?, uk[i].clone())?.min_eigenvalue()?;
    }
    let principal_min =
        HermitianOperator::new(PartyDims::new(vec![da, 2], vec![db, 2])?, principal)?.min_eigenvalue()?;

    let uk_holds = uk_min.iter().all(|&v| v >= -tol.psd);
    let io_holds = io.iter().all(|&v| v >= -tol.eq);
    let d_holds = d_vec.iter().all(|&v| v >= -tol.eq);
    let p_ok = p_total <= 1.0 + tol.eq;

    let mut failures = Vec::new();
    for i in 0..4 {
        if io[i] < -tol.eq {
            failures.push(format!("trace inequality {} fails: {:.6e}", i + 1, io[i]));
        }
        if uk_min[i] < -tol.psd {
            failures.push(format!("operator inequality {} fails: min eigenvalue {:.6e}", i + 1, uk_min[i]));
        }
    }
    if !p_ok {
        failures.push(format!("permutation weights sum to {p_total:.6}, above 1"));
    }
    if !feasible {
        failures.push("some M_x has no pD+qG decomposition".into());
    }
    if !consistent {
        failures.push("operator and trace levels disagree".into());
    }

    Ok(IoChainReport {
        terms: family.len(),
        uk_min_eigenvalues: uk_min,
        uk_holds,
        io_vector: io,
        io_holds,
        consistent,
        principal_min_eigenvalue: principal_min,
        decompositions_feasible: feasible,
        p_total,
        p_total_within_one: p_ok,
        d_vector: d_vec,
        d_holds,
        failures,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvNReport {
    pub resolution: usize,
    pub min_first_component: f64,
    pub argmin_theta: f64,
    /// Index of the `N_θ` component that sits first at the minimum.
    pub argmin_component: usize,
    /// Every sweep point reaching the minimum has `θ = π/4` and component 0 first.
    pub unique_attainer: bool,
    /// Smallest first component over all other sweep points.
    pub second_smallest: f64,
    /// `√2 (1 − cos h)` for grid step `h`: the distance to the runner-up on the grid.
    pub expected_gap: f64,
    /// Smallest component of `G · N_θ` over all vertices and grid points.
    pub g_min_component: f64,
    pub pair_sums_match: bool,
    pub passed: bool,
}

/// Sweeps `θ ∈ [0, π/4]` and all component permutations. A linear functional
/// on `conv 𝒩` is minimized at a point of `𝒩`, so the sweep covers the hull.
/// Coarse grids only widen the reported gap.
pub fn conv_n_extremality(resolution: usize) -> Result<ConvNReport> {
    conv_n_sweep(resolution, &|t| n_vector(t).components)
}

fn grid_theta(k: usize, resolution: usize) -> f64 {
    if k == resolution {
        FRAC_PI_4
    } else {
        FRAC_PI_4 * k as f64 / resolution as f64
    }
}

fn conv_n_sweep(resolution: usize, n_of: &(dyn Fn(f64) -> [f64; 4] + Sync)) -> Result<ConvNReport> {
    if resolution == 0 {
        return Err(Error::OutOfRange {
            name: "resolution",
            value: 0.0,
            range: "[1, inf)",
        });
    }
    let h = FRAC_PI_4 / resolution as f64;
    let perms = permutations();
    let gs = g_vertices();
    let floor = 1.0 - 2f64.sqrt();

    // (value, k, component) for every grid point and permutation
    let points: Vec<(f64, usize, usize)> = (0..=resolution)
        .into_par_iter()
        .flat_map_iter(|k| {
            let n = n_of(grid_theta(k, resolution));
            perms.iter().map(move |p| (n[p[0]], k, p[0])).collect::<Vec<_>>()
        })
        .collect();
    let &(min, kmin, cmin) = points
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)))
        .expect("non-empty sweep");
    let attaining = |&(v, _, _): &(f64, usize, usize)| v <= min + 1e-15;
    let unique = points.iter().filter(|p| attaining(p)).all(|&(_, k, c)| k == resolution && c == 0);
    let second = points
        .iter()
        .filter(|&&(_, k, c)| !(k == resolution && c == 0))
        .map(|p| p.0)
        .fold(f64::INFINITY, f64::min);
    let expected_gap = 2f64.sqrt() * (1.0 - h.cos());

    let (g_min, pairs_ok) = (0..=resolution)
        .into_par_iter()
        .map(|k| {
            let theta = grid_theta(k, resolution);
            let n = n_of(theta);
            let g_min = gs
                .iter()
                .flat_map(|g| mat_vec(&g.matrix, &n))
                .fold(f64::INFINITY, f64::min);
            let (s, c) = theta.sin_cos();
            let mut sums: Vec<f64> = (0..4).array_combinations::<2>().map(|[i, j]| n[i] + n[j]).collect();
            let mut want = vec![2.0 - 2.0 * s, 2.0 - 2.0 * c, 2.0, 2.0, 2.0 + 2.0 * c, 2.0 + 2.0 * s];
            sums.sort_by(f64::total_cmp);
            want.sort_by(f64::total_cmp);
            let ok = sums.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-12);
            (g_min, ok)
        })
        .reduce(|| (f64::INFINITY, true), |a, b| (a.0.min(b.0), a.1 && b.1));

    let passed = (min - floor).abs() < 1e-9
        && kmin == resolution
        && cmin == 0
        && unique
        && second >= min + 0.99 * expected_gap
        && g_min >= -1e-12
        && pairs_ok;
    Ok(ConvNReport {
        resolution,
        min_first_component: min,
        argmin_theta: grid_theta(kmin, resolution),
        argmin_component: cmin,
        unique_attainer: unique,
        second_smallest: second,
        expected_gap,
        g_min_component: g_min,
        pair_sums_match: pairs_ok,
        passed,
    })
}

/// Identity on the Bell components 0 and 3, mixing 1 and 2 with weight `η`.
pub fn m0_matrix(eta: f64) -> Result<Mat4> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::OutOfRange {
            name: "eta",
            value: eta,
            range: "[0, 1]",
        });
    }
    Ok([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0 - eta, eta, 0.0],
        [0.0, eta, 1.0 - eta, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct M0Report {
    pub eta: f64,
    pub matrix: Mat4,
    /// `max |M₀ N_{π/4} − N_{π/4}|`.
    pub fixed_point_error: f64,
    /// Largest deviation of a row or column sum from 1.
    pub doubly_stochastic_error: f64,
    /// Permutations whose matrix fixes `N_{π/4}`.
    pub fixing_permutations: Vec<[usize; 4]>,
    /// Exactly the identity and the swap of components 1 and 2 fix `N_{π/4}`.
    pub complete: bool,
    pub passed: bool,
}

pub fn m0_family(eta: f64) -> Result<M0Report> {
    m0_family_at(eta, n_vector(FRAC_PI_4).components)
}

fn m0_family_at(eta: f64, n: [f64; 4]) -> Result<M0Report> {
    let m = m0_matrix(eta)?;
    let mn = mat_vec(&m, &n);
    let fixed_point_error = (0..4).map(|i| (mn[i] - n[i]).abs()).fold(0.0, f64::max);
    let doubly_stochastic_error = (0..4)
        .flat_map(|i| {
            let row: f64 = m[i].iter().sum();
            let col: f64 = m.iter().map(|r| r[i]).sum();
            [(row - 1.0).abs(), (col - 1.0).abs()]
        })
        .fold(0.0, f64::max);
    let fixing: Vec<[usize; 4]> = permutations()
        .into_iter()
        .filter(|p| {
            let pn = mat_vec(&permutation_matrix(p), &n);
            (0..4).all(|i| (pn[i] - n[i]).abs() < 1e-12)
        })
        .collect();
    let complete = fixing == vec![[0, 1, 2, 3], [0, 2, 1, 3]];
    Ok(M0Report {
        eta,
        matrix: m,
        fixed_point_error,
        doubly_stochastic_error,
        passed: fixed_point_error < 1e-12 && doubly_stochastic_error < 1e-12 && complete,
        fixing_permutations: fixing,
        complete,
    })
}

/// Pure product term `w |a⟩⟨a| ⊗ |b⟩⟨b|` of a separable decomposition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProductTerm {
    pub weight: f64,
    /// Unit vectors as `[re, im]` pairs.
    pub a: Vec<[f64; 2]>,
    pub b: Vec<[f64; 2]>,
}

fn to_pairs(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn product_projector(a: &CVector, b: &CVector) -> CMatrix {
    let v = a.kronecker(b);
    &v * v.adjoint()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsiReport {
    pub trace: f64,
    pub rank: usize,
    pub ppt_min_eigenvalue: f64,
    pub ppt_passed: bool,
    pub samples: usize,
    pub seed: u64,
    /// Frobenius residual of the sampled non-negative fit.
    pub sampled_residual: f64,
    /// Frobenius residual after refining the active terms.
    pub residual: f64,
    pub decomposition: Vec<ProductTerm>,
    pub passed: bool,
}

/// `Π₁ + Π₂` (0-based), unnormalized.
pub fn psi() -> HermitianOperator {
    let b = bell_projectors();
    HermitianOperator::new(PartyDims::qubits(), b[1].operator.matrix() + b[2].operator.matrix()).expect("sum of projectors")
}

fn hermitian_residual(target: &CMatrix, approx: &CMatrix) -> Vec<f64> {
    let d = approx - target;
    let n = d.nrows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in i..n {
            out.push(d[(i, j)].re);
            if j > i {
                out.push(d[(i, j)].im);
            }
        }
    }
    out
}

fn unpack_products(x: &[f64], terms: usize) -> Vec<(CVector, CVector)> {
    (0..terms)
        .map(|t| {
            let o = 8 * t;
            let a = CVector::from_fn(2, |i, _| C64::new(x[o + 2 * i], x[o + 2 * i + 1]));
            let b = CVector::from_fn(2, |i, _| C64::new(x[o + 4 + 2 * i], x[o + 4 + 2 * i + 1]));
            (a, b)
        })
        .collect()
}

/// Separable decomposition of `X ⪰ 0` on two qubits: non-negative fit over
/// `samples` random product projectors, then least-squares refinement of the
/// active terms with weights absorbed into unnormalized vectors.
pub fn fit_separable(x: &CMatrix, samples: usize, seed: u64) -> Result<(Vec<ProductTerm>, f64, f64)> {
    let mut rng = seeded_rng(seed);
    let atoms: Vec<(CVector, CVector)> = (0..samples)
        .map(|_| (random_vector(2, &mut rng), random_vector(2, &mut rng)))
        .collect();
    let cols: Vec<Vec<f64>> = atoms
        .iter()
        .map(|(a, b)| hermitian_residual(&CMatrix::zeros(4, 4), &product_projector(a, b)))
        .collect();
    let target = hermitian_residual(&CMatrix::zeros(4, 4), x);
    let a = DMatrix::from_fn(target.len(), cols.len(), |r, c| cols[c][r]);
    let sol = nnls(&a, &DVector::from_vec(target));
    let sampled_residual = sol.residual;

    let mut x0 = Vec::new();
    let mut active = 0;
    for (k, &w) in sol.x.iter().enumerate() {
        if w > 1e-12 {
            let s = w.sqrt().sqrt();
            for v in [&atoms[k].0, &atoms[k].1] {
                for z in v.iter() {
                    x0.push(z.re * s);
                    x0.push(z.im * s);
                }
            }
            active += 1;
        }
    }
    if active == 0 {
        return Err(Error::ZeroNormalization(0.0));
    }
    let residual_of = |p: &[f64]| {
        let approx = unpack_products(p, active)
            .iter()
            .fold(CMatrix::zeros(4, 4), |acc, (a, b)| acc + product_projector(a, b));
        hermitian_residual(x, &approx)
    };
    let lm = LevenbergMarquardt {
        max_iter: 2000,
        ..Default::default()
    };
    let (best, _) = lm.minimize(residual_of, &x0);
    let terms = to_terms(&best, active);
    let raw_residual = (rebuild(&terms) - x).norm();
    let merged = refine_terms(x, &merge_terms(&terms), &lm);
    let merged_residual = (rebuild(&merged) - x).norm();
    if merged_residual <= raw_residual.max(1e-13) {
        Ok((merged, sampled_residual, merged_residual))
    } else {
        Ok((terms, sampled_residual, raw_residual))
    }
}

fn refine_terms(x: &CMatrix, terms: &[ProductTerm], lm: &LevenbergMarquardt) -> Vec<ProductTerm> {
    let mut x0 = Vec::new();
    for t in terms {
        let s = t.weight.sqrt().sqrt();
        let (a, b) = term_vectors(t);
        for z in a.iter().chain(b.iter()) {
            x0.push(z.re * s);
            x0.push(z.im * s);
        }
    }
    let n = terms.len();
    let (best, _) = lm.minimize(
        |p: &[f64]| {
            let approx = unpack_products(p, n)
                .iter()
                .fold(CMatrix::zeros(4, 4), |acc, (a, b)| acc + product_projector(a, b));
            hermitian_residual(x, &approx)
        },
        &x0,
    );
    to_terms(&best, n)
}

fn to_terms(p: &[f64], n: usize) -> Vec<ProductTerm> {
    unpack_products(p, n)
        .into_iter()
        .filter_map(|(a, b)| {
            let weight = a.norm_squared() * b.norm_squared();
            (weight > 0.0).then(|| ProductTerm {
                weight,
                a: to_pairs(&a.normalize()),
                b: to_pairs(&b.normalize()),
            })
        })
        .collect()
}

fn term_vectors(t: &ProductTerm) -> (CVector, CVector) {
    let v = |p: &[[f64; 2]]| CVector::from_fn(p.len(), |i, _| C64::new(p[i][0], p[i][1]));
    (v(&t.a), v(&t.b))
}

fn rebuild(terms: &[ProductTerm]) -> CMatrix {
    terms.iter().fold(CMatrix::zeros(4, 4), |acc, t| {
        let (a, b) = term_vectors(t);
        acc + product_projector(&a, &b) * C64::new(t.weight, 0.0)
    })
}

/// Sums the weights of terms with the same product projector (up to phase).
fn merge_terms(terms: &[ProductTerm]) -> Vec<ProductTerm> {
    let mut out: Vec<ProductTerm> = Vec::new();
    for t in terms {
        let (a, b) = term_vectors(t);
        let proj = product_projector(&a, &b);
        match out.iter_mut().find(|o| {
            let (oa, ob) = term_vectors(o);
            (product_projector(&oa, &ob) - &proj).camax() < 1e-6
        }) {
            Some(o) => o.weight += t.weight,
            None => out.push(t.clone()),
        }
    }
    out
}

pub const PSI_SAMPLES: usize = 500;
pub const PSI_SEED: u64 = 20_060_401;

pub fn psi_separability() -> Result<PsiReport> {
    let psi = psi();
    let ppt = psi.ppt_min_eigenvalue()?;
    let rank = psi.eigenvalues()?.iter().filter(|&&v| v > 1e-10).count();
    let (decomposition, sampled_residual, residual) = fit_separable(psi.matrix(), PSI_SAMPLES, PSI_SEED)?;
    let ppt_passed = ppt >= -1e-10;
    Ok(PsiReport {
        trace: psi.trace(),
        rank,
        ppt_min_eigenvalue: ppt,
        ppt_passed,
        samples: PSI_SAMPLES,
        seed: PSI_SEED,
        sampled_residual,
        passed: ppt_passed && residual < 1e-8 && decomposition.iter().all(|t| t.weight >= 0.0),
        residual,
        decomposition,
    })
}

/// Pure product state `|a⟩⊗|b⟩` on the fixed factors, with a weight.
pub type FixedTerm = (f64, CVector, CVector);

/// `X ↦ Σ_m q_m |a_m⟩⟨a_m| ⊗ |b_m⟩⟨b_m| ⊗ Λ(X)` for `Λ` given by local Kraus pairs.
pub fn attach_fixed(fixed: &[FixedTerm], pairs: &[(CMatrix, CMatrix)]) -> Result<KrausMap> {
    let Some((_, a0, b0)) = fixed.first() else {
        return Err(Error::Dimension("empty fixed-state decomposition".into()));
    };
    let mut out = Vec::with_capacity(fixed.len() * pairs.len());
    for (q, a, b) in fixed {
        let s = C64::new(q.sqrt(), 0.0);
        for (ka, kb) in pairs {
            out.push((tensor(&ket_matrix(a), ka) * s, tensor(&ket_matrix(b), kb)));
        }
    }
    KrausMap::new(out, PartyDims::new(vec![a0.len(), 2], vec![b0.len(), 2])?)
}

/// Trivial fixed factors: the map acts on `A''B''` alone.
pub fn trivial_fixed() -> Vec<FixedTerm> {
    let one = CVector::from_element(1, C64::new(1.0, 0.0));
    vec![(1.0, one.clone(), one)]
}

/// `exp(−iπσ_y/4)`; conjugation by `U⊗U` swaps `Φ₂` and `Φ₃` and fixes the others.
pub fn swap_unitary() -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_row_slice(2, 2, &[C64::new(h, 0.0), C64::new(-h, 0.0), C64::new(h, 0.0), C64::new(h, 0.0)])
}

/// `(1−η) X + η (U⊗U) X (U⊗U)^†` on `A''B''`, whose `M` matrix is `M₀(η)`.
pub fn m0_pairs(eta: f64) -> Result<Vec<(CMatrix, CMatrix)>> {
    m0_matrix(eta)?;
    let u = swap_unitary();
    let i = CMatrix::identity(2, 2);
    Ok(vec![
        (i.clone() * C64::new((1.0 - eta).sqrt(), 0.0), i),
        (u.clone() * C64::new(eta.sqrt(), 0.0), u),
    ])
}

pub fn m0_map(eta: f64, fixed: &[FixedTerm]) -> Result<KrausMap> {
    attach_fixed(fixed, &m0_pairs(eta)?)
}

/// Explicit product decomposition of the separable Bell-diagonal state with
/// weights `w`: a convex mix of six product states whose Bell-dephased
/// versions sit on the vertices `(Π_i + Π_j)/2`, each dephased by the
/// four correlated Pauli conjugations.
pub fn bell_diagonal_product_terms(w: [f64; 4]) -> Result<Vec<FixedTerm>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| C64::new(re, im);
    let v = |x: C64, y: C64| CVector::from_vec(vec![x, y]);
    let zero = v(c(1.0, 0.0), c(0.0, 0.0));
    let one = v(c(0.0, 0.0), c(1.0, 0.0));
    let plus = v(c(s, 0.0), c(s, 0.0));
    let minus = v(c(s, 0.0), c(-s, 0.0));
    let yp = v(c(s, 0.0), c(0.0, s));
    let ym = v(c(s, 0.0), c(0.0, -s));
    let seeds = [
        (zero.clone(), zero.clone()),
        (zero, one),
        (plus.clone(), plus.clone()),
        (plus, minus),
        (yp.clone(), yp.clone()),
        (yp, ym),
    ];
    let overlaps: Vec<[f64; 4]> = seeds.iter().map(|(a, b)| bell_weights(&product_projector(a, b))).collect();
    let a = DMatrix::from_fn(4, seeds.len(), |r, k| overlaps[k][r]);
    let sol = nnls(&a, &DVector::from_row_slice(&w));
    if sol.residual > 1e-12 {
        return Err(Error::OutOfRange {
            name: "Bell weights",
            value: w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            range: "separable region (every weight at most 1/2)",
        });
    }
    let p = paulis();
    let mut out = Vec::new();
    for (k, (a, b)) in seeds.iter().enumerate() {
        if sol.x[k] <= 0.0 {
            continue;
        }
        for sk in &p {
            out.push((sol.x[k] / 4.0, sk * a, sk * b));
        }
    }
    Ok(out)
}

/// Discards the input and prepares `ξ ⊗ τ_w` with `τ_w` Bell-diagonal and separable.
pub fn prepare_map(w: [f64; 4], fixed: &[FixedTerm]) -> Result<KrausMap> {
    let terms = bell_diagonal_product_terms(w)?;
    let mut pairs = Vec::new();
    for (q, a, b) in &terms {
        let s = C64::new(q.sqrt(), 0.0);
        for k in 0..2 {
            for l in 0..2 {
                let ka = ket_matrix(a) * ket_matrix(&crate::states::ket(2, k)).adjoint() * s;
                let kb = ket_matrix(b) * ket_matrix(&crate::states::ket(2, l)).adjoint();
                pairs.push((ka, kb));
            }
        }
    }
    attach_fixed(fixed, &pairs)
}

/// Independent Pauli channels on each qubit, `p_a` and `p_b` probabilities over `[I, X, Y, Z]`.
pub fn pauli_channel(p_a: [f64; 4], p_b: [f64; 4], fixed: &[FixedTerm]) -> Result<KrausMap> {
    let s = paulis();
    let mut pairs = Vec::new();
    for k in 0..4 {
        for l in 0..4 {
            if p_a[k] > 0.0 && p_b[l] > 0.0 {
                pairs.push((&s[k] * C64::new(p_a[k].sqrt(), 0.0), &s[l] * C64::new(p_b[l].sqrt(), 0.0)));
            }
        }
    }
    attach_fixed(fixed, &pairs)
}

/// Local unitary `U⊗V` on `A''B''`.
pub fn local_unitary_map(u: &CMatrix, v: &CMatrix, fixed: &[FixedTerm]) -> Result<KrausMap> {
    attach_fixed(fixed, &[(u.clone(), v.clone())])
}

/// Random separable map with `terms` Ginibre Kraus pairs.
pub fn random_separable_map(dim_a: usize, dim_b: usize, terms: usize, seed: u64) -> Result<KrausMap> {
    let mut rng = seeded_rng(seed);
    let pairs = (0..terms.max(1))
        .map(|_| {
            (
                crate::states::ginibre(2 * dim_a, 2, &mut rng),
                crate::states::ginibre(2 * dim_b, 2, &mut rng),
            )
        })
        .collect();
    KrausMap::new(pairs, PartyDims::new(vec![dim_a, 2], vec![dim_b, 2])?)
}

fn random_fixed<R: Rng>(dim_a: usize, dim_b: usize, rng: &mut R) -> Vec<FixedTerm> {
    vec![(1.0, random_vector(dim_a, rng), random_vector(dim_b, rng))]
}

fn random_probabilities<R: Rng>(rng: &mut R) -> [f64; 4] {
    let raw: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());
    let t: f64 = raw.iter().sum();
    raw.map(|x| x / t)
}

/// Separable maps that keep Bell-diagonal structure: prepare maps, Pauli
/// channels, Bell-permuting local Cliffords, `M₀` realizations and mixtures.
pub fn separable_map_corpus(seed: u64) -> Result<Vec<(String, KrausMap)>> {
    let mut rng = seeded_rng(seed);
    let mut out = Vec::new();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let hadamard = CMatrix::from_row_slice(2, 2, &[C64::new(h, 0.0), C64::new(h, 0.0), C64::new(h, 0.0), C64::new(-h, 0.0)]);
    let phase = CMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0)]);
    let i2 = CMatrix::identity(2, 2);
    let p = paulis();
    for k in 0..6 {
        let (da, db) = (1 + k % 3, 1 + (k + 1) % 2);
        let fixed = random_fixed(da, db, &mut rng);
        // separable Bell weights: a point of the octahedron with max weight ≤ 1/2
        let pair_weights = random_probabilities(&mut rng);
        let verts = [[0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5], [0.5, 0.0, 0.5, 0.0], [0.0, 0.5, 0.0, 0.5]];
        let w: [f64; 4] = std::array::from_fn(|i| (0..4).map(|v| pair_weights[v] * verts[v][i]).sum());
        out.push((format!("prepare-{k}"), prepare_map(w, &fixed)?));
        out.push((
            format!("pauli-{k}"),
            pauli_channel(random_probabilities(&mut rng), random_probabilities(&mut rng), &fixed)?,
        ));
        out.push((format!("m0-{k}"), m0_map(rng.random::<f64>(), &fixed)?));
    }
    let cliffords = [
        ("hadamard", hadamard.clone(), hadamard.clone()),
        ("phase", phase.clone(), phase.adjoint()),
        ("swap23", swap_unitary(), swap_unitary()),
        ("x-local", p[1].clone(), i2.clone()),
        ("z-local", i2.clone(), p[3].clone()),
    ];
    for (name, u, v) in cliffords {
        out.push((format!("clifford-{name}"), local_unitary_map(&u, &v, &trivial_fixed())?));
    }
    out.push(("identity".into(), local_unitary_map(&i2, &i2, &trivial_fixed())?));
    // a mixture of Bell-permuting maps with a prepare map
    let mix = local_unitary_map(&hadamard, &hadamard, &trivial_fixed())?
        .weighted(0.3)
        .sum(pauli_channel([0.5, 0.5, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], &trivial_fixed())?.weighted(0.5))?
        .sum(prepare_map([0.5, 0.0, 0.5, 0.0], &trivial_fixed())?.weighted(0.2))?;
    out.push(("mixture".into(), mix));
    for k in 0..4 {
        out.push((format!("random-{k}"), random_separable_map(1 + k % 2, 1, 2 + k, seed.wrapping_add(k as u64))?));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fin2Report {
    pub eta: f64,
    /// `tr_{A''B''}[(I⊗Ψ) Ω₀(Ψ)]`.
    pub two_mu_t: StateFile,
    pub trace: f64,
    pub min_eigenvalue: f64,
    pub ppt_min_eigenvalue: f64,
    /// Separability follows from PPT (only claimed for total dimension ≤ 6).
    pub separable: bool,
    /// Distance to twice the fixed output of the map.
    pub expected_error: f64,
    /// Smallest eigenvalue of `μᵀ⊗H_{π/4} − Ω₀(H_{π/4})` with `μᵀ` from above.
    pub principal_min_eigenvalue: f64,
    pub passed: bool,
}

/// Builds `Ω₀` realizing `M₀(η)` with a separable fixed output and checks the
/// endgame identity on it.
pub fn fin2_check(eta: f64, fixed: &[FixedTerm]) -> Result<Fin2Report> {
    let map = m0_map(eta, fixed)?;
    let (da, db) = check_signature(&map)?;
    let psi = psi();
    let image = map.apply(&psi)?;
    let two = HermitianOperator::new(PartyDims::simple(da, db)?, bell_block(image.matrix(), da, db, psi.matrix())?)?;
    let tau = fixed.iter().fold(CMatrix::zeros(da * db, da * db), |acc, (q, a, b)| {
        acc + product_projector(a, b) * C64::new(*q, 0.0)
    });
    let expected_error = (two.matrix() - &tau * C64::new(2.0, 0.0)).camax();
    let min = two.min_eigenvalue()?;
    let ppt = two.ppt_min_eigenvalue()?;
    let separable = ppt >= -1e-10 && da * db <= 6 || da == 1 || db == 1;

    let mu_t = two.scaled(0.5);
    let principal = mu_t.bipartite_tensor(&h_theta(FRAC_PI_4)).matrix() - map.apply(&h_theta(FRAC_PI_4))?.matrix();
    let principal_min = HermitianOperator::new(PartyDims::new(vec![da, 2], vec![db, 2])?, principal)?.min_eigenvalue()?;

    let tol = Tolerances::default();
    Ok(Fin2Report {
        eta,
        two_mu_t: StateFile::from_operator(&two, false, "2 mu^T"),
        trace: two.trace(),
        min_eigenvalue: min,
        ppt_min_eigenvalue: ppt,
        separable,
        expected_error,
        principal_min_eigenvalue: principal_min,
        passed: min >= -tol.psd && separable && expected_error < 1e-12 && principal_min >= -1e-10,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DephasingCheck {
    pub max_error: f64,
    pub passed: bool,
}

/// `Σ_i Π_i X Π_i` has Bell weights `tr[Π_i X]`, on random operators.
pub fn dephasing_consistency(samples: usize, seed: u64) -> Result<DephasingCheck> {
    let mut rng = seeded_rng(seed);
    let bell = bell_projectors();
    let mut max_error: f64 = 0.0;
    for _ in 0..samples {
        let g = crate::states::ginibre(4, 4, &mut rng);
        let x = &g + g.adjoint();
        let dephased = bell
            .iter()
            .fold(CMatrix::zeros(4, 4), |acc, p| acc + p.operator.matrix() * &x * p.operator.matrix());
        let got = bell_weights(&dephased);
        let want = bell_weights(&x);
        // the dephased operator is Bell-diagonal: it equals the sum of its weights times projectors
        let rebuilt = bell
            .iter()
            .zip(got)
            .fold(CMatrix::zeros(4, 4), |acc, (p, w)| acc + p.operator.matrix() * C64::new(w, 0.0));
        for i in 0..4 {
            max_error = max_error.max((got[i] - want[i]).abs());
        }
        max_error = max_error.max((rebuilt - dephased).camax());
    }
    Ok(DephasingCheck {
        max_error,
        passed: max_error < 1e-12,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    /// Number of grid steps on `[0, π/4]`.
    pub grid: usize,
    pub seed: u64,
    /// Offset added to `N_θ` as `δ·(1, −1, 0, 0)`; zero outside fault tests.
    pub n_fault: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            grid: 10_000,
            seed: 0,
            n_fault: 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteCheck {
    pub name: String,
    pub passed: bool,
    pub detail: serde_json::Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub checks: Vec<SuiteCheck>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub name: String,
    pub decomposition: PolytopeDecomposition,
    /// Largest deviation between row sums of `M` and of `pD + qG`.
    pub row_sum_error: f64,
    pub omega_min_eigenvalue: f64,
    pub passed: bool,
}

fn check(name: &str, passed: bool, detail: impl Serialize) -> Result<SuiteCheck> {
    Ok(SuiteCheck {
        name: name.into(),
        passed,
        detail: serde_json::to_value(detail)?,
    })
}

pub fn corpus_entry(name: &str, map: &KrausMap) -> Result<CorpusEntry> {
    let omega = omega_matrices(map)?;
    let omega_min = omega
        .iter()
        .flatten()
        .map(|w| w.min_eigenvalue())
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let m = m_matrix(&omega).entries;
    let decomposition = decompose_pdqg(&m);
    let rec = decomposition.reconstruct();
    let row_sum_error = (0..4)
        .map(|i| (m[i].iter().sum::<f64>() - rec[i].iter().sum::<f64>()).abs())
        .fold(0.0, f64::max);
    let passed = decomposition.status == Feasibility::Feasible
        && decomposition.residual < DECOMPOSITION_TOL
        && row_sum_error < 1e-9
        && omega_min >= -1e-10;
    Ok(CorpusEntry {
        name: name.into(),
        decomposition,
        row_sum_error,
        omega_min_eigenvalue: omega_min,
        passed,
    })
}

/// Runs every instance check on the Bell-diagonal reduction.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let fault = cfg.n_fault;
    let n_of = move |t: f64| {
        let mut n = n_vector(t).components;
        n[0] += fault;
        n[1] -= fault;
        n
    };
    let tol = Tolerances::default();
    let mut checks = Vec::new();

    let conv = conv_n_sweep(cfg.grid, &n_of)?;
    checks.push(check("conv_n_extremality", conv.passed, &conv)?);

    let m0: Vec<M0Report> = [0.0, 0.3, 0.5, 1.0]
        .iter()
        .map(|&eta| m0_family_at(eta, n_of(FRAC_PI_4)))
        .collect::<Result<_>>()?;
    let m0_endpoints = m0_matrix(0.0)? == permutation_matrix(&[0, 1, 2, 3])
        && m0_matrix(1.0)? == permutation_matrix(&[0, 2, 1, 3]);
    checks.push(check(
        "m0_family",
        m0_endpoints && m0.iter().all(|r| r.passed),
        &m0,
    )?);

    let psi = psi_separability()?;
    checks.push(check("psi_separability", psi.passed && (psi.trace - 2.0).abs() < 1e-12 && psi.rank == 2, &psi)?);

    let corpus: Vec<CorpusEntry> = separable_map_corpus(cfg.seed)?
        .iter()
        .map(|(name, map)| corpus_entry(name, map))
        .collect::<Result<_>>()?;
    checks.push(check("corpus_decompositions", corpus.iter().all(|e| e.passed), &corpus)?);

    let known = [
        ("identity", decompose_pdqg(&permutation_matrix(&[0, 1, 2, 3])), 1.0, 0.0),
        ("g0", decompose_pdqg(&g0()), 0.0, 1.0),
        ("m0_half", decompose_pdqg(&m0_matrix(0.5)?), 1.0, 0.0),
    ];
    let known_ok = known.iter().all(|(_, d, p, q)| {
        d.status == Feasibility::Feasible && (d.p - p).abs() < 1e-8 && (d.q - q).abs() < 1e-8
    });
    let known_detail: Vec<_> = known.iter().map(|(n, d, _, _)| (n, d)).collect();
    checks.push(check("known_decompositions", known_ok, &known_detail)?);

    let unit = HermitianOperator::identity(PartyDims::simple(1, 1)?);
    let empty = verify_io_chain(&unit, &[], &tol)?;
    let single = verify_io_chain(
        &unit,
        &[MapTerm {
            map: m0_map(0.5, &trivial_fixed())?,
            theta: FRAC_PI_4,
        }],
        &tol,
    )?;
    let identity = local_unitary_map(&CMatrix::identity(2, 2), &CMatrix::identity(2, 2), &trivial_fixed())?;
    let doubled = verify_io_chain(
        &unit,
        &[
            MapTerm { map: identity.clone(), theta: FRAC_PI_4 },
            MapTerm { map: identity, theta: FRAC_PI_4 },
        ],
        &tol,
    )?;
    let io_ok = !empty.io_holds
        && empty.io_vector[0] < 0.0
        && empty.io_vector[1..].iter().all(|&v| v > 0.0)
        && single.io_holds
        && single.uk_holds
        && single.consistent
        && single.io_vector.iter().all(|v| v.abs() < 1e-12)
        && !doubled.p_total_within_one
        && doubled.consistent;
    checks.push(check(
        "io_chain",
        io_ok,
        serde_json::json!({ "empty": empty, "m0_single": single, "p_above_one": doubled }),
    )?);

    let mut fixed_rng = seeded_rng(cfg.seed ^ 0x5eed);
    let fin2: Vec<Fin2Report> = [(0.5, trivial_fixed()), (0.3, random_fixed(2, 2, &mut fixed_rng))]
        .iter()
        .map(|(eta, fixed)| fin2_check(*eta, fixed))
        .collect::<Result<_>>()?;
    checks.push(check("fin2", fin2.iter().all(|r| r.passed), &fin2)?);

    let deph = dephasing_consistency(100, cfg.seed)?;
    checks.push(check("bell_dephasing", deph.passed, &deph)?);

    let passed = checks.iter().all(|c| c.passed);
    Ok(SuiteReport {
        config: *cfg,
        checks,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    #[test]
    fn n_vector_values() {
        assert_eq!(n_vector(0.0).components, [0.0, 2.0, 0.0, 2.0]);
        let n = n_vector(FRAC_PI_4).components;
        for (a, b) in n.iter().zip([1.0 - SQRT_2, 1.0, 1.0, 1.0 + SQRT_2]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn vertex_counts() {
        assert_eq!(permutations().len(), 24);
        let g = g_vertices();
        assert_eq!(g.len(), 36);
        assert!(g.iter().any(|v| v.matrix == g0()));
    }

    #[test]
    fn identity_embedding_gives_identity_m() {
        let map = local_unitary_map(&CMatrix::identity(2, 2), &CMatrix::identity(2, 2), &trivial_fixed()).unwrap();
        let m = m_matrix(&omega_matrices(&map).unwrap()).entries;
        for i in 0..4 {
            for j in 0..4 {
                assert!((m[i][j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn m0_map_realizes_m0() {
        let map = m0_map(0.3, &trivial_fixed()).unwrap();
        let m = m_matrix(&omega_matrices(&map).unwrap()).entries;
        assert!(mat_sub_norm(&m, &m0_matrix(0.3).unwrap()) < 1e-14);
    }

    #[test]
    fn decompositions_of_known_vertices() {
        let id = decompose_pdqg(&permutation_matrix(&[0, 1, 2, 3]));
        assert_eq!(id.status, Feasibility::Feasible);
        assert!((id.p - 1.0).abs() < 1e-10 && id.q.abs() < 1e-10);
        let g = decompose_pdqg(&g0());
        assert_eq!(g.status, Feasibility::Feasible);
        assert!(g.p.abs() < 1e-10 && (g.q - 1.0).abs() < 1e-10);
        let half = decompose_pdqg(&m0_matrix(0.5).unwrap());
        assert!((half.p - 1.0).abs() < 1e-10);
    }

    #[test]
    fn signature_mismatch_is_rejected() {
        let map = KrausMap::new(vec![(CMatrix::identity(3, 3), CMatrix::identity(2, 2))], PartyDims::simple(3, 2).unwrap()).unwrap();
        assert!(matches!(omega_matrices(&map), Err(Error::Dimension(_))));
    }

    #[test]
    fn bell_diagonal_terms_reproduce_weights() {
        let w = [0.3, 0.2, 0.4, 0.1];
        let terms = bell_diagonal_product_terms(w).unwrap();
        let rho = terms
            .iter()
            .fold(CMatrix::zeros(4, 4), |acc, (q, a, b)| acc + product_projector(a, b) * C64::new(*q, 0.0));
        let target = crate::states::bell_diagonal(w);
        assert!((rho - target.matrix()).camax() < 1e-12);
        assert!(bell_diagonal_product_terms([0.6, 0.2, 0.1, 0.1]).is_err());
    }

    #[test]
    fn suite_passes_and_detects_fault() {
        let report = run_suite(&SuiteConfig::default()).unwrap();
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| &c.name).collect();
        assert!(report.passed, "{failed:?}");
        let faulty = run_suite(&SuiteConfig { n_fault: 1e-3, ..SuiteConfig::default() }).unwrap();
        assert!(!faulty.passed);
    }

    #[test]
    fn coarse_grid_widens_gap() {
        let fine = conv_n_extremality(10_000).unwrap();
        let coarse = conv_n_extremality(10).unwrap();
        assert!(fine.passed && coarse.passed);
        assert!(coarse.expected_gap > fine.expected_gap);
        assert_eq!(coarse.argmin_theta, FRAC_PI_4);
    }
}
