//! Two-setting, two-outcome Bell statistics and the CHSH functional.
//!
//! Outcome `a = 0` of a setting with Bloch vector `n` is the `+1` eigenspace of
//! `n·σ`, so `C_xy = P(a=b|x,y) − P(a≠b|x,y) = α_xᵀ R β_y` where
//! `R_ij = tr[ρ σ_i⊗σ_j]` is the correlation matrix.

use nalgebra::{Matrix2, Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{paulis, tensor, CMatrix, HermitianOperator, C64};
use crate::tolerance::VIOLATION_EPS;

const BLOCH_TOL: f64 = 1e-10;

fn require_two_qubit(rho: &HermitianOperator) -> Result<()> {
    if !rho.dims().is_two_qubit() {
        return Err(Error::Dimension(format!("expected a two-qubit operator, got {:?}", rho.dims())));
    }
    Ok(())
}

/// `P(a,b|x,y)` stored as `p[x][y][a][b]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Behavior {
    pub p: [[[[f64; 2]; 2]; 2]; 2],
}

impl Behavior {
    pub fn uniform() -> Self {
        Self { p: [[[[0.25; 2]; 2]; 2]; 2] }
    }

    /// Local deterministic strategy: Alice outputs `alice[x]`, Bob `bob[y]`.
    pub fn deterministic(alice: [u8; 2], bob: [u8; 2]) -> Self {
        let mut p = [[[[0.0; 2]; 2]; 2]; 2];
        for x in 0..2 {
            for y in 0..2 {
                p[x][y][alice[x] as usize][bob[y] as usize] = 1.0;
            }
        }
        Self { p }
    }

    pub fn prob(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[x][y][a][b]
    }

    /// Largest deviation from normalization and from no-signaling.
    pub fn consistency(&self) -> (f64, f64) {
        let mut norm_err = 0.0f64;
        let mut signal_err = 0.0f64;
        for x in 0..2 {
            for y in 0..2 {
                let s: f64 = self.p[x][y].iter().flatten().sum();
                norm_err = norm_err.max((s - 1.0).abs());
            }
        }
        for x in 0..2 {
            for a in 0..2 {
                let m0 = self.p[x][0][a][0] + self.p[x][0][a][1];
                let m1 = self.p[x][1][a][0] + self.p[x][1][a][1];
                signal_err = signal_err.max((m0 - m1).abs());
            }
        }
        for y in 0..2 {
            for b in 0..2 {
                let m0 = self.p[0][y][0][b] + self.p[0][y][1][b];
                let m1 = self.p[1][y][0][b] + self.p[1][y][1][b];
                signal_err = signal_err.max((m0 - m1).abs());
            }
        }
        (norm_err, signal_err)
    }

    pub fn relabel(&self, g: Relabeling) -> Self {
        let mut p = [[[[0.0; 2]; 2]; 2]; 2];
        for x in 0..2 {
            for y in 0..2 {
                let xs = x ^ g.swap_x as usize;
                let ys = y ^ g.swap_y as usize;
                for a in 0..2 {
                    for b in 0..2 {
                        let aa = a ^ g.flip_a[x] as usize;
                        let bb = b ^ g.flip_b[y] as usize;
                        p[x][y][a][b] = self.p[xs][ys][aa][bb];
                    }
                }
            }
        }
        Self { p }
    }
}

/// A local relabeling: per party, an optional swap of the two settings and an
/// optional outcome flip for each (new) setting. 64 elements in total.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relabeling {
    pub swap_x: bool,
    pub swap_y: bool,
    pub flip_a: [bool; 2],
    pub flip_b: [bool; 2],
}

impl Relabeling {
    pub fn all() -> impl Iterator<Item = Relabeling> {
        (0u8..64).map(|bits| {
            let b = |k: u8| bits >> k & 1 == 1;
            Relabeling {
                swap_x: b(0),
                swap_y: b(1),
                flip_a: [b(2), b(3)],
                flip_b: [b(4), b(5)],
            }
        })
    }
}

/// `C[x][y] = P(a=b|x,y) − P(a≠b|x,y)`.
pub fn correlators(p: &Behavior) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for (x, row) in c.iter_mut().enumerate() {
        for (y, cxy) in row.iter_mut().enumerate() {
            let q = &p.p[x][y];
            *cxy = q[0][0] + q[1][1] - q[0][1] - q[1][0];
        }
    }
    c
}

fn chsh_expression(c: &[[f64; 2]; 2]) -> f64 {
    c[0][0] + c[0][1] + c[1][0] - c[1][1]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshValue {
    /// `max_g |C00 + C01 + C10 − C11|` over local relabelings `g`.
    pub value: f64,
    pub relabeling: Relabeling,
    /// Whether a local hidden variable model exists (`value ≤ 2 + eps`).
    pub local: bool,
}

pub fn chsh_value(p: &Behavior) -> ChshValue {
    let mut best = (f64::NEG_INFINITY, Relabeling::default());
    for g in Relabeling::all() {
        let v = chsh_expression(&correlators(&p.relabel(g))).abs();
        if v > best.0 + 1e-15 {
            best = (v, g);
        }
    }
    ChshValue {
        value: best.0,
        relabeling: best.1,
        local: best.0 <= 2.0 + VIOLATION_EPS,
    }
}

/// Two settings per party as unit Bloch vectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub alice: [[f64; 3]; 2],
    pub bob: [[f64; 3]; 2],
}

impl Measurement {
    pub fn validate(&self) -> Result<()> {
        for v in self.alice.iter().chain(&self.bob) {
            let n = Vector3::from(*v).norm();
            if (n - 1.0).abs() > BLOCH_TOL {
                return Err(Error::NonUnitBloch(n));
            }
        }
        Ok(())
    }

    /// Settings in the x–z plane at the given angles from the z axis.
    pub fn planar(alice: [f64; 2], bob: [f64; 2]) -> Self {
        let v = |t: f64| [t.sin(), 0.0, t.cos()];
        Self {
            alice: [v(alice[0]), v(alice[1])],
            bob: [v(bob[0]), v(bob[1])],
        }
    }
}

/// `R_ij = tr[ρ σ_i⊗σ_j]` for `i, j ∈ {x, y, z}`.
pub fn correlation_matrix(rho: &HermitianOperator) -> Result<Matrix3<f64>> {
    require_two_qubit(rho)?;
    let s = paulis();
    Ok(Matrix3::from_fn(|i, j| rho.expectation(&tensor(&s[i + 1], &s[j + 1]))))
}

/// Local Bloch vectors `(tr[ρ σ_i⊗I], tr[ρ I⊗σ_i])`.
pub fn local_bloch(rho: &HermitianOperator) -> Result<(Vector3<f64>, Vector3<f64>)> {
    require_two_qubit(rho)?;
    let s = paulis();
    let a = Vector3::from_fn(|i, _| rho.expectation(&tensor(&s[i + 1], &s[0])));
    let b = Vector3::from_fn(|i, _| rho.expectation(&tensor(&s[0], &s[i + 1])));
    Ok((a, b))
}

pub fn behavior_from_state(rho: &HermitianOperator, m: &Measurement) -> Result<Behavior> {
    m.validate()?;
    let r = correlation_matrix(rho)?;
    let (ra, rb) = local_bloch(rho)?;
    let norm = rho.trace();
    let mut p = [[[[0.0; 2]; 2]; 2]; 2];
    for x in 0..2 {
        let al = Vector3::from(m.alice[x]);
        for y in 0..2 {
            let be = Vector3::from(m.bob[y]);
            let ea = al.dot(&ra);
            let eb = be.dot(&rb);
            let eab = al.dot(&(r * be));
            for a in 0..2 {
                let sa = if a == 0 { 1.0 } else { -1.0 };
                for b in 0..2 {
                    let sb = if b == 0 { 1.0 } else { -1.0 };
                    p[x][y][a][b] = (norm + sa * ea + sb * eb + sa * sb * eab) / (4.0 * norm);
                }
            }
        }
    }
    Ok(Behavior { p })
}

/// Outcome of the Horodecki criterion for a two-qubit state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Horodecki {
    pub mu1: f64,
    pub mu2: f64,
    /// `2 sqrt(μ1² + μ2²)`, the largest CHSH value reachable by projective measurements.
    pub chsh_max: f64,
    pub violation: bool,
}

/// Singular value decomposition `R = Σ_k μ_k p_k q_kᵀ` with `μ` descending and
/// a deterministic choice of singular vectors.
#[derive(Clone, Debug)]
pub struct CorrelationFrame {
    pub mu: [f64; 3],
    /// Columns `p_k`.
    pub alice_axes: Matrix3<f64>,
    /// Columns `q_k`.
    pub bob_axes: Matrix3<f64>,
}

fn rounded_key(v: &Vector3<f64>) -> [i64; 3] {
    std::array::from_fn(|i| (v[i] / 1e-9).round() as i64)
}

impl CorrelationFrame {
    pub fn new(r: &Matrix3<f64>) -> Self {
        let svd = r.svd(true, true);
        let u = svd.u.expect("requested U");
        let vt = svd.v_t.expect("requested V^T");
        let mut pairs: Vec<(f64, Vector3<f64>, Vector3<f64>)> = (0..3)
            .map(|k| {
                let mut p: Vector3<f64> = u.column(k).into_owned();
                let mut q: Vector3<f64> = vt.row(k).transpose();
                // sign convention: first non-negligible entry of q is positive
                if let Some(&lead) = q.iter().find(|x| x.abs() > 1e-9) {
                    if lead < 0.0 {
                        p = -p;
                        q = -q;
                    }
                }
                (svd.singular_values[k], p, q)
            })
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        // within a degenerate block, order by rounded entries of q
        let mut start = 0;
        while start < 3 {
            let mut end = start + 1;
            while end < 3 && (pairs[start].0 - pairs[end].0).abs() < 1e-9 {
                end += 1;
            }
            pairs[start..end].sort_by(|a, b| rounded_key(&b.2).cmp(&rounded_key(&a.2)));
            start = end;
        }
        Self {
            mu: [pairs[0].0, pairs[1].0, pairs[2].0],
            alice_axes: Matrix3::from_columns(&[pairs[0].1, pairs[1].1, pairs[2].1]),
            bob_axes: Matrix3::from_columns(&[pairs[0].2, pairs[1].2, pairs[2].2]),
        }
    }
}

pub fn horodecki(rho: &HermitianOperator) -> Result<Horodecki> {
    let r = correlation_matrix(rho)? / rho.trace();
    let mut s: Vec<f64> = r.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let (mu1, mu2) = (s[0], s[1]);
    Ok(Horodecki {
        mu1,
        mu2,
        chsh_max: 2.0 * (mu1 * mu1 + mu2 * mu2).sqrt(),
        violation: mu1 * mu1 + mu2 * mu2 > 1.0 + VIOLATION_EPS,
    })
}

/// Settings that reach the Horodecki bound: Alice measures along the top two
/// left singular vectors, Bob along `(μ1 q1 ± μ2 q2)/‖·‖`.
pub fn optimal_measurements(rho: &HermitianOperator) -> Result<Measurement> {
    let r = correlation_matrix(rho)?;
    let frame = CorrelationFrame::new(&r);
    let [mu1, mu2, _] = frame.mu;
    let p1 = frame.alice_axes.column(0).into_owned();
    let p2 = frame.alice_axes.column(1).into_owned();
    let q1 = frame.bob_axes.column(0).into_owned();
    let q2 = frame.bob_axes.column(1).into_owned();
    let n = (mu1 * mu1 + mu2 * mu2).sqrt();
    let (b0, b1) = if n > 1e-12 {
        ((q1 * mu1 + q2 * mu2) / n, (q1 * mu1 - q2 * mu2) / n)
    } else {
        (q1, q2)
    };
    let arr = |v: Vector3<f64>| -> [f64; 3] {
        let v = v.normalize();
        [v[0], v[1], v[2]]
    };
    Ok(Measurement {
        alice: [arr(p1), arr(p2)],
        bob: [arr(b0), arr(b1)],
    })
}

/// `U` with `U (n·σ) U^† = (O n)·σ` for a rotation `O ∈ SO(3)`.
pub fn su2_from_rotation(o: &Matrix3<f64>) -> CMatrix {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*o));
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    let m = Matrix2::new(
        C64::new(w, -z),
        C64::new(-y, -x),
        C64::new(y, -x),
        C64::new(w, z),
    );
    CMatrix::from_iterator(2, 2, m.iter().copied())
}

/// Local unitaries `(U, V)` bringing a two-qubit operator to the frame where
/// its correlation matrix is diagonal with `R_xx = μ1` and `R_zz = μ2`.
#[derive(Clone, Debug)]
pub struct DiagonalFrame {
    pub u: CMatrix,
    pub v: CMatrix,
    pub mu1: f64,
    pub mu2: f64,
}

pub fn diagonalizing_unitaries(rho: &HermitianOperator) -> Result<DiagonalFrame> {
    let r = correlation_matrix(rho)? / rho.trace();
    let frame = CorrelationFrame::new(&r);
    // rows of the rotation: x <- axis 1, y <- ±axis 3, z <- axis 2
    let rotation = |axes: &Matrix3<f64>| -> Matrix3<f64> {
        let mut o = Matrix3::from_rows(&[
            axes.column(0).transpose(),
            axes.column(2).transpose(),
            axes.column(1).transpose(),
        ]);
        if o.determinant() < 0.0 {
            o.row_mut(1).neg_mut();
        }
        o
    };
    Ok(DiagonalFrame {
        u: su2_from_rotation(&rotation(&frame.alice_axes)),
        v: su2_from_rotation(&rotation(&frame.bob_axes)),
        mu1: frame.mu[0],
        mu2: frame.mu[1],
    })
}
