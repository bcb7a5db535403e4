//! Dense complex operator algebra on small bipartite Hilbert spaces.
//!
//! Every operator lives on `H_A ⊗ H_B` where each party may itself be a product
//! of factors (for example `H_A' ⊗ H_A''`). The product basis is Alice-major and
//! row-major across factors: with factor dimensions `[a0, a1, .., b0, b1, ..]` a
//! basis index is the mixed-radix number whose most significant digit is the
//! first Alice factor. For a plain two-party operator this reduces to
//! `row = a * dim_b + b`.

use std::ops::Deref;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::tolerance::{Tolerances, HERMITIAN_REJECT};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Factor dimensions of each party.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PartyDims {
    alice: Vec<usize>,
    bob: Vec<usize>,
}

impl PartyDims {
    pub fn new(alice: Vec<usize>, bob: Vec<usize>) -> Result<Self> {
        if alice.is_empty() || bob.is_empty() {
            return Err(Error::Dimension("each party needs at least one factor".into()));
        }
        if alice.iter().chain(&bob).any(|&d| d == 0) {
            return Err(Error::Dimension("factor dimension 0".into()));
        }
        Ok(Self { alice, bob })
    }

    /// One factor per party.
    pub fn simple(dim_a: usize, dim_b: usize) -> Result<Self> {
        Self::new(vec![dim_a], vec![dim_b])
    }

    pub fn qubits() -> Self {
        Self {
            alice: vec![2],
            bob: vec![2],
        }
    }

    pub fn alice(&self) -> &[usize] {
        &self.alice
    }

    pub fn bob(&self) -> &[usize] {
        &self.bob
    }

    pub fn dim_a(&self) -> usize {
        self.alice.iter().product()
    }

    pub fn dim_b(&self) -> usize {
        self.bob.iter().product()
    }

    pub fn total(&self) -> usize {
        self.dim_a() * self.dim_b()
    }

    /// All factors, Alice's first.
    pub fn factors(&self) -> Vec<usize> {
        self.alice.iter().chain(&self.bob).copied().collect()
    }

    pub fn num_factors(&self) -> usize {
        self.alice.len() + self.bob.len()
    }

    pub fn is_two_qubit(&self) -> bool {
        self.dim_a() == 2 && self.dim_b() == 2
    }

    /// Same total party dimensions, single factor each.
    pub fn flattened(&self) -> Self {
        Self {
            alice: vec![self.dim_a()],
            bob: vec![self.dim_b()],
        }
    }
}

/// Kronecker product `x ⊗ y`; `x` carries the most significant index.
pub fn tensor(x: &CMatrix, y: &CMatrix) -> CMatrix {
    x.kronecker(y)
}

fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
}

fn compose(digits: &[usize], dims: &[usize]) -> usize {
    digits
        .iter()
        .zip(dims)
        .fold(0, |acc, (&d, &n)| acc * n + d)
}

fn check_square(mat: &CMatrix, dims: &[usize]) -> Result<usize> {
    let n: usize = dims.iter().product();
    if mat.nrows() != n || mat.ncols() != n {
        return Err(Error::Dimension(format!(
            "matrix is {}x{}, factors {:?} give {}",
            mat.nrows(),
            mat.ncols(),
            dims,
            n
        )));
    }
    Ok(n)
}

/// Reorders tensor factors: factor `k` of the result is factor `perm[k]` of the input.
pub fn permute_factors(mat: &CMatrix, dims: &[usize], perm: &[usize]) -> Result<CMatrix> {
    let n = check_square(mat, dims)?;
    let mut seen = vec![false; dims.len()];
    if perm.len() != dims.len() || perm.iter().any(|&p| p >= dims.len() || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::Dimension(format!("{perm:?} is not a permutation of {} factors", dims.len())));
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    // map[old index] = new index
    let mut map = vec![0usize; n];
    let mut old = vec![0usize; dims.len()];
    let mut new = vec![0usize; dims.len()];
    for (i, slot) in map.iter_mut().enumerate() {
        digits(i, dims, &mut old);
        for (k, &p) in perm.iter().enumerate() {
            new[k] = old[p];
        }
        *slot = compose(&new, &new_dims);
    }
    let mut out = CMatrix::zeros(n, n);
    for c in 0..n {
        for r in 0..n {
            out[(map[r], map[c])] = mat[(r, c)];
        }
    }
    Ok(out)
}

/// Traces out every factor whose mask entry is `true`.
pub fn partial_trace_factors(mat: &CMatrix, dims: &[usize], trace_out: &[bool]) -> Result<CMatrix> {
    let n = check_square(mat, dims)?;
    if trace_out.len() != dims.len() {
        return Err(Error::Dimension(format!(
            "mask of length {} for {} factors",
            trace_out.len(),
            dims.len()
        )));
    }
    let kept: Vec<usize> = (0..dims.len()).filter(|&k| !trace_out[k]).collect();
    let kept_dims: Vec<usize> = kept.iter().map(|&k| dims[k]).collect();
    let m: usize = kept_dims.iter().product();
    let mut out = CMatrix::zeros(m, m);
    let mut dr = vec![0usize; dims.len()];
    let mut dc = vec![0usize; dims.len()];
    let mut kr = vec![0usize; kept.len()];
    let mut kc = vec![0usize; kept.len()];
    for r in 0..n {
        digits(r, dims, &mut dr);
        for c in 0..n {
            digits(c, dims, &mut dc);
            if (0..dims.len()).any(|k| trace_out[k] && dr[k] != dc[k]) {
                continue;
            }
            for (j, &k) in kept.iter().enumerate() {
                kr[j] = dr[k];
                kc[j] = dc[k];
            }
            out[(compose(&kr, &kept_dims), compose(&kc, &kept_dims))] += mat[(r, c)];
        }
    }
    Ok(out)
}

/// Transposes the factors whose mask entry is `true`, leaving the rest alone.
pub fn transpose_factors(mat: &CMatrix, dims: &[usize], mask: &[bool]) -> Result<CMatrix> {
    let n = check_square(mat, dims)?;
    if mask.len() != dims.len() {
        return Err(Error::Dimension(format!(
            "mask of length {} for {} factors",
            mask.len(),
            dims.len()
        )));
    }
    let mut out = CMatrix::zeros(n, n);
    let mut dr = vec![0usize; dims.len()];
    let mut dc = vec![0usize; dims.len()];
    let mut tr = vec![0usize; dims.len()];
    let mut tc = vec![0usize; dims.len()];
    for r in 0..n {
        digits(r, dims, &mut dr);
        for c in 0..n {
            digits(c, dims, &mut dc);
            for k in 0..dims.len() {
                (tr[k], tc[k]) = if mask[k] { (dc[k], dr[k]) } else { (dr[k], dc[k]) };
            }
            out[(compose(&tr, dims), compose(&tc, dims))] = mat[(r, c)];
        }
    }
    Ok(out)
}

/// Largest entry of `|(M - M^†)/2|`.
pub fn anti_hermitian_norm(mat: &CMatrix) -> f64 {
    let n = mat.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max(((mat[(r, c)] - mat[(c, r)].conj()) * 0.5).norm());
        }
    }
    worst
}

fn symmetrize(mat: &CMatrix) -> CMatrix {
    (mat + mat.adjoint()) * C64::new(0.5, 0.0)
}

/// `Σ_ij x_ij* y_ij`, i.e. `tr[x^† y]`.
pub fn hs_inner(x: &CMatrix, y: &CMatrix) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Ascending eigenvalues and matching eigenvectors (columns).
pub fn eigh(mat: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let eig = SymmetricEigen::new(symmetrize(mat));
    let n = mat.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped to 0).
pub fn project_psd(mat: &CMatrix) -> Result<CMatrix> {
    let (values, vectors) = eigh(mat)?;
    let mut scaled = vectors.clone();
    for (k, &v) in values.iter().enumerate() {
        scaled.column_mut(k).scale_mut(v.max(0.0));
    }
    Ok(symmetrize(&(scaled * vectors.adjoint())))
}

/// A Hermitian matrix together with the factor structure of its space.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    dims: PartyDims,
    mat: CMatrix,
}

impl HermitianOperator {
    /// Validates and symmetrizes `mat`. Rejects non-finite entries, shape
    /// mismatches and anti-Hermitian parts above `1e-8`.
    pub fn new(dims: PartyDims, mat: CMatrix) -> Result<Self> {
        check_square(&mat, &dims.factors())?;
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let skew = anti_hermitian_norm(&mat);
        if skew > HERMITIAN_REJECT {
            return Err(Error::NotHermitian(skew));
        }
        Ok(Self {
            dims,
            mat: symmetrize(&mat),
        })
    }

    /// For operators Hermitian by construction; only symmetrizes.
    pub(crate) fn from_hermitian(dims: PartyDims, mat: CMatrix) -> Self {
        debug_assert_eq!(mat.nrows(), dims.total());
        Self {
            dims,
            mat: symmetrize(&mat),
        }
    }

    pub fn identity(dims: PartyDims) -> Self {
        let n = dims.total();
        Self {
            dims,
            mat: CMatrix::identity(n, n),
        }
    }

    /// `|v⟩⟨v|`.
    pub fn projector(dims: PartyDims, v: &CVector) -> Result<Self> {
        if v.len() != dims.total() {
            return Err(Error::Dimension(format!("vector of length {} for dims {:?}", v.len(), dims)));
        }
        Ok(Self::from_hermitian(dims, v * v.adjoint()))
    }

    pub fn dims(&self) -> &PartyDims {
        &self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    /// `tr[self · other]` (real for Hermitian arguments).
    pub fn expectation(&self, other: &CMatrix) -> f64 {
        // tr[XY] = Σ conj(X_ji)... with X Hermitian equals ⟨X, Y⟩_HS
        hs_inner(&self.mat, other).re
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dims: self.dims.clone(),
            mat: &self.mat * C64::new(s, 0.0),
        }
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(eigh(&self.mat)?.0)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(*self.eigenvalues()?.last().expect("non-empty operator"))
    }

    /// Operator on `(A1 A2) ⊗ (B1 B2)`: the Kronecker product with the
    /// factors regrouped so each party keeps its own subsystems.
    pub fn bipartite_tensor(&self, other: &HermitianOperator) -> Self {
        let raw = tensor(&self.mat, &other.mat);
        let (na, nb) = (self.dims.alice.len(), self.dims.bob.len());
        let (ma, mb) = (other.dims.alice.len(), other.dims.bob.len());
        let raw_dims: Vec<usize> = self.dims.factors().into_iter().chain(other.dims.factors()).collect();
        // raw order: A1.. B1.. A2.. B2..
        let perm: Vec<usize> = (0..na)
            .chain(na + nb..na + nb + ma)
            .chain(na..na + nb)
            .chain(na + nb + ma..na + nb + ma + mb)
            .collect();
        let mat = permute_factors(&raw, &raw_dims, &perm).expect("consistent factor layout");
        let dims = PartyDims {
            alice: self.dims.alice.iter().chain(&other.dims.alice).copied().collect(),
            bob: self.dims.bob.iter().chain(&other.dims.bob).copied().collect(),
        };
        Self { dims, mat }
    }

    /// Traces out the factors flagged in `mask` (Alice's factors first, then
    /// Bob's). A party that loses every factor is left with a single factor of
    /// dimension 1.
    pub fn partial_trace(&self, mask: &[bool]) -> Result<Self> {
        let factors = self.dims.factors();
        let mat = partial_trace_factors(&self.mat, &factors, mask)?;
        let na = self.dims.alice.len();
        let keep = |range: std::ops::Range<usize>| -> Vec<usize> {
            let v: Vec<usize> = range.filter(|&k| !mask[k]).map(|k| factors[k]).collect();
            if v.is_empty() {
                vec![1]
            } else {
                v
            }
        };
        let dims = PartyDims {
            alice: keep(0..na),
            bob: keep(na..factors.len()),
        };
        Ok(Self::from_hermitian(dims, mat))
    }

    /// Transpose on every one of Bob's factors.
    pub fn partial_transpose(&self) -> Self {
        let na = self.dims.alice.len();
        let mask: Vec<bool> = (0..self.dims.num_factors()).map(|k| k >= na).collect();
        self.transpose_masked(&mask)
    }

    /// Transpose on every one of Alice's factors.
    pub fn partial_transpose_alice(&self) -> Self {
        let na = self.dims.alice.len();
        let mask: Vec<bool> = (0..self.dims.num_factors()).map(|k| k < na).collect();
        self.transpose_masked(&mask)
    }

    fn transpose_masked(&self, mask: &[bool]) -> Self {
        let mat = transpose_factors(&self.mat, &self.dims.factors(), mask).expect("mask matches factors");
        Self {
            dims: self.dims.clone(),
            mat,
        }
    }

    /// Full transpose (equals the entrywise complex conjugate for Hermitian operators).
    pub fn transpose(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            mat: self.mat.transpose(),
        }
    }

    /// Minimum eigenvalue of the partial transpose; non-negative iff PPT.
    pub fn ppt_min_eigenvalue(&self) -> Result<f64> {
        self.partial_transpose().min_eigenvalue()
    }

    pub fn is_psd(&self, tol: &Tolerances) -> Result<bool> {
        Ok(self.min_eigenvalue()? >= -tol.psd)
    }

    pub fn is_ppt(&self, tol: &Tolerances) -> Result<bool> {
        Ok(self.ppt_min_eigenvalue()? >= -tol.psd)
    }

    /// `k · self · k^†` on a space with factor structure `out_dims`.
    pub fn conjugate(&self, k: &CMatrix, out_dims: PartyDims) -> Result<Self> {
        if k.ncols() != self.dim() || k.nrows() != out_dims.total() {
            return Err(Error::Dimension(format!(
                "conjugating {}x{} operator by {}x{} matrix into dims {:?}",
                self.dim(),
                self.dim(),
                k.nrows(),
                k.ncols(),
                out_dims
            )));
        }
        Ok(Self::from_hermitian(out_dims, k * &self.mat * k.adjoint()))
    }

    pub fn with_dims(&self, dims: PartyDims) -> Result<Self> {
        if dims.total() != self.dim() {
            return Err(Error::Dimension(format!("cannot view {}x{} operator as {:?}", self.dim(), self.dim(), dims)));
        }
        Ok(Self {
            dims,
            mat: self.mat.clone(),
        })
    }
}

/// Positive semi-definite Hermitian operator, unit trace unless flagged otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    op: HermitianOperator,
    normalized: bool,
}

impl DensityOperator {
    pub fn new(op: HermitianOperator, tol: &Tolerances) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > tol.trace {
            return Err(Error::NotNormalized(tr));
        }
        Self::check_psd(&op, tol)?;
        Ok(Self { op, normalized: true })
    }

    /// PSD operator without the unit-trace requirement.
    pub fn unnormalized(op: HermitianOperator, tol: &Tolerances) -> Result<Self> {
        Self::check_psd(&op, tol)?;
        Ok(Self { op, normalized: false })
    }

    /// Divides by the trace.
    pub fn normalize(op: HermitianOperator, tol: &Tolerances) -> Result<Self> {
        let tr = op.trace();
        if !(tr > 0.0) {
            return Err(Error::NotNormalized(tr));
        }
        Self::new(op.scaled(1.0 / tr), tol)
    }

    pub(crate) fn from_trusted(op: HermitianOperator) -> Self {
        Self { op, normalized: true }
    }

    fn check_psd(op: &HermitianOperator, tol: &Tolerances) -> Result<()> {
        let min = op.min_eigenvalue()?;
        if min < -tol.psd {
            return Err(Error::NotPositive(min));
        }
        Ok(())
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn into_operator(self) -> HermitianOperator {
        self.op
    }

    pub fn tensor(&self, other: &DensityOperator) -> Self {
        Self {
            op: self.op.bipartite_tensor(&other.op),
            normalized: self.normalized && other.normalized,
        }
    }
}

impl Deref for DensityOperator {
    type Target = HermitianOperator;

    fn deref(&self) -> &HermitianOperator {
        &self.op
    }
}

/// Separable map `X ↦ Σ_i (A_i ⊗ B_i) X (A_i ⊗ B_i)^†`.
#[derive(Clone, Debug)]
pub struct KrausMap {
    pairs: Vec<(CMatrix, CMatrix)>,
    out_dims: PartyDims,
}

impl KrausMap {
    pub fn new(pairs: Vec<(CMatrix, CMatrix)>, out_dims: PartyDims) -> Result<Self> {
        let Some((a0, b0)) = pairs.first() else {
            return Err(Error::Dimension("empty Kraus list".into()));
        };
        if pairs
            .iter()
            .any(|(a, b)| a.shape() != a0.shape() || b.shape() != b0.shape())
        {
            return Err(Error::Dimension("Kraus operators of one party must share a shape".into()));
        }
        if a0.nrows() != out_dims.dim_a() || b0.nrows() != out_dims.dim_b() {
            return Err(Error::Dimension(format!(
                "Kraus outputs {}x{} do not match {:?}",
                a0.nrows(),
                b0.nrows(),
                out_dims
            )));
        }
        Ok(Self { pairs, out_dims })
    }

    pub fn pairs(&self) -> &[(CMatrix, CMatrix)] {
        &self.pairs
    }

    pub fn in_dims(&self) -> (usize, usize) {
        (self.pairs[0].0.ncols(), self.pairs[0].1.ncols())
    }

    pub fn out_dims(&self) -> &PartyDims {
        &self.out_dims
    }

    /// Scales every Kraus operator of Alice by `sqrt(w)`; the map scales by `w`.
    pub fn weighted(mut self, w: f64) -> Self {
        let s = C64::new(w.sqrt(), 0.0);
        for (a, _) in &mut self.pairs {
            *a *= s;
        }
        self
    }

    /// Union of Kraus lists (sum of maps).
    pub fn sum(mut self, other: KrausMap) -> Result<Self> {
        self.pairs.extend(other.pairs);
        Self::new(self.pairs, self.out_dims)
    }

    pub fn apply(&self, x: &HermitianOperator) -> Result<HermitianOperator> {
        let (da, db) = self.in_dims();
        if x.dims().dim_a() != da || x.dims().dim_b() != db {
            return Err(Error::Dimension(format!(
                "map expects {da}x{db} input, got {:?}",
                x.dims()
            )));
        }
        let n = self.out_dims.total();
        let mut acc = CMatrix::zeros(n, n);
        for (a, b) in &self.pairs {
            let k = tensor(a, b);
            acc += &k * x.matrix() * k.adjoint();
        }
        Ok(HermitianOperator::from_hermitian(self.out_dims.clone(), acc))
    }
}

pub fn min_eigenvalue(x: &HermitianOperator) -> Result<f64> {
    x.min_eigenvalue()
}

pub fn apply_kraus(map: &KrausMap, x: &HermitianOperator) -> Result<HermitianOperator> {
    map.apply(x)
}

/// Column vector as a `d × 1` matrix.
pub fn ket_matrix(v: &CVector) -> CMatrix {
    CMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

/// Pauli matrices `[I, σ_x, σ_y, σ_z]`.
pub fn paulis() -> [CMatrix; 4] {
    let z = ZERO;
    let o = ONE;
    let i = C64::new(0.0, 1.0);
    [
        CMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    ]
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> f64 {
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}
