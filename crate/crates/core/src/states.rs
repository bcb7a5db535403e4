//! Named states, random states, and the `.qstate.json` file format.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{CMatrix, CVector, DensityOperator, HermitianOperator, PartyDims, C64, ONE};
use crate::tolerance::Tolerances;

pub const STATE_FILE_EXTENSION: &str = ".qstate.json";

/// Bell vectors in the fixed order
/// `Φ1,2 = (|00⟩ ± |11⟩)/√2`, `Φ3,4 = (|01⟩ ± |10⟩)/√2`.
pub fn bell_vectors() -> [CVector; 4] {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let v = |a: [f64; 4]| CVector::from_iterator(4, a.iter().map(|&x| h * x));
    [
        v([1.0, 0.0, 0.0, 1.0]),
        v([1.0, 0.0, 0.0, -1.0]),
        v([0.0, 1.0, 1.0, 0.0]),
        v([0.0, 1.0, -1.0, 0.0]),
    ]
}

/// Rank-one projector onto a Bell vector; `index` runs over 1..=4.
#[derive(Clone, Debug)]
pub struct BellProjector {
    pub index: usize,
    pub operator: HermitianOperator,
}

pub fn bell_projectors() -> [BellProjector; 4] {
    let vs = bell_vectors();
    std::array::from_fn(|i| BellProjector {
        index: i + 1,
        operator: HermitianOperator::projector(PartyDims::qubits(), &vs[i]).expect("4-dim vector"),
    })
}

/// Both halves of [`bell_basis`] at once.
pub fn bell_basis() -> ([CVector; 4], [BellProjector; 4]) {
    (bell_vectors(), bell_projectors())
}

/// Bell-basis weights `⟨Φ_i|X|Φ_i⟩` of a two-qubit operator.
pub fn bell_weights(x: &CMatrix) -> [f64; 4] {
    let vs = bell_vectors();
    std::array::from_fn(|i| (vs[i].adjoint() * x * &vs[i])[(0, 0)].re)
}

/// Bell-diagonal operator `Σ_i w_i Π_i`.
pub fn bell_diagonal(weights: [f64; 4]) -> HermitianOperator {
    let vs = bell_vectors();
    let mut m = CMatrix::zeros(4, 4);
    for (v, w) in vs.iter().zip(weights) {
        m += v * v.adjoint() * C64::new(w, 0.0);
    }
    HermitianOperator::from_hermitian(PartyDims::qubits(), m)
}

/// `p Π1 + (1-p) I/4`.
pub fn werner(p: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
            range: "[0, 1]",
        });
    }
    let q = (1.0 - p) / 4.0;
    Ok(DensityOperator::from_trusted(bell_diagonal([p + q, q, q, q])))
}

/// `(1/√d) Σ_k |kk⟩`.
pub fn maximally_entangled(d: usize) -> Result<CVector> {
    if d < 2 {
        return Err(Error::OutOfRange {
            name: "d",
            value: d as f64,
            range: "d >= 2",
        });
    }
    let mut v = CVector::zeros(d * d);
    let amp = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    for k in 0..d {
        v[k * d + k] = amp;
    }
    Ok(v)
}

/// Pure product state `|a⟩⊗|b⟩` (vectors are normalized first).
pub fn product_pure(a: &CVector, b: &CVector) -> Result<DensityOperator> {
    let a = a.normalize();
    let b = b.normalize();
    let dims = PartyDims::simple(a.len(), b.len())?;
    let v = a.kronecker(&b);
    Ok(DensityOperator::from_trusted(HermitianOperator::projector(dims, &v)?))
}

/// Computational basis vector `|k⟩` in dimension `d`.
pub fn ket(d: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(d);
    v[k] = ONE;
    v
}

pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Matrix of independent standard complex Gaussians.
pub fn ginibre<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    })
}

/// Haar-like random pure vector (normalized complex Gaussian).
pub fn random_vector<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    let g = ginibre(d, 1, rng);
    CVector::from_column_slice(g.as_slice()).normalize()
}

/// `G G^† / tr(G G^†)` for a square Ginibre `G`.
pub fn random_density_with<R: rand::Rng + ?Sized>(dims: &PartyDims, rng: &mut R) -> DensityOperator {
    let n = dims.total();
    let g = ginibre(n, n, rng);
    let gg = &g * g.adjoint();
    let tr = gg.trace().re;
    DensityOperator::from_trusted(HermitianOperator::from_hermitian(dims.clone(), gg / C64::new(tr, 0.0)))
}

pub fn random_density(dims: &PartyDims, seed: u64) -> DensityOperator {
    random_density_with(dims, &mut seeded_rng(seed))
}

/// Convex mixture of `terms` random pure product states with Dirichlet-like weights.
pub fn random_separable(dim_a: usize, dim_b: usize, terms: usize, seed: u64) -> Result<DensityOperator> {
    use rand::Rng;
    let mut rng = seeded_rng(seed);
    let dims = PartyDims::simple(dim_a, dim_b)?;
    let n = dims.total();
    let mut acc = CMatrix::zeros(n, n);
    let mut total = 0.0;
    for _ in 0..terms.max(1) {
        let w: f64 = rng.random::<f64>() + 1e-3;
        let a = random_vector(dim_a, &mut rng);
        let b = random_vector(dim_b, &mut rng);
        let v = a.kronecker(&b);
        acc += &v * v.adjoint() * C64::new(w, 0.0);
        total += w;
    }
    Ok(DensityOperator::from_trusted(HermitianOperator::from_hermitian(
        dims,
        acc / C64::new(total, 0.0),
    )))
}

/// On-disk state: `{"party_dims": [[..],[..]], "matrix": [[[re,im],..],..],
/// "normalized": bool, "label": str}`.
///
/// Doubles go through the shortest round-trip decimal representation, so a
/// write followed by a read reproduces every entry bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub party_dims: Vec<Vec<usize>>,
    pub matrix: Vec<Vec<[f64; 2]>>,
    #[serde(default = "default_normalized")]
    pub normalized: bool,
    #[serde(default)]
    pub label: String,
}

fn default_normalized() -> bool {
    true
}

impl StateFile {
    pub fn from_operator(op: &HermitianOperator, normalized: bool, label: impl Into<String>) -> Self {
        let m = op.matrix();
        Self {
            party_dims: vec![op.dims().alice().to_vec(), op.dims().bob().to_vec()],
            matrix: (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
                .collect(),
            normalized,
            label: label.into(),
        }
    }

    pub fn from_density(rho: &DensityOperator, label: impl Into<String>) -> Self {
        Self::from_operator(rho.operator(), rho.is_normalized(), label)
    }

    pub fn dims(&self) -> Result<PartyDims> {
        match self.party_dims.as_slice() {
            [a, b] => PartyDims::new(a.clone(), b.clone()),
            _ => Err(Error::Format(format!(
                "party_dims must list exactly two parties, found {}",
                self.party_dims.len()
            ))),
        }
    }

    pub fn to_operator(&self) -> Result<HermitianOperator> {
        let dims = self.dims()?;
        let n = dims.total();
        if self.matrix.len() != n || self.matrix.iter().any(|row| row.len() != n) {
            return Err(Error::Format(format!("matrix must be {n}x{n} for party_dims {:?}", self.party_dims)));
        }
        let m = CMatrix::from_fn(n, n, |r, c| {
            let [re, im] = self.matrix[r][c];
            C64::new(re, im)
        });
        HermitianOperator::new(dims, m)
    }

    /// Validated density operator; unit trace is required only when `normalized` is set.
    pub fn to_density(&self, tol: &Tolerances) -> Result<DensityOperator> {
        let op = self.to_operator()?;
        if self.normalized {
            DensityOperator::new(op, tol)
        } else {
            DensityOperator::unnormalized(op, tol)
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

/// `|0…0⟩` on `d_a ⊗ d_b`.
pub fn zero_product(dim_a: usize, dim_b: usize) -> Result<DensityOperator> {
    product_pure(&ket(dim_a, 0), &ket(dim_b, 0))
}
