//! Numeric policy shared by every module.
//!
//! The algebra is exact, but in floating point every comparison against
//! zero or one goes through one of these thresholds. Callers that need tighter
//! or looser checks build their own [`Tolerances`] and pass it down.

use serde::{Deserialize, Serialize};

/// Largest anti-Hermitian part (max-abs) accepted by
/// [`HermitianOperator::new`](crate::qcore::HermitianOperator::new) before
/// symmetrization.
pub const HERMITIAN_REJECT: f64 = 1e-8;

/// Margin above the CHSH bound (or the unit circle) before a violation is flagged.
pub const VIOLATION_EPS: f64 = 1e-9;

/// A witness value must fall below `-CERT_EPS` to count as a certificate.
pub const CERT_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Hermiticity checks on computed operators.
    pub herm: f64,
    /// Eigenvalue floor for positivity (PSD and PPT checks).
    pub psd: f64,
    /// Generic equality between computed quantities.
    pub eq: f64,
    /// Unit-trace check on density operators.
    pub trace: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-10,
            psd: 1e-10,
            eq: 1e-8,
            trace: 1e-10,
        }
    }
}
