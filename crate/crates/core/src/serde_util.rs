//! Serde adapters for complex matrices as nested `[re, im]` arrays.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::qcore::{CMatrix, C64};

pub fn to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix, String> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("ragged complex matrix".into());
    }
    Ok(CMatrix::from_fn(nrows, ncols, |r, c| C64::new(rows[r][c][0], rows[r][c][1])))
}

/// `#[serde(with = "crate::serde_util::complex_matrix")]`
pub mod complex_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}
