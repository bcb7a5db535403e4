//! CHSH violation of bipartite states under local filtering.
//!
//! The crate is organised bottom-up:
//!
//! * [`qcore`] dense operator algebra on (multi-factor) bipartite spaces,
//! * [`states`] named and random states plus the `.qstate.json` format,
//! * [`chsh`] Bell statistics, the CHSH functional and the Horodecki criterion,
//! * [`filtering`] the `H_θ` witness family and the filtered-CHSH search,
//! * [`activation`] ancilla construction that turns hidden nonlocality into a
//!   CHSH violation, backed by a PPT-cone solver,
//! * [`belldiag`] checks on Bell-diagonal maps: `N_θ` geometry, `ω`/`M`
//!   matrices and their `pD + qG` decompositions.

pub mod activation;
pub mod belldiag;
pub mod chsh;
pub mod error;
pub mod filtering;
pub mod nnls;
pub mod optim;
pub mod qcore;
pub mod serde_util;
pub mod states;
pub mod tolerance;

pub use error::{Error, Result};
pub use tolerance::Tolerances;
