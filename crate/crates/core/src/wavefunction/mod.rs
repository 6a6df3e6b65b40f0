//! Slater–Jastrow trial wavefunctions Ψ_T = Ψ_A · e^J.
//!
//! Values are carried in the log domain as `(ln|Ψ|, sign)`. Multi-determinant
//! sums factor out the largest term before exponentiating.

mod cusps;
mod expansion;
mod jastrow;
mod slater;
mod trial;
mod walker;

pub use cusps::{check_cusps, CuspCheck, CuspKind, CuspReport, CUSP_TOLERANCE};
pub use expansion::{truncate_expansion, Csf, Determinant, DeterminantExpansion};
pub use jastrow::{
    cutoff_function, Jastrow, JastrowEval, JastrowParams, PadeTerm, ThreeBodyMonomial, ThreeBodyTerm, ANTIPARALLEL_CUSP,
    PARALLEL_CUSP,
};
pub use slater::{lu_factor, LuFactor, SlaterMatrix};
pub use trial::TrialWavefunction;
pub use walker::{MoveProposal, Walker};

use crate::Vec3;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WavefunctionError {
    #[error("determinant expansion: {0}")]
    Expansion(String),
    #[error("jastrow: {0}")]
    Jastrow(String),
    #[error("orbitals: {0}")]
    Orbitals(String),
    #[error("expected {expected} electron positions, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// ln|Ψ_T| with sign and derivatives at one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct WavefunctionValue {
    /// `−∞` exactly on a node.
    pub log_magnitude: f64,
    /// ±1, or 0 on a node.
    pub sign: f64,
    /// ∇_i ln|Ψ_T| per electron.
    pub gradient: Vec<Vec3>,
    /// Σ_i ∇²_i Ψ_T / Ψ_T.
    pub laplacian_ratio: f64,
}

impl WavefunctionValue {
    pub fn is_node(&self) -> bool {
        self.sign == 0.0
    }
}
