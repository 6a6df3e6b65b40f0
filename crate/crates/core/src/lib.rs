//! Quantum Monte Carlo engine for Born–Oppenheimer energies and dipole
//! moments of small molecules.
//!
//! The crate is organised by stage of a calculation:
//!
//! * [`system`]: nuclei, electrons, one-particle orbitals, effective core
//!   potentials, the plain-text input format, built-in fixtures and
//!   volumetric orbital export.
//! * [`wavefunction`]: Slater–Jastrow trial functions with multi-determinant
//!   expansions and fast single-electron updates.
//! * [`hamiltonian`]: local energy, localized nonlocal pseudopotentials and
//!   the dipole operator.
//! * [`vmc`], [`dmc`]: variational and fixed-node diffusion Monte Carlo.
//! * [`optimizer`]: reweighted energy/variance minimisation of trial
//!   function parameters.
//! * [`spectroscopy`]: spectroscopic constants, vibrational levels and
//!   vibrationally averaged dipoles from sampled curves.
//!
//! All quantities are Hartree atomic units unless a name says otherwise.

// `!(x > 0.0)` guards also reject NaN; index loops mirror the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dmc;
pub mod hamiltonian;
pub mod optimizer;
pub mod rng;
pub mod spectroscopy;
pub mod stats;
pub mod system;
pub mod vmc;
pub mod wavefunction;

pub use nalgebra::Vector3;

/// A point or displacement in 3D space, bohr.
pub type Vec3 = Vector3<f64>;
