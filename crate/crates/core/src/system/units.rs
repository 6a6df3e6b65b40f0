//! Conversion constants. Everything inside the engine is in Hartree atomic
//! units; these are the only places other units enter.

/// Debye per atomic unit of dipole moment (e·bohr).
pub const DEBYE_PER_AU: f64 = 2.5417464;

/// Wavenumbers (cm⁻¹) per hartree.
pub const WAVENUMBER_PER_HARTREE: f64 = 219474.63;

/// Ångström per bohr.
pub const ANGSTROM_PER_BOHR: f64 = 0.529177210903;

/// Electron masses per unified atomic mass unit.
pub const ELECTRON_MASS_PER_AMU: f64 = 1822.888486;
