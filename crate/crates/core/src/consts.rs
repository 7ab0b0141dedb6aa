//! Physical constants and unit conversions.
//!
//! Internal units everywhere: energy eV, length Å, time fs, mass amu,
//! temperature K. Stress is eV/Å³.

/// Boltzmann constant, eV/K (CODATA 2018).
pub const KB: f64 = 8.617333262e-5;

/// Planck constant, eV·s / 1e12 = eV per THz of frequency (h·1 THz in eV).
/// `hbar * omega = h * nu`, so a mode at `nu` THz carries `nu * EV_PER_THZ` eV.
pub const EV_PER_THZ: f64 = 4.135667696e-3;

/// Stress conversion: 1 eV/Å³ = 160.21766208 GPa.
pub const EV_A3_TO_GPA: f64 = 160.21766208;

/// Kinetic energy conversion: 1 amu·Å²/fs² = 103.642696562 eV.
///
/// KE(eV) = 0.5 * m(amu) * v²(Å/fs)² * MASS_VEL2_TO_EV.
pub const MASS_VEL2_TO_EV: f64 = 103.642696562;

/// Acceleration from force: a(Å/fs²) = F(eV/Å) / m(amu) / MASS_VEL2_TO_EV.
pub const EV_TO_MASS_VEL2: f64 = 1.0 / MASS_VEL2_TO_EV;

/// Frequency conversion for dynamical-matrix eigenvalues:
/// sqrt(eV / (Å²·amu)) expressed as an ordinary frequency nu in THz
/// (angular frequency divided by 2π).
pub const SQRT_EV_A2_AMU_TO_THZ: f64 = 15.633302300230191;

/// Diffusivity conversion: 1 Å²/fs = 1e-16 cm² / 1e-15 s = 0.1 cm²/s.
pub const A2_FS_TO_CM2_S: f64 = 0.1;

/// Thermal conductivity conversion: 1 eV/(Å·fs·K) = 1.602176634e6 W/(m·K).
pub const EV_A_FS_K_TO_W_MK: f64 = 1.602176634e6;
