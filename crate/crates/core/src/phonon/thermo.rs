//! Harmonic thermodynamics from a phonon result: Helmholtz free energy,
//! heat capacity, and the vibrational density of states. All q-point sums
//! are normalized per primitive cell by the q-point count.

use super::{PhononError, PhononResult, ZERO_TOL_THZ};
use crate::consts::{EV_PER_THZ, KB};

fn reject_imaginary(ph: &PhononResult) -> Result<(), PhononError> {
    if let Some((q, freq)) = ph.first_imaginary() {
        return Err(PhononError::ImaginaryModes { q, freq });
    }
    Ok(())
}

/// Harmonic Helmholtz free energy, eV per primitive cell:
/// F(T) = (1/N)·Σ_{q,ν} [ hν/2 + k_B T ln(1 − e^{−hν/k_BT}) ].
pub fn helmholtz_free_energy(ph: &PhononResult, temperature: f64) -> Result<f64, PhononError> {
    if temperature < 0.0 {
        return Err(PhononError::NegativeTemperature(temperature));
    }
    reject_imaginary(ph)?;
    let kt = KB * temperature;
    let mut f = 0.0;
    for nus in &ph.frequencies {
        for &nu in nus {
            if nu.abs() <= ZERO_TOL_THZ {
                continue;
            }
            let e = nu * EV_PER_THZ;
            f += 0.5 * e;
            if temperature > 0.0 {
                f += kt * (1.0 - (-e / kt).exp()).ln();
            }
        }
    }
    Ok(f / ph.n_qpoints() as f64)
}

/// Harmonic heat capacity C_V, eV/K per primitive cell:
/// C_V = (1/N)·Σ k_B x² eˣ/(eˣ−1)², x = hν/k_BT.
pub fn heat_capacity(ph: &PhononResult, temperature: f64) -> Result<f64, PhononError> {
    if temperature < 0.0 {
        return Err(PhononError::NegativeTemperature(temperature));
    }
    reject_imaginary(ph)?;
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let mut cv = 0.0;
    for nus in &ph.frequencies {
        for &nu in nus {
            cv += mode_cv(nu, temperature);
        }
    }
    Ok(cv / ph.n_qpoints() as f64)
}

/// Single-mode harmonic heat capacity, eV/K.
pub(crate) fn mode_cv(nu_thz: f64, temperature: f64) -> f64 {
    if nu_thz.abs() <= ZERO_TOL_THZ || temperature <= 0.0 {
        return 0.0;
    }
    let x = nu_thz * EV_PER_THZ / (KB * temperature);
    if x > 500.0 {
        return 0.0;
    }
    let ex = x.exp();
    KB * x * x * ex / ((ex - 1.0) * (ex - 1.0))
}

/// Per-mode heat capacities on the same (q, branch) layout, eV/K.
pub fn mode_heat_capacities(
    ph: &PhononResult,
    temperature: f64,
) -> Result<Vec<Vec<f64>>, PhononError> {
    if temperature < 0.0 {
        return Err(PhononError::NegativeTemperature(temperature));
    }
    Ok(ph
        .frequencies
        .iter()
        .map(|nus| nus.iter().map(|&nu| mode_cv(nu, temperature)).collect())
        .collect())
}

/// Vibrational density of states on a uniform frequency grid.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct DosTable {
    /// Frequency grid, THz.
    pub omega: Vec<f64>,
    /// States per THz per primitive cell; trapezoid integral is 3n.
    pub density: Vec<f64>,
    pub smearing: f64,
}

impl DosTable {
    /// Trapezoid integral ∫D(ω)dω; equals the mode count 3n.
    pub fn integral(&self) -> f64 {
        let mut total = 0.0;
        for w in 0..self.omega.len() - 1 {
            let h = self.omega[w + 1] - self.omega[w];
            total += 0.5 * h * (self.density[w] + self.density[w + 1]);
        }
        total
    }
}

/// Gaussian-smeared DOS. `smearing` in THz; `None` picks 2× the grid
/// spacing. The grid extends 6 smearing widths past the spectrum so the
/// Gaussian tails integrate to machine accuracy.
pub fn dos(ph: &PhononResult, smearing: Option<f64>, points: usize) -> DosTable {
    let points = points.max(16);
    let nu_min = ph.frequencies.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let nu_max = ph
        .frequencies
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let span = (nu_max - nu_min).max(1e-6);
    let sigma = smearing.unwrap_or(2.0 * span / points as f64).max(1e-9);
    let lo = nu_min.min(0.0) - 6.0 * sigma;
    let hi = nu_max + 6.0 * sigma;
    let step = (hi - lo) / (points - 1) as f64;
    let omega: Vec<f64> = (0..points).map(|i| lo + i as f64 * step).collect();
    let norm = 1.0 / (ph.n_qpoints() as f64 * sigma * (2.0 * std::f64::consts::PI).sqrt());
    let mut density = vec![0.0; points];
    for nus in &ph.frequencies {
        for &nu in nus {
            for (i, &w) in omega.iter().enumerate() {
                let z = (w - nu) / sigma;
                if z.abs() < 8.0 {
                    density[i] += norm * (-0.5 * z * z).exp();
                }
            }
        }
    }
    DosTable { omega, density, smearing: sigma }
}
