//! Quasi-harmonic Gibbs free energy and relaxation-time thermal
//! conductivity.

use super::thermo::{helmholtz_free_energy, mode_heat_capacities};
use super::{PhononError, PhononResult};
use crate::consts::EV_A_FS_K_TO_W_MK;

/// One volume point of a quasi-harmonic scan.
#[derive(Clone, Debug)]
pub struct QhaPoint {
    /// Cell volume, Å³.
    pub volume: f64,
    /// Static reference energy at that volume, eV.
    pub e_ref: f64,
    pub phonons: PhononResult,
}

/// Gibbs free energy by minimizing Φ(V) = E(V) + F_vib(V,T) + pV over the
/// scanned volumes: a quartic polynomial is fit to the points and minimized
/// on the data interval. Returns (G in eV, V* in Å³).
pub fn gibbs_qha(
    volumes: &[QhaPoint],
    temperature: f64,
    pressure: f64,
) -> Result<(f64, f64), PhononError> {
    if volumes.len() < 5 {
        return Err(PhononError::TooFewVolumes(volumes.len()));
    }
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(volumes.len());
    for q in volumes {
        let fvib = helmholtz_free_energy(&q.phonons, temperature)?;
        pts.push((q.volume, q.e_ref + fvib + pressure * q.volume));
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);

    // centered/scaled quartic fit for conditioning
    let vbar = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let scale = (hi - lo).max(1e-12) / 2.0;
    let coeff = polyfit4(
        &pts.iter()
            .map(|&(v, phi)| ((v - vbar) / scale, phi))
            .collect::<Vec<_>>(),
    );
    let poly = |t: f64| {
        coeff[0] + t * (coeff[1] + t * (coeff[2] + t * (coeff[3] + t * coeff[4])))
    };
    let dpoly = |t: f64| {
        coeff[1] + t * (2.0 * coeff[2] + t * (3.0 * coeff[3] + t * 4.0 * coeff[4]))
    };

    // dense scan plus Newton polish inside the data interval
    let t_lo = (lo - vbar) / scale;
    let t_hi = (hi - vbar) / scale;
    let mut best_t = t_lo;
    let mut best_val = f64::INFINITY;
    let samples = 2000;
    for i in 0..=samples {
        let t = t_lo + (t_hi - t_lo) * i as f64 / samples as f64;
        let v = poly(t);
        if v < best_val {
            best_val = v;
            best_t = t;
        }
    }
    for _ in 0..40 {
        let d1 = dpoly(best_t);
        let d2 = 2.0 * coeff[2] + best_t * (6.0 * coeff[3] + best_t * 12.0 * coeff[4]);
        if d2.abs() < 1e-300 {
            break;
        }
        let next = (best_t - d1 / d2).clamp(t_lo, t_hi);
        if (next - best_t).abs() < 1e-15 {
            best_t = next;
            break;
        }
        best_t = next;
    }
    if poly(best_t) > best_val {
        // Newton wandered to a worse point (e.g. a local max); keep the scan
        best_t = (0..=samples)
            .map(|i| t_lo + (t_hi - t_lo) * i as f64 / samples as f64)
            .min_by(|&a, &b| poly(a).partial_cmp(&poly(b)).unwrap())
            .unwrap();
    }

    let vstar = vbar + scale * best_t;
    let width = hi - lo;
    if vstar - lo < 1e-3 * width || hi - vstar < 1e-3 * width {
        return Err(PhononError::BoundaryMinimum { vstar, lo, hi });
    }
    Ok((poly(best_t), vstar))
}

/// Least-squares quartic through (t, y) points via normal equations.
fn polyfit4(pts: &[(f64, f64)]) -> [f64; 5] {
    let mut ata = [[0.0; 5]; 5];
    let mut atb = [0.0; 5];
    for &(t, y) in pts {
        let mut powers = [1.0; 9];
        for k in 1..9 {
            powers[k] = powers[k - 1] * t;
        }
        for i in 0..5 {
            for j in 0..5 {
                ata[i][j] += powers[i + j];
            }
            atb[i] += powers[i] * y;
        }
    }
    // gaussian elimination with partial pivoting
    for col in 0..5 {
        let piv = (col..5)
            .max_by(|&a, &b| ata[a][col].abs().partial_cmp(&ata[b][col].abs()).unwrap())
            .unwrap();
        ata.swap(col, piv);
        atb.swap(col, piv);
        for row in (col + 1)..5 {
            let f = ata[row][col] / ata[col][col];
            for c in col..5 {
                ata[row][c] -= f * ata[col][c];
            }
            atb[row] -= f * atb[col];
        }
    }
    let mut x = [0.0; 5];
    for col in (0..5).rev() {
        let mut v = atb[col];
        for c in (col + 1)..5 {
            v -= ata[col][c] * x[c];
        }
        x[col] = v / ata[col][col];
    }
    x
}

/// Per-mode lifetimes for the relaxation-time conductivity.
#[derive(Clone, Debug)]
pub enum TauSpec {
    /// One lifetime for every mode, fs.
    Constant(f64),
    /// Lifetimes on the (q, branch) layout of the phonon result, fs.
    PerMode(Vec<Vec<f64>>),
}

/// Lattice thermal conductivity in the constant relaxation-time picture:
/// κ = (1/(N·V_c))·Σ_λ C_λ v_λ⊗v_λ τ_λ, returned in W/(m·K).
pub fn kappa_crta(
    ph: &PhononResult,
    temperature: f64,
    tau: &TauSpec,
) -> Result<[[f64; 3]; 3], PhononError> {
    let velocities = ph
        .group_velocities
        .as_ref()
        .ok_or(PhononError::MissingVelocities)?;
    let cv = mode_heat_capacities(ph, temperature)?;
    if let TauSpec::PerMode(t) = tau {
        if t.len() != ph.n_qpoints()
            || t.iter().zip(&ph.frequencies).any(|(a, b)| a.len() != b.len())
        {
            return Err(PhononError::LifetimeShape);
        }
    }
    let mut kappa = [[0.0; 3]; 3];
    for (qi, vels) in velocities.iter().enumerate() {
        for (br, v) in vels.iter().enumerate() {
            let t = match tau {
                TauSpec::Constant(t) => *t,
                TauSpec::PerMode(tt) => tt[qi][br],
            };
            let c = cv[qi][br];
            for a in 0..3 {
                for b in 0..3 {
                    kappa[a][b] += c * v[a] * v[b] * t;
                }
            }
        }
    }
    let norm = EV_A_FS_K_TO_W_MK / (ph.n_qpoints() as f64 * ph.primitive_volume);
    for row in &mut kappa {
        for k in row.iter_mut() {
            *k *= norm;
        }
    }
    Ok(kappa)
}
