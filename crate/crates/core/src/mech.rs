//! Elastic stiffness tensor and ideal shear strength via finite
//! deformation.
//!
//! Strains are applied as `L → L·(I+ε)` with ε built from Voigt components
//! in the engineering convention: a shear component e_k (k = 4,5,6) puts
//! ε = e_k/2 on both off-diagonal entries. The ideal-shear path instead
//! applies a single-sided simple shear of the lattice, which is the
//! engineering γ of the stress-strain curve.

use crate::consts::EV_A3_TO_GPA;
use crate::potential::{Potential, PotentialError};
use crate::relax::{relax_positions, RelaxError, RelaxOptions};
use crate::structure::{Structure, StructureError};

#[derive(Debug, thiserror::Error)]
pub enum MechError {
    #[error("ion relaxation failed at strain point {0}")]
    RelaxationFailure(String),
    #[error("shear step {0} outside the supported range [0.01, 0.10]")]
    InvalidShearStep(f64),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Relax(#[from] RelaxError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ElasticMethod {
    /// C_ij = (1/V₀)·∂²E/∂ε_i∂ε_j by 4-point central differences.
    EnergyBased,
    /// C_ij = ∂σ_i/∂ε_j by 2-point central differences of the virial.
    StressBased,
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ElasticTensor {
    /// 6×6 Voigt stiffness, eV/Å³.
    pub c: [[f64; 6]; 6],
    /// Undeformed volume, Å³.
    pub v0: f64,
    pub delta: f64,
    pub method: ElasticMethod,
    pub relaxed_ions: bool,
}

impl ElasticTensor {
    pub fn gpa(&self) -> [[f64; 6]; 6] {
        let mut out = self.c;
        for row in &mut out {
            for x in row.iter_mut() {
                *x *= EV_A3_TO_GPA;
            }
        }
        out
    }

    /// Worst relative asymmetry |C_ij − C_ji| / max|C|.
    pub fn asymmetry(&self) -> f64 {
        let scale = self
            .c
            .iter()
            .flatten()
            .fold(0.0_f64, |m, &v| m.max(v.abs()))
            .max(1e-300);
        let mut worst = 0.0_f64;
        for i in 0..6 {
            for j in (i + 1)..6 {
                worst = worst.max((self.c[i][j] - self.c[j][i]).abs() / scale);
            }
        }
        worst
    }

    /// All eigenvalues of the symmetrized tensor positive.
    pub fn is_positive_definite(&self) -> bool {
        let mut m = nalgebra::DMatrix::<f64>::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                m[(i, j)] = 0.5 * (self.c[i][j] + self.c[j][i]);
            }
        }
        m.symmetric_eigen().eigenvalues.iter().all(|&e| e > 0.0)
    }

    /// Voigt-average bulk modulus, eV/Å³.
    pub fn bulk_modulus(&self) -> f64 {
        let c = &self.c;
        (c[0][0] + c[1][1] + c[2][2] + 2.0 * (c[0][1] + c[0][2] + c[1][2])) / 9.0
    }

    /// Voigt-average shear modulus, eV/Å³.
    pub fn shear_modulus(&self) -> f64 {
        let c = &self.c;
        (c[0][0] + c[1][1] + c[2][2] - c[0][1] - c[0][2] - c[1][2]) / 15.0
            + (c[3][3] + c[4][4] + c[5][5]) / 5.0
    }
}

/// Symmetric strain tensor for one Voigt component of magnitude `e`.
fn voigt_strain(index: usize, e: f64) -> [[f64; 3]; 3] {
    let mut eps = [[0.0; 3]; 3];
    match index {
        0 | 1 | 2 => eps[index][index] = e,
        3 => {
            eps[1][2] = e / 2.0;
            eps[2][1] = e / 2.0;
        }
        4 => {
            eps[0][2] = e / 2.0;
            eps[2][0] = e / 2.0;
        }
        5 => {
            eps[0][1] = e / 2.0;
            eps[1][0] = e / 2.0;
        }
        _ => unreachable!("Voigt index must be 0..6"),
    }
    eps
}

fn apply_strain(s: &Structure, eps: &[[f64; 3]; 3]) -> Result<Structure, StructureError> {
    let mut m = *eps;
    for k in 0..3 {
        m[k][k] += 1.0;
    }
    Ok(s.with_lattice(s.lattice().deformed(&m)?))
}

fn voigt_stress(stress: &[[f64; 3]; 3]) -> [f64; 6] {
    [
        stress[0][0],
        stress[1][1],
        stress[2][2],
        0.5 * (stress[1][2] + stress[2][1]),
        0.5 * (stress[0][2] + stress[2][0]),
        0.5 * (stress[0][1] + stress[1][0]),
    ]
}

struct StrainedEval<'a> {
    potential: &'a dyn Potential,
    base: &'a Structure,
    relax_ions: bool,
}

impl StrainedEval<'_> {
    fn eval(&self, eps: &[[f64; 3]; 3], tag: &str) -> Result<(f64, [f64; 6]), MechError> {
        let strained = apply_strain(self.base, eps)?;
        let (energy, stress) = if self.relax_ions {
            let out = relax_positions(&strained, self.potential, &RelaxOptions {
                f_tol: 1e-4,
                max_iter: 200,
                record_trajectory: false,
            })?;
            if !out.converged {
                return Err(MechError::RelaxationFailure(tag.to_string()));
            }
            (out.eval.energy, out.eval.stress)
        } else {
            let out = self.potential.evaluate(&strained)?;
            (out.energy, out.stress)
        };
        Ok((energy, voigt_stress(&stress)))
    }
}

/// Elastic stiffness tensor by finite strain differences.
pub fn elastic_tensor(
    s: &Structure,
    p: &dyn Potential,
    delta: f64,
    relax_ions: bool,
    method: ElasticMethod,
) -> Result<ElasticTensor, MechError> {
    let v0 = s.volume();
    let probe = StrainedEval { potential: p, base: s, relax_ions };
    let mut c = [[0.0; 6]; 6];
    match method {
        ElasticMethod::EnergyBased => {
            let (e0, _) = probe.eval(&[[0.0; 3]; 3], "0")?;
            // diagonal terms
            let mut e_plus = [0.0; 6];
            let mut e_minus = [0.0; 6];
            for i in 0..6 {
                e_plus[i] = probe.eval(&voigt_strain(i, delta), &format!("+e{i}"))?.0;
                e_minus[i] = probe.eval(&voigt_strain(i, -delta), &format!("-e{i}"))?.0;
                c[i][i] = (e_plus[i] - 2.0 * e0 + e_minus[i]) / (delta * delta * v0);
            }
            // mixed terms by the 4-point cross stencil
            for i in 0..6 {
                for j in (i + 1)..6 {
                    let combine = |si: f64, sj: f64| -> Result<f64, MechError> {
                        let mut eps = voigt_strain(i, si * delta);
                        let ej = voigt_strain(j, sj * delta);
                        for a in 0..3 {
                            for b in 0..3 {
                                eps[a][b] += ej[a][b];
                            }
                        }
                        Ok(probe.eval(&eps, &format!("e{i}{si:+}/e{j}{sj:+}"))?.0)
                    };
                    let pp = combine(1.0, 1.0)?;
                    let pm = combine(1.0, -1.0)?;
                    let mp = combine(-1.0, 1.0)?;
                    let mm = combine(-1.0, -1.0)?;
                    let val = (pp - pm - mp + mm) / (4.0 * delta * delta * v0);
                    c[i][j] = val;
                    c[j][i] = val;
                }
            }
        }
        ElasticMethod::StressBased => {
            for j in 0..6 {
                let (_, sp) = probe.eval(&voigt_strain(j, delta), &format!("+e{j}"))?;
                let (_, sm) = probe.eval(&voigt_strain(j, -delta), &format!("-e{j}"))?;
                for i in 0..6 {
                    c[i][j] = (sp[i] - sm[i]) / (2.0 * delta);
                }
            }
        }
    }
    Ok(ElasticTensor { c, v0, delta, method, relaxed_ions: relax_ions })
}

/// Shear system: which lattice plane slides along which direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ShearPlane {
    /// x displaced proportionally to y (τ_xy).
    Xy,
    /// y displaced proportionally to z (τ_yz).
    Yz,
    /// z displaced proportionally to x (τ_zx).
    Zx,
}

/// Simple (single-sided) lattice shear by engineering γ.
pub fn apply_shear(
    s: &Structure,
    plane: ShearPlane,
    gamma: f64,
) -> Result<Structure, StructureError> {
    let mut m = [[0.0; 3]; 3];
    for k in 0..3 {
        m[k][k] = 1.0;
    }
    match plane {
        ShearPlane::Xy => m[1][0] = gamma,
        ShearPlane::Yz => m[2][1] = gamma,
        ShearPlane::Zx => m[0][2] = gamma,
    }
    Ok(s.with_lattice(s.lattice().deformed(&m)?))
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ShearCurve {
    pub plane: ShearPlane,
    pub gamma: Vec<f64>,
    /// Total energy per γ point, eV.
    pub energy: Vec<f64>,
    /// τ(γ) = (1/V₀)·dE/dγ, eV/Å³; endpoints one-sided.
    pub stress: Vec<f64>,
    /// Max stress before the first non-positive slope, if reached.
    pub tau_max: Option<f64>,
    pub gamma_at_max: Option<f64>,
    /// True when the grid reached a stress maximum (elastic instability).
    pub reached_instability: bool,
    pub relaxed_ions: bool,
}

/// Ideal shear strength: incremental simple shear with τ from central
/// differences of the energy along the γ grid.
pub fn ideal_shear(
    s: &Structure,
    p: &dyn Potential,
    plane: ShearPlane,
    dgamma: f64,
    gamma_max: f64,
    relax_ions: bool,
) -> Result<ShearCurve, MechError> {
    if !(0.01..=0.10).contains(&dgamma) {
        return Err(MechError::InvalidShearStep(dgamma));
    }
    let v0 = s.volume();
    let n = (gamma_max / dgamma).round() as usize + 1;
    let mut gamma = Vec::with_capacity(n);
    let mut energy = Vec::with_capacity(n);
    let mut current = s.clone();
    for k in 0..n {
        let g = k as f64 * dgamma;
        let sheared = apply_shear(s, plane, g)?;
        // carry relaxed fractional coordinates forward along the path
        let sheared = sheared.with_frac_coords(current.frac_coords().to_vec())?;
        let e = if relax_ions {
            let out = relax_positions(&sheared, p, &RelaxOptions {
                f_tol: 1e-4,
                max_iter: 200,
                record_trajectory: false,
            })?;
            if !out.converged {
                return Err(MechError::RelaxationFailure(format!("gamma={g}")));
            }
            current = out.structure;
            out.eval.energy
        } else {
            current = sheared.clone();
            p.evaluate(&sheared)?.energy
        };
        gamma.push(g);
        energy.push(e);
    }

    let mut stress = vec![0.0; n];
    for k in 0..n {
        stress[k] = if k == 0 {
            (energy[1] - energy[0]) / (dgamma * v0)
        } else if k == n - 1 {
            (energy[n - 1] - energy[n - 2]) / (dgamma * v0)
        } else {
            (energy[k + 1] - energy[k - 1]) / (2.0 * dgamma * v0)
        };
    }

    let mut tau_max = None;
    let mut gamma_at_max = None;
    for k in 0..n - 1 {
        if stress[k + 1] <= stress[k] {
            let (mut best_t, mut best_g) = (f64::NEG_INFINITY, 0.0);
            for j in 0..=k {
                if stress[j] > best_t {
                    best_t = stress[j];
                    best_g = gamma[j];
                }
            }
            tau_max = Some(best_t);
            gamma_at_max = Some(best_g);
            break;
        }
    }
    let reached_instability = tau_max.is_some();
    Ok(ShearCurve {
        plane,
        gamma,
        energy,
        stress,
        tau_max,
        gamma_at_max,
        reached_instability,
        relaxed_ions: relax_ions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::Element;
    use crate::potential::EvalResult;
    use crate::structure::Lattice;
    use approx::assert_relative_eq;

    fn el(s: &str) -> Element {
        Element::from_symbol(s).unwrap()
    }

    /// Test-only medium with E = ½·k·γ²·V₀ for an xy lattice shear.
    struct HarmonicShearMedium {
        k: f64,
        reference: Lattice,
    }

    impl Potential for HarmonicShearMedium {
        fn evaluate(&self, s: &Structure) -> Result<EvalResult, PotentialError> {
            let inv = self.reference.inverse();
            let m = crate::structure::mat_mul(&inv, s.lattice().rows());
            let gamma = m[1][0];
            let v0 = self.reference.volume();
            Ok(EvalResult {
                energy: 0.5 * self.k * gamma * gamma * v0,
                forces: vec![[0.0; 3]; s.n_atoms()],
                stress: [[0.0; 3]; 3],
            })
        }
    }

    #[test]
    fn voigt_strain_conventions() {
        let e = voigt_strain(5, 0.01);
        assert_eq!(e[0][1], 0.005);
        assert_eq!(e[1][0], 0.005);
        let e = voigt_strain(0, 0.01);
        assert_eq!(e[0][0], 0.01);
    }

    #[test]
    fn harmonic_medium_shear_is_exactly_linear() {
        let reference = Lattice::cubic(4.0).unwrap();
        let medium = HarmonicShearMedium { k: 0.7, reference };
        let s = Structure::new(vec![el("Ar")], vec![[0.0; 3]], reference).unwrap();
        let curve = ideal_shear(&s, &medium, ShearPlane::Xy, 0.02, 0.3, false).unwrap();
        for (g, t) in curve.gamma.iter().zip(&curve.stress).skip(1) {
            // central differences of a quadratic are exact
            if *g < 0.29 {
                assert_relative_eq!(*t, 0.7 * g, epsilon = 1e-10);
            }
        }
        assert!(curve.tau_max.is_none(), "linear medium has no maximum");
        assert!(!curve.reached_instability);
        assert_relative_eq!(curve.stress[0], 0.7 * 0.01, epsilon = 1e-10); // one-sided
    }

    #[test]
    fn shear_step_guard() {
        let reference = Lattice::cubic(4.0).unwrap();
        let medium = HarmonicShearMedium { k: 0.7, reference };
        let s = Structure::new(vec![el("Ar")], vec![[0.0; 3]], reference).unwrap();
        assert!(matches!(
            ideal_shear(&s, &medium, ShearPlane::Xy, 0.005, 0.3, false),
            Err(MechError::InvalidShearStep(_))
        ));
        assert!(matches!(
            ideal_shear(&s, &medium, ShearPlane::Xy, 0.2, 0.3, false),
            Err(MechError::InvalidShearStep(_))
        ));
    }

    #[test]
    fn tau_zero_at_zero_gamma_for_relaxed_crystal() {
        let lj = crate::potential::LennardJones::new(1.0, 1.0, 2.5);
        let out = crate::relax::relax_cell(
            &Structure::new(
                vec![el("Ar"); 4],
                vec![
                    [0.0, 0.0, 0.0],
                    [0.0, 0.5, 0.5],
                    [0.5, 0.0, 0.5],
                    [0.5, 0.5, 0.0],
                ],
                Lattice::cubic(1.55).unwrap(),
            )
            .unwrap(),
            &lj,
            &crate::relax::CellRelaxOptions {
                stress_tol: 1e-8,
                f_tol: 1e-7,
                ..Default::default()
            },
        )
        .unwrap();
        // E(γ) is even for the centrosymmetric crystal, so the central
        // difference across ±γ vanishes at γ = 0
        let dg = 0.01;
        let ep = lj
            .evaluate(&apply_shear(&out.structure, ShearPlane::Xy, dg).unwrap())
            .unwrap()
            .energy;
        let em = lj
            .evaluate(&apply_shear(&out.structure, ShearPlane::Xy, -dg).unwrap())
            .unwrap()
            .energy;
        assert!((ep - em).abs() < 1e-6, "E(+γ) − E(−γ) = {}", ep - em);
        let tau0 = (ep - em) / (2.0 * dg * out.structure.volume());
        assert!(tau0.abs() < 1e-4, "τ(0) = {tau0}");
        // and the shear curve picks up the linear-response slope
        let curve = ideal_shear(&out.structure, &lj, ShearPlane::Xy, 0.01, 0.05, false).unwrap();
        assert!(curve.stress[2] > 0.0);
    }
}
