//! BFGS structure relaxation of atomic positions, optionally with cell
//! shape, down to a maximum per-atom force criterion.

use crate::io::{LabeledFrame, Provenance};
use crate::potential::{EvalResult, Potential, PotentialError};
use crate::structure::Structure;

#[derive(Debug, thiserror::Error)]
pub enum RelaxError {
    #[error("non-finite energy at relaxation step {step}")]
    NonFiniteEnergy { step: usize },
    #[error("cell collapsed: volume fell below 10% of the initial volume")]
    CellCollapse,
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Structure(#[from] crate::structure::StructureError),
}

#[derive(Clone, Debug)]
pub struct RelaxOptions {
    /// Convergence criterion: max per-atom force magnitude, eV/Å.
    pub f_tol: f64,
    pub max_iter: usize,
    pub record_trajectory: bool,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        RelaxOptions { f_tol: 0.05, max_iter: 500, record_trajectory: false }
    }
}

#[derive(Clone, Debug)]
pub struct CellRelaxOptions {
    pub f_tol: f64,
    /// Convergence criterion on max |σ + p·I| component, eV/Å³.
    pub stress_tol: f64,
    /// External pressure, eV/Å³.
    pub pressure: f64,
    pub max_iter: usize,
    pub record_trajectory: bool,
}

impl Default for CellRelaxOptions {
    fn default() -> Self {
        CellRelaxOptions {
            f_tol: 0.05,
            stress_tol: 5e-4,
            pressure: 0.0,
            max_iter: 200,
            record_trajectory: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RelaxResult {
    pub structure: Structure,
    pub eval: EvalResult,
    pub iterations: usize,
    pub converged: bool,
    /// Accepted iterates, provenance `predicted`, when recording is on.
    pub trajectory: Vec<LabeledFrame>,
    /// Max per-atom force magnitude of the returned structure, eV/Å.
    pub max_force: f64,
}

/// Initial inverse-Hessian scale: H₀ = I / 70 eV/Å².
const HESSIAN_SCALE: f64 = 70.0;
const ARMIJO_C1: f64 = 1e-4;
const LS_SHRINK: f64 = 0.5;
const LS_MIN_STEP: f64 = 1e-16;
/// Per-atom displacement cap for the first trial step of each line search.
const MAX_DISPLACEMENT: f64 = 0.2;

fn flatten(coords: &[[f64; 3]]) -> Vec<f64> {
    coords.iter().flatten().copied().collect()
}

fn max_atom_force(g: &[f64]) -> f64 {
    g.chunks_exact(3)
        .map(|c| (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Objective<'a> {
    potential: &'a dyn Potential,
    template: Structure,
}

impl Objective<'_> {
    /// (energy, gradient = -forces, eval, structure) at flattened Cartesians.
    fn eval(
        &self,
        x: &[f64],
        step: usize,
    ) -> Result<(f64, Vec<f64>, EvalResult, Structure), RelaxError> {
        let coords: Vec<[f64; 3]> = x.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let s = self.template.with_cart_coords(&coords)?;
        let out = self.potential.evaluate(&s)?;
        if !out.energy.is_finite() {
            return Err(RelaxError::NonFiniteEnergy { step });
        }
        let g: Vec<f64> = out.forces.iter().flatten().map(|f| -f).collect();
        Ok((out.energy, g, out, s))
    }
}

/// BFGS on Cartesian positions with a backtracking Armijo line search.
/// The Hessian approximation resets to the scaled identity whenever the
/// update direction stops being a descent direction.
pub fn relax_positions(
    s: &Structure,
    p: &dyn Potential,
    opts: &RelaxOptions,
) -> Result<RelaxResult, RelaxError> {
    let obj = Objective { potential: p, template: s.clone() };
    let n3 = 3 * s.n_atoms();
    let mut x = flatten(&s.cart_coords());
    let (mut energy, mut grad, mut eval, mut current) = obj.eval(&x, 0)?;
    let mut trajectory = Vec::new();
    let record = |s: &Structure, ev: &EvalResult| {
        LabeledFrame::from_evaluation(s.clone(), ev, Provenance::Predicted)
    };
    if opts.record_trajectory {
        trajectory.push(record(&current, &eval));
    }

    // inverse Hessian approximation, dense
    let mut h: Vec<Vec<f64>> = identity_over(n3, HESSIAN_SCALE);
    let mut iterations = 0;
    let mut converged = max_atom_force(&grad) < opts.f_tol;

    while !converged && iterations < opts.max_iter {
        // d = -H g
        let mut d = vec![0.0; n3];
        for i in 0..n3 {
            d[i] = -dot(&h[i], &grad);
        }
        let mut dg = dot(&d, &grad);
        if dg >= 0.0 {
            h = identity_over(n3, HESSIAN_SCALE);
            for i in 0..n3 {
                d[i] = -grad[i] / HESSIAN_SCALE;
            }
            dg = dot(&d, &grad);
        }

        let max_disp = max_atom_force(&d);
        let mut step = if max_disp > MAX_DISPLACEMENT {
            MAX_DISPLACEMENT / max_disp
        } else {
            1.0
        };
        let mut accepted = None;
        while step >= LS_MIN_STEP {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (et, gt, evt, st) = obj.eval(&xt, iterations + 1)?;
            if et <= energy + ARMIJO_C1 * step * dg {
                accepted = Some((xt, et, gt, evt, st));
                break;
            }
            step *= LS_SHRINK;
        }
        let Some((xt, et, gt, evt, st)) = accepted else {
            // no further descent possible along this direction
            break;
        };

        let s_vec: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y_vec: Vec<f64> = gt.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s_vec, &y_vec);
        if sy > 1e-12 {
            bfgs_update(&mut h, &s_vec, &y_vec, sy);
        } else {
            h = identity_over(n3, HESSIAN_SCALE);
        }
        x = xt;
        energy = et;
        grad = gt;
        eval = evt;
        current = st;
        iterations += 1;
        if opts.record_trajectory {
            trajectory.push(record(&current, &eval));
        }
        converged = max_atom_force(&grad) < opts.f_tol;
    }

    let max_force = max_atom_force(&grad);
    Ok(RelaxResult {
        structure: current,
        eval,
        iterations,
        converged,
        trajectory,
        max_force,
    })
}

fn identity_over(n: usize, scale: f64) -> Vec<Vec<f64>> {
    let mut h = vec![vec![0.0; n]; n];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0 / scale;
    }
    h
}

/// H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ with ρ = 1/(sᵀy).
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    // hy = H y, yhy = yᵀ H y
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                + rho * rho * yhy * s[i] * s[j]
                + rho * s[i] * s[j];
        }
    }
}

/// Alternate position BFGS with steepest-descent lattice updates along
/// −(σ + p·I) until both force and stress tolerances are met. The enthalpy
/// E + pV is backtracked on every lattice trial.
pub fn relax_cell(
    s: &Structure,
    p: &dyn Potential,
    opts: &CellRelaxOptions,
) -> Result<RelaxResult, RelaxError> {
    let initial_volume = s.volume();
    let mut current = s.clone();
    let pos_opts = RelaxOptions {
        f_tol: opts.f_tol,
        max_iter: opts.max_iter,
        record_trajectory: false,
    };
    let mut gamma = 1.0; // strain per unit stress, (eV/Å³)⁻¹
    let mut trajectory = Vec::new();
    let mut total_iterations = 0;
    let mut best: Option<RelaxResult> = None;

    for _outer in 0..opts.max_iter {
        let mut inner = relax_positions(&current, p, &pos_opts)?;
        total_iterations += inner.iterations.max(1);
        current = inner.structure.clone();
        if opts.record_trajectory {
            trajectory.push(LabeledFrame::from_evaluation(
                current.clone(),
                &inner.eval,
                Provenance::Predicted,
            ));
        }

        let mut sigma = inner.eval.stress;
        for k in 0..3 {
            sigma[k][k] += opts.pressure;
        }
        let sigma_max = sigma
            .iter()
            .flatten()
            .fold(0.0_f64, |m, &v| m.max(v.abs()));
        let enthalpy = inner.eval.energy + opts.pressure * current.volume();

        let better = best
            .as_ref()
            .map(|b| enthalpy < b.eval.energy + opts.pressure * b.structure.volume())
            .unwrap_or(true);
        if better {
            inner.iterations = total_iterations;
            best = Some(inner.clone());
        }

        if sigma_max < opts.stress_tol && inner.max_force < opts.f_tol {
            let mut done = inner;
            done.iterations = total_iterations;
            done.converged = true;
            done.trajectory = trajectory;
            return Ok(done);
        }

        // backtracking strain step on the enthalpy
        let mut stepped = false;
        while gamma >= 1e-5 {
            let mut eps = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    eps[a][b] = (-gamma * sigma[a][b]).clamp(-0.05, 0.05);
                }
                eps[a][a] += 1.0;
            }
            let trial_lattice = match current.lattice().deformed(&eps) {
                Ok(l) => l,
                Err(_) => {
                    gamma *= 0.5;
                    continue;
                }
            };
            let trial = current.with_lattice(trial_lattice);
            if trial.volume() < 0.1 * initial_volume {
                return Err(RelaxError::CellCollapse);
            }
            let out = p.evaluate(&trial)?;
            if !out.energy.is_finite() {
                return Err(RelaxError::NonFiniteEnergy { step: total_iterations });
            }
            let trial_enthalpy = out.energy + opts.pressure * trial.volume();
            if trial_enthalpy < enthalpy {
                current = trial;
                gamma = (gamma * 1.2).min(4.0);
                stepped = true;
                break;
            }
            gamma *= 0.5;
        }
        if !stepped {
            break;
        }
    }

    let mut out = best.expect("at least one outer iteration ran");
    out.trajectory = trajectory;
    out.converged = false;
    Ok(out)
}
