//! Finite-displacement lattice dynamics: second-order force constants,
//! dynamical matrices, dispersion on paths and regular q-grids, and the
//! derived harmonic thermodynamics.

mod qha;
mod thermo;

pub use qha::{gibbs_qha, kappa_crta, QhaPoint, TauSpec};
pub use thermo::{dos, heat_capacity, helmholtz_free_energy, mode_heat_capacities, DosTable};

use crate::consts::SQRT_EV_A2_AMU_TO_THZ;
use crate::potential::{Potential, PotentialError};
use crate::structure::{make_supercell, Structure, StructureError, Supercell};
use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;

/// Frequencies with |ν| below this are treated as exact zeros (acoustic
/// modes at Γ); anything below −ZERO_TOL_THZ counts as imaginary.
pub const ZERO_TOL_THZ: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum PhononError {
    #[error("imaginary mode at q = {q:?}: {freq} THz")]
    ImaginaryModes { q: [f64; 3], freq: f64 },
    #[error("negative temperature {0} K")]
    NegativeTemperature(f64),
    #[error("quasi-harmonic fit needs at least 5 volume points, got {0}")]
    TooFewVolumes(usize),
    #[error("free-energy minimum {vstar} Å³ sits at the scan boundary [{lo}, {hi}]; widen the volume scan")]
    BoundaryMinimum { vstar: f64, lo: f64, hi: f64 },
    #[error("group velocities missing; recompute the grid dispersion with velocities")]
    MissingVelocities,
    #[error("lifetime table shape does not match the q-grid")]
    LifetimeShape,
    #[error("non-finite forces during displacement {0}")]
    NonFiniteForces(usize),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Second-order force constants from finite displacements of each primitive
/// atom in a supercell, with the acoustic sum rule enforced on self blocks.
#[derive(Clone, Debug)]
pub struct ForceConstants {
    supercell: Supercell,
    primitive: Structure,
    /// fc[b][j][α][β] = Φ(b0,α; j,β), eV/Å²; b runs over primitive atoms,
    /// j over supercell atoms.
    fc: Vec<Vec<[[f64; 3]; 3]>>,
    /// Minimum-image lattice vectors (integer, primitive basis) and weights
    /// for each (primitive atom, supercell atom) pair.
    images: Vec<Vec<Vec<([i64; 3], f64)>>>,
    pub amplitude: f64,
    /// Max residual force of the input structure, eV/Å; above the usual
    /// 0.05 eV/Å relaxation criterion the harmonic expansion is suspect.
    pub residual_force: f64,
}

impl ForceConstants {
    pub fn primitive(&self) -> &Structure {
        &self.primitive
    }

    pub fn supercell(&self) -> &Supercell {
        &self.supercell
    }

    /// Φ block for (primitive atom b displaced in cell 0, supercell atom j).
    pub fn block(&self, b: usize, j: usize) -> &[[f64; 3]; 3] {
        &self.fc[b][j]
    }

    /// Row sums Σ_j Φ(bα, jβ); zero after the acoustic sum rule.
    pub fn asr_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for b in 0..self.primitive.n_atoms() {
            for alpha in 0..3 {
                for beta in 0..3 {
                    let sum: f64 = self.fc[b].iter().map(|blk| blk[alpha][beta]).sum();
                    worst = worst.max(sum.abs());
                }
            }
        }
        worst
    }
}

/// Central-difference force constants with displacement `amplitude` (Å).
pub fn force_constants(
    s: &Structure,
    p: &dyn Potential,
    repeat: [usize; 3],
    amplitude: f64,
) -> Result<ForceConstants, PhononError> {
    let sc = make_supercell(s, repeat)?;
    let n_prim = s.n_atoms();
    let n_sup = sc.structure().n_atoms();
    let base = p.evaluate(sc.structure())?;
    let residual_force = base.max_force();
    let cart0 = sc.structure().cart_coords();

    let tasks: Vec<(usize, usize)> = (0..n_prim)
        .flat_map(|b| (0..3).map(move |alpha| (b, alpha)))
        .collect();
    let rows: Vec<Result<Vec<[f64; 3]>, PhononError>> = tasks
        .par_iter()
        .map(|&(b, alpha)| {
            let idx = sc.atom_index(b, [0, 0, 0]);
            let mut plus = cart0.clone();
            plus[idx][alpha] += amplitude;
            let fp = p.evaluate(&sc.structure().with_cart_coords(&plus)?)?;
            let mut minus = cart0.clone();
            minus[idx][alpha] -= amplitude;
            let fm = p.evaluate(&sc.structure().with_cart_coords(&minus)?)?;
            let mut row = vec![[0.0; 3]; n_sup];
            for j in 0..n_sup {
                for beta in 0..3 {
                    let v = -(fp.forces[j][beta] - fm.forces[j][beta]) / (2.0 * amplitude);
                    if !v.is_finite() {
                        return Err(PhononError::NonFiniteForces(b * 3 + alpha));
                    }
                    row[j][beta] = v;
                }
            }
            Ok(row)
        })
        .collect();

    let mut fc = vec![vec![[[0.0; 3]; 3]; n_sup]; n_prim];
    for (t, row) in tasks.iter().zip(rows) {
        let (b, alpha) = *t;
        let row = row?;
        for j in 0..n_sup {
            for beta in 0..3 {
                fc[b][j][alpha][beta] = row[j][beta];
            }
        }
    }

    // acoustic sum rule: push any row imbalance into the self block
    for b in 0..n_prim {
        let self_idx = sc.atom_index(b, [0, 0, 0]);
        for alpha in 0..3 {
            for beta in 0..3 {
                let sum: f64 = fc[b].iter().map(|blk| blk[alpha][beta]).sum();
                fc[b][self_idx][alpha][beta] -= sum;
            }
        }
    }

    let images = image_map(s, &sc);
    Ok(ForceConstants {
        supercell: sc,
        primitive: s.clone(),
        fc,
        images,
        amplitude,
        residual_force,
    })
}

/// For each (primitive atom b, supercell atom j), the set of supercell
/// translations that put the j image closest to b, with equal weights when
/// several images tie (Wigner-Seitz multiplicity splitting).
fn image_map(prim: &Structure, sc: &Supercell) -> Vec<Vec<Vec<([i64; 3], f64)>>> {
    let n_prim = prim.n_atoms();
    let n_sup = sc.structure().n_atoms();
    let rep = sc.repeat();
    let prim_cart: Vec<[f64; 3]> = prim.cart_coords();
    let rows = prim.lattice().rows();
    let mut out = vec![vec![Vec::new(); n_sup]; n_prim];
    for b in 0..n_prim {
        for j in 0..n_sup {
            let (bj, cell) = sc.map()[j];
            let mut candidates: Vec<([i64; 3], f64)> = Vec::new();
            for n0 in -1..=1i64 {
                for n1 in -1..=1i64 {
                    for n2 in -1..=1i64 {
                        let r_int = [
                            cell[0] + n0 * rep[0] as i64,
                            cell[1] + n1 * rep[1] as i64,
                            cell[2] + n2 * rep[2] as i64,
                        ];
                        let mut d2 = 0.0;
                        for x in 0..3 {
                            let dx = prim_cart[bj][x]
                                + r_int[0] as f64 * rows[0][x]
                                + r_int[1] as f64 * rows[1][x]
                                + r_int[2] as f64 * rows[2][x]
                                - prim_cart[b][x];
                            d2 += dx * dx;
                        }
                        candidates.push((r_int, d2));
                    }
                }
            }
            let best = candidates
                .iter()
                .map(|(_, d2)| *d2)
                .fold(f64::INFINITY, f64::min);
            let ties: Vec<[i64; 3]> = candidates
                .iter()
                .filter(|(_, d2)| d2 - best < 1e-8)
                .map(|(r, _)| *r)
                .collect();
            let w = 1.0 / ties.len() as f64;
            out[b][j] = ties.into_iter().map(|r| (r, w)).collect();
        }
    }
    out
}

/// Mass-weighted dynamical matrix D(q) with the e^{iq·R} gauge; q is in
/// fractional reciprocal coordinates of the primitive cell.
pub fn dynamical_matrix(fc: &ForceConstants, q: [f64; 3]) -> DMatrix<Complex<f64>> {
    let n = fc.primitive.n_atoms();
    let masses: Vec<f64> = fc.primitive.species().iter().map(|e| e.mass()).collect();
    let mut d = DMatrix::<Complex<f64>>::zeros(3 * n, 3 * n);
    for b in 0..n {
        for (j, &(bj, _)) in fc.supercell.map().iter().enumerate() {
            let block = &fc.fc[b][j];
            let mut phase = Complex::new(0.0, 0.0);
            for &(r, w) in &fc.images[b][j] {
                let arg = 2.0
                    * std::f64::consts::PI
                    * (q[0] * r[0] as f64 + q[1] * r[1] as f64 + q[2] * r[2] as f64);
                phase += Complex::new(arg.cos(), arg.sin()).scale(w);
            }
            let inv_mass = 1.0 / (masses[b] * masses[bj]).sqrt();
            for alpha in 0..3 {
                for beta in 0..3 {
                    d[(3 * b + alpha, 3 * bj + beta)] +=
                        phase.scale(block[alpha][beta] * inv_mass);
                }
            }
        }
    }
    // hermitize: symmetric average removes finite-displacement asymmetry
    let dagger = d.adjoint();
    (d + dagger).scale(0.5)
}

/// Frequencies (THz, ascending; imaginary stored as negative) at one q.
pub fn frequencies_at(fc: &ForceConstants, q: [f64; 3]) -> Vec<f64> {
    let d = dynamical_matrix(fc, q);
    let eig = d.symmetric_eigen();
    let mut nu: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&lambda| lambda.signum() * lambda.abs().sqrt() * SQRT_EV_A2_AMU_TO_THZ)
        .collect();
    nu.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nu
}

/// Phonon frequencies over a set of q-points, with optional group
/// velocities when the set is a regular grid.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct PhononResult {
    /// Fractional q-points of the primitive reciprocal cell.
    pub qpoints: Vec<[f64; 3]>,
    /// ν (THz) per q-point, 3n branches sorted ascending; negative values
    /// mark imaginary modes.
    pub frequencies: Vec<Vec<f64>>,
    /// Å/fs per (q, branch), present for grid dispersions on request.
    pub group_velocities: Option<Vec<Vec<[f64; 3]>>>,
    /// Primitive-cell atom count.
    pub n_atoms: usize,
    /// Primitive-cell volume, Å³.
    pub primitive_volume: f64,
}

impl PhononResult {
    pub fn n_qpoints(&self) -> usize {
        self.qpoints.len()
    }

    pub fn n_branches(&self) -> usize {
        3 * self.n_atoms
    }

    pub fn min_frequency(&self) -> f64 {
        self.frequencies
            .iter()
            .flatten()
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn has_imaginary(&self) -> bool {
        self.min_frequency() < -ZERO_TOL_THZ
    }

    /// First q-point carrying a mode below −ZERO_TOL_THZ, if any.
    pub fn first_imaginary(&self) -> Option<([f64; 3], f64)> {
        for (q, nus) in self.qpoints.iter().zip(&self.frequencies) {
            if let Some(&lowest) = nus.first() {
                if lowest < -ZERO_TOL_THZ {
                    return Some((*q, lowest));
                }
            }
        }
        None
    }
}

/// Dispersion along an explicit q-point path (no group velocities).
pub fn dispersion_path(fc: &ForceConstants, qpath: &[[f64; 3]]) -> PhononResult {
    let frequencies: Vec<Vec<f64>> = qpath
        .par_iter()
        .map(|&q| frequencies_at(fc, q))
        .collect();
    PhononResult {
        qpoints: qpath.to_vec(),
        frequencies,
        group_velocities: None,
        n_atoms: fc.primitive.n_atoms(),
        primitive_volume: fc.primitive.volume(),
    }
}

/// Dispersion on a Γ-centered regular grid; group velocities by central
/// differences over the periodic grid when requested.
pub fn dispersion_grid(
    fc: &ForceConstants,
    grid: [usize; 3],
    with_velocities: bool,
) -> PhononResult {
    let mut qpoints = Vec::with_capacity(grid[0] * grid[1] * grid[2]);
    for i in 0..grid[0] {
        for j in 0..grid[1] {
            for k in 0..grid[2] {
                qpoints.push([
                    i as f64 / grid[0] as f64,
                    j as f64 / grid[1] as f64,
                    k as f64 / grid[2] as f64,
                ]);
            }
        }
    }
    let frequencies: Vec<Vec<f64>> = qpoints
        .par_iter()
        .map(|&q| frequencies_at(fc, q))
        .collect();

    let group_velocities = with_velocities.then(|| {
        let idx = |i: usize, j: usize, k: usize| (i * grid[1] + j) * grid[2] + k;
        let rows = fc.primitive.lattice().rows();
        let n_branch = 3 * fc.primitive.n_atoms();
        let mut vel = vec![vec![[0.0; 3]; n_branch]; qpoints.len()];
        for i in 0..grid[0] {
            for j in 0..grid[1] {
                for k in 0..grid[2] {
                    let q = idx(i, j, k);
                    let neighbors = [
                        (idx((i + 1) % grid[0], j, k), idx((i + grid[0] - 1) % grid[0], j, k), grid[0]),
                        (idx(i, (j + 1) % grid[1], k), idx(i, (j + grid[1] - 1) % grid[1], k), grid[1]),
                        (idx(i, j, (k + 1) % grid[2]), idx(i, j, (k + grid[2] - 1) % grid[2]), grid[2]),
                    ];
                    // v_x = 1e-3 · Σ_axis L[axis][x] · ∂ν/∂q_frac,axis
                    // (the 2π of ω and of the reciprocal basis cancel)
                    for br in 0..n_branch {
                        for (axis, &(qp, qm, n_axis)) in neighbors.iter().enumerate() {
                            if n_axis > 1 {
                                let dnu = (frequencies[qp][br] - frequencies[qm][br])
                                    / (2.0 / n_axis as f64);
                                for x in 0..3 {
                                    vel[q][br][x] += 1e-3 * rows[axis][x] * dnu;
                                }
                            }
                        }
                    }
                }
            }
        }
        vel
    });

    PhononResult {
        qpoints,
        frequencies,
        group_velocities,
        n_atoms: fc.primitive.n_atoms(),
        primitive_volume: fc.primitive.volume(),
    }
}
