//! Finite-difference validation of analytic derivatives.
//!
//! These helpers only call `Potential::evaluate` and do arithmetic, so they
//! stay independent of whatever analytic-gradient path a model implements.

use crate::potential::{Potential, PotentialError};
use crate::structure::{mat_mul, Lattice, Structure};
use rand::Rng;

/// Max abs deviation between analytic forces and central finite differences
/// of the energy, over all atoms and Cartesian components. eV/Å.
pub fn force_fd_error(
    p: &dyn Potential,
    s: &Structure,
    step: f64,
) -> Result<f64, PotentialError> {
    let base = p.evaluate(s)?;
    let cart = s.cart_coords();
    let mut max_err = 0.0_f64;
    for i in 0..s.n_atoms() {
        for x in 0..3 {
            let mut plus = cart.clone();
            plus[i][x] += step;
            let mut minus = cart.clone();
            minus[i][x] -= step;
            let ep = p.evaluate(&s.with_cart_coords(&plus)?)?.energy;
            let em = p.evaluate(&s.with_cart_coords(&minus)?)?.energy;
            let fd = -(ep - em) / (2.0 * step);
            max_err = max_err.max((fd - base.forces[i][x]).abs());
        }
    }
    Ok(max_err)
}

/// Max abs deviation between the analytic virial stress and the strain
/// derivative (1/V)·∂E/∂ε via central differences with symmetric strains.
/// eV/Å³.
pub fn stress_fd_error(
    p: &dyn Potential,
    s: &Structure,
    delta: f64,
) -> Result<f64, PotentialError> {
    let base = p.evaluate(s)?;
    let vol = s.volume();
    let mut max_err = 0.0_f64;
    for a in 0..3 {
        for b in a..3 {
            let eval_at = |sign: f64| -> Result<f64, PotentialError> {
                let mut eps = [[0.0; 3]; 3];
                if a == b {
                    eps[a][b] = sign * delta;
                } else {
                    eps[a][b] = sign * delta / 2.0;
                    eps[b][a] = sign * delta / 2.0;
                }
                let strained = strain_structure(s, &eps)?;
                Ok(p.evaluate(&strained)?.energy)
            };
            let fd = (eval_at(1.0)? - eval_at(-1.0)?) / (2.0 * delta * vol);
            max_err = max_err.max((fd - base.stress[a][b]).abs());
        }
    }
    Ok(max_err)
}

/// Apply an affine strain: lattice rows transform as `L → L·(I+ε)` and the
/// fractional coordinates are kept, which moves atoms affinely.
pub fn strain_structure(
    s: &Structure,
    eps: &[[f64; 3]; 3],
) -> Result<Structure, crate::structure::StructureError> {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = eps[i][j] + if i == j { 1.0 } else { 0.0 };
        }
    }
    Ok(s.with_lattice(s.lattice().deformed(&m)?))
}

/// Uniformly random proper rotation matrix (Arvo's quaternion method).
pub fn random_rotation<R: Rng>(rng: &mut R) -> [[f64; 3]; 3] {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let u3: f64 = rng.gen();
    let tau = std::f64::consts::TAU;
    let q = [
        (1.0 - u1).sqrt() * (tau * u2).sin(),
        (1.0 - u1).sqrt() * (tau * u2).cos(),
        u1.sqrt() * (tau * u3).sin(),
        u1.sqrt() * (tau * u3).cos(),
    ];
    let (x, y, z, w) = (q[0], q[1], q[2], q[3]);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Rotate a structure rigidly: row-vector lattice maps as `L → L·Rᵀ`.
pub fn rotate_structure(s: &Structure, rot: &[[f64; 3]; 3]) -> Structure {
    let mut rt = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            rt[i][j] = rot[j][i];
        }
    }
    let rows = mat_mul(s.lattice().rows(), &rt);
    s.with_lattice(Lattice::new(rows).expect("rotation preserves handedness"))
}
