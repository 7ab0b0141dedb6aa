//! Analytic pair potentials with a smooth cutoff switch.

use super::{EvalResult, Potential, PotentialError};
use crate::element::Element;
use crate::neighbor::build_neighbor_list;
use crate::structure::Structure;

/// Analytic radial pair forms: value and d/dr.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum PairKind {
    LennardJones { epsilon: f64, sigma: f64 },
    Morse { depth: f64, width: f64, r_eq: f64 },
    HarmonicSpring { k: f64, r_eq: f64 },
}

impl PairKind {
    pub fn value_and_derivative(&self, r: f64) -> (f64, f64) {
        match *self {
            PairKind::LennardJones { epsilon, sigma } => {
                let s6 = (sigma / r).powi(6);
                let v = 4.0 * epsilon * (s6 * s6 - s6);
                let dv = 24.0 * epsilon * (s6 - 2.0 * s6 * s6) / r;
                (v, dv)
            }
            PairKind::Morse { depth, width, r_eq } => {
                let e = (-width * (r - r_eq)).exp();
                let v = depth * ((1.0 - e) * (1.0 - e) - 1.0);
                let dv = 2.0 * depth * width * e * (1.0 - e);
                (v, dv)
            }
            PairKind::HarmonicSpring { k, r_eq } => {
                (0.5 * k * (r - r_eq) * (r - r_eq), k * (r - r_eq))
            }
        }
    }
}

/// Quintic switch: 1 below `start`, 0 above `end`, C² everywhere.
/// Returns (S, dS/dr).
pub(crate) fn switch(r: f64, start: f64, end: f64) -> (f64, f64) {
    if r <= start {
        (1.0, 0.0)
    } else if r >= end {
        (0.0, 0.0)
    } else {
        let w = end - start;
        let t = (r - start) / w;
        let s = 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        let ds = -30.0 * t * t * (1.0 - t) * (1.0 - t) / w;
        (s, ds)
    }
}

/// Shared pairwise evaluator over the directed neighbor list.
///
/// `form(e_i, e_j, r) -> (v, dv/dr)` is the bare pair law; the switch is
/// applied here. Energy counts each directed pair with weight 1/2.
pub(crate) fn eval_pairwise<F>(
    s: &Structure,
    cutoff: f64,
    switch_start: f64,
    form: F,
) -> Result<EvalResult, PotentialError>
where
    F: Fn(Element, Element, f64) -> (f64, f64),
{
    let nl = build_neighbor_list(s, cutoff)?;
    let n = s.n_atoms();
    let species = s.species();
    let mut out = EvalResult::zero(n);
    for p in &nl.pairs {
        let (v0, dv0) = form(species[p.i], species[p.j], p.distance);
        let (sw, dsw) = switch(p.distance, switch_start, cutoff);
        let v = v0 * sw;
        let dv = dv0 * sw + v0 * dsw;
        out.energy += 0.5 * v;
        let u = [
            p.displacement[0] / p.distance,
            p.displacement[1] / p.distance,
            p.displacement[2] / p.distance,
        ];
        for x in 0..3 {
            out.forces[p.i][x] += dv * u[x];
        }
        for a in 0..3 {
            for b in 0..3 {
                out.stress[a][b] += 0.5 * dv * p.displacement[a] * p.displacement[b] / p.distance;
            }
        }
    }
    let vol = s.volume();
    for a in 0..3 {
        for b in 0..3 {
            out.stress[a][b] /= vol;
        }
    }
    if !out.is_finite() {
        return Err(PotentialError::NonFinite { what: "pair energy" });
    }
    Ok(out)
}

/// Single-species Lennard-Jones with a quintic cutoff switch.
///
/// Inside `switch_start` the value is the bare 12-6 form, so the dimer
/// minimum at r = 2^(1/6)·σ has E = −ε exactly when the box isolates it.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct LennardJones {
    pub epsilon: f64,
    pub sigma: f64,
    pub cutoff: f64,
    pub switch_start: f64,
}

impl LennardJones {
    pub fn new(epsilon: f64, sigma: f64, cutoff: f64) -> Self {
        LennardJones {
            epsilon,
            sigma,
            cutoff,
            switch_start: 0.9 * cutoff,
        }
    }
}

impl Default for LennardJones {
    fn default() -> Self {
        LennardJones::new(1.0, 1.0, 3.0)
    }
}

impl Potential for LennardJones {
    fn evaluate(&self, s: &Structure) -> Result<EvalResult, PotentialError> {
        let kind = PairKind::LennardJones {
            epsilon: self.epsilon,
            sigma: self.sigma,
        };
        eval_pairwise(s, self.cutoff, self.switch_start, |_, _, r| {
            kind.value_and_derivative(r)
        })
    }
}

/// Single-species Morse potential with a quintic cutoff switch.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct Morse {
    pub depth: f64,
    pub width: f64,
    pub r_eq: f64,
    pub cutoff: f64,
    pub switch_start: f64,
}

impl Morse {
    pub fn new(depth: f64, width: f64, r_eq: f64, cutoff: f64) -> Self {
        Morse {
            depth,
            width,
            r_eq,
            cutoff,
            switch_start: 0.9 * cutoff,
        }
    }
}

impl Potential for Morse {
    fn evaluate(&self, s: &Structure) -> Result<EvalResult, PotentialError> {
        let kind = PairKind::Morse {
            depth: self.depth,
            width: self.width,
            r_eq: self.r_eq,
        };
        eval_pairwise(s, self.cutoff, self.switch_start, |_, _, r| {
            kind.value_and_derivative(r)
        })
    }
}

/// Harmonic pair spring, cut off abruptly at `cutoff` (no switch): used as
/// an exactly solvable reference where no pair sits near the cutoff.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct HarmonicSpring {
    pub k: f64,
    pub r_eq: f64,
    pub cutoff: f64,
}

impl Potential for HarmonicSpring {
    fn evaluate(&self, s: &Structure) -> Result<EvalResult, PotentialError> {
        let kind = PairKind::HarmonicSpring {
            k: self.k,
            r_eq: self.r_eq,
        };
        // switch_start == cutoff disables the switch entirely
        eval_pairwise(s, self.cutoff, self.cutoff, |_, _, r| {
            kind.value_and_derivative(r)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::Lattice;
    use approx::assert_relative_eq;

    fn el(s: &str) -> Element {
        Element::from_symbol(s).unwrap()
    }

    fn dimer(r: f64, box_len: f64) -> Structure {
        Structure::new(
            vec![el("Ar"), el("Ar")],
            vec![[0.1, 0.1, 0.1], [0.1 + r / box_len, 0.1, 0.1]],
            Lattice::cubic(box_len).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn lj_dimer_minimum() {
        let lj = LennardJones::new(1.0, 1.0, 3.0);
        let r = 2.0_f64.powf(1.0 / 6.0);
        let out = lj.evaluate(&dimer(r, 20.0)).unwrap();
        assert_relative_eq!(out.energy, -1.0, epsilon = 1e-12);
        assert!(out.max_force() < 1e-10);
    }

    #[test]
    fn lj_zero_crossing_at_sigma() {
        let lj = LennardJones::new(1.0, 1.0, 3.0);
        let out = lj.evaluate(&dimer(1.0, 20.0)).unwrap();
        assert_relative_eq!(out.energy, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn translation_invariance() {
        let lj = LennardJones::new(1.0, 1.0, 3.0);
        let s = Structure::new(
            vec![el("Ar"); 3],
            vec![[0.1, 0.1, 0.1], [0.25, 0.12, 0.08], [0.15, 0.3, 0.22]],
            Lattice::cubic(8.0).unwrap(),
        )
        .unwrap();
        let a = lj.evaluate(&s).unwrap();
        let shift = 1.0 / 8.0; // +1 Å in fractional units
        let moved: Vec<[f64; 3]> = s
            .frac_coords()
            .iter()
            .map(|f| [f[0] + shift, f[1] + shift, f[2] + shift])
            .collect();
        let b = lj.evaluate(&s.with_frac_coords(moved).unwrap()).unwrap();
        assert_relative_eq!(a.energy, b.energy, epsilon = 1e-12);
        for (fa, fb) in a.forces.iter().zip(&b.forces) {
            for x in 0..3 {
                assert_relative_eq!(fa[x], fb[x], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn morse_dimer_minimum_depth() {
        let m = Morse::new(0.8, 1.5, 1.8, 5.0);
        let out = m.evaluate(&dimer(1.8, 25.0)).unwrap();
        assert_relative_eq!(out.energy, -0.8, epsilon = 1e-12);
        assert!(out.max_force() < 1e-12);
    }

    #[test]
    fn switch_is_smooth_and_bounded() {
        let (s0, d0) = switch(1.0, 2.0, 3.0);
        assert_eq!((s0, d0), (1.0, 0.0));
        let (s1, d1) = switch(3.5, 2.0, 3.0);
        assert_eq!((s1, d1), (0.0, 0.0));
        let (sm, _) = switch(2.5, 2.0, 3.0);
        assert_relative_eq!(sm, 0.5, epsilon = 1e-12);
        // derivative consistency near the edges
        for r in [2.001, 2.5, 2.999] {
            let h = 1e-6;
            let (sp, _) = switch(r + h, 2.0, 3.0);
            let (sm_, _) = switch(r - h, 2.0, 3.0);
            let (_, d) = switch(r, 2.0, 3.0);
            assert_relative_eq!(d, (sp - sm_) / (2.0 * h), epsilon = 1e-6);
        }
    }

    #[test]
    fn supercell_energy_extensive() {
        let lj = LennardJones::new(1.0, 1.0, 2.5);
        let s = Structure::new(
            vec![el("Ar"), el("Ar")],
            vec![[0.0, 0.0, 0.0], [0.5, 0.5, 0.5]],
            Lattice::cubic(1.6).unwrap(),
        )
        .unwrap();
        let base = lj.evaluate(&s).unwrap().energy / s.n_atoms() as f64;
        let sc = crate::structure::make_supercell(&s, [2, 3, 1]).unwrap();
        let tiled = lj.evaluate(sc.structure()).unwrap().energy / sc.structure().n_atoms() as f64;
        assert_relative_eq!(base, tiled, epsilon = 1e-10, max_relative = 1e-8);
    }
}
