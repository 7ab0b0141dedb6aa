//! Ensembles of descriptor potentials and their uncertainty statistics.

use super::{DescriptorPotential, EvalResult, Potential, PotentialError};
use crate::element::Element;
use crate::structure::Structure;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum EnsembleError {
    #[error("an ensemble needs at least 2 members, got {0}")]
    TooFewMembers(usize),
}

/// Committee of independently initialized models trained on the same data.
/// Prediction is the arithmetic mean of the members.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsemblePotential {
    members: Vec<DescriptorPotential>,
}

impl EnsemblePotential {
    pub fn new(members: Vec<DescriptorPotential>) -> Result<Self, EnsembleError> {
        if members.len() < 2 {
            return Err(EnsembleError::TooFewMembers(members.len()));
        }
        Ok(EnsemblePotential { members })
    }

    pub fn members(&self) -> &[DescriptorPotential] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl Potential for EnsemblePotential {
    fn evaluate(&self, s: &Structure) -> Result<EvalResult, PotentialError> {
        Ok(ensemble_stats(self, s)?.mean)
    }

    fn supported_species(&self) -> Option<Vec<Element>> {
        // intersection of member coverage
        let mut cov: Option<Vec<Element>> = None;
        for m in &self.members {
            let sp = m.supported_species()?;
            cov = Some(match cov {
                None => sp,
                Some(prev) => prev.into_iter().filter(|e| sp.contains(e)).collect(),
            });
        }
        cov
    }
}

/// Mean prediction and committee spread for one structure.
#[derive(Clone, Debug)]
pub struct EnsembleStats {
    pub mean: EvalResult,
    /// Population std of per-atom member energies, eV/atom.
    pub energy_std: f64,
    /// Max over atoms of the population std of force magnitudes, eV/Å.
    pub force_std: f64,
    /// Max over components of the population std of the stress, eV/Å³.
    pub stress_std: f64,
}

pub fn ensemble_stats(
    e: &EnsemblePotential,
    s: &Structure,
) -> Result<EnsembleStats, PotentialError> {
    let k = e.members.len();
    let n = s.n_atoms();
    let results: Vec<EvalResult> = e
        .members
        .iter()
        .map(|m| m.evaluate(s))
        .collect::<Result<_, _>>()?;

    let mut mean = EvalResult::zero(n);
    for r in &results {
        mean.energy += r.energy;
        for (fa, fb) in mean.forces.iter_mut().zip(&r.forces) {
            for x in 0..3 {
                fa[x] += fb[x];
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                mean.stress[a][b] += r.stress[a][b];
            }
        }
    }
    let inv_k = 1.0 / k as f64;
    mean.energy *= inv_k;
    for f in &mut mean.forces {
        for x in 0..3 {
            f[x] *= inv_k;
        }
    }
    for a in 0..3 {
        for b in 0..3 {
            mean.stress[a][b] *= inv_k;
        }
    }

    let e_mean_per_atom = mean.energy / n as f64;
    let energy_var = results
        .iter()
        .map(|r| {
            let d = r.energy / n as f64 - e_mean_per_atom;
            d * d
        })
        .sum::<f64>()
        * inv_k;
    let energy_std = energy_var.sqrt();

    let mut stress_std = 0.0_f64;
    for a in 0..3 {
        for b in 0..3 {
            let m = mean.stress[a][b];
            let var = results
                .iter()
                .map(|r| (r.stress[a][b] - m) * (r.stress[a][b] - m))
                .sum::<f64>()
                * inv_k;
            stress_std = stress_std.max(var.sqrt());
        }
    }

    let mut force_std = 0.0_f64;
    for a in 0..n {
        let mags: Vec<f64> = results
            .iter()
            .map(|r| crate::structure::norm(r.forces[a]))
            .collect();
        let m = mags.iter().sum::<f64>() * inv_k;
        let var = mags.iter().map(|x| (x - m) * (x - m)).sum::<f64>() * inv_k;
        force_std = force_std.max(var.sqrt());
    }

    Ok(EnsembleStats { mean, energy_std, force_std, stress_std })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{DescriptorPotential, DescriptorSpec};
    use crate::structure::Lattice;
    use approx::assert_relative_eq;

    fn el(s: &str) -> Element {
        Element::from_symbol(s).unwrap()
    }

    fn structure() -> Structure {
        Structure::new(
            vec![el("Si"), el("Si")],
            vec![[0.1, 0.1, 0.1], [0.55, 0.5, 0.5]],
            Lattice::cubic(4.5).unwrap(),
        )
        .unwrap()
    }

    fn member(seed: u64) -> DescriptorPotential {
        DescriptorPotential::new_random(vec![el("Si")], DescriptorSpec::default(), 8, seed)
    }

    #[test]
    fn needs_two_members() {
        assert!(EnsemblePotential::new(vec![member(1)]).is_err());
        assert!(EnsemblePotential::new(vec![member(1), member(2)]).is_ok());
    }

    #[test]
    fn identical_members_have_zero_spread() {
        let e = EnsemblePotential::new(vec![member(7), member(7), member(7)]).unwrap();
        let st = ensemble_stats(&e, &structure()).unwrap();
        assert!(st.energy_std < 1e-13, "energy_std = {}", st.energy_std);
        assert!(st.force_std < 1e-13, "force_std = {}", st.force_std);
        // mean equals the single member
        let single = member(7).evaluate(&structure()).unwrap();
        assert_relative_eq!(st.mean.energy, single.energy, epsilon = 1e-12);
    }

    #[test]
    fn two_member_energy_std_hand_value() {
        // offsets shift per-atom energies to -1.00 and -1.04 eV/atom
        let s = structure();
        let mut a = member(3);
        let mut b = member(3);
        let base = a.evaluate(&s).unwrap().energy / s.n_atoms() as f64;
        for net in &mut a.nets {
            net.offset += -1.00 - base;
        }
        for net in &mut b.nets {
            net.offset += -1.04 - base;
        }
        let e = EnsemblePotential::new(vec![a, b]).unwrap();
        let st = ensemble_stats(&e, &s).unwrap();
        assert_relative_eq!(st.energy_std, 0.02, epsilon = 1e-10);
        assert_relative_eq!(st.mean.energy / s.n_atoms() as f64, -1.02, epsilon = 1e-10);
    }

    #[test]
    fn distinct_members_disagree() {
        let e = EnsemblePotential::new(vec![member(1), member(2), member(3), member(4)]).unwrap();
        let st = ensemble_stats(&e, &structure()).unwrap();
        assert!(st.energy_std > 0.0);
        assert!(st.force_std > 0.0);
    }
}
