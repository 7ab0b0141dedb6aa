//! Evaluatable interatomic models: analytic pair forms, a seeded oracle
//! standing in for the ground-truth reference, a trainable descriptor
//! potential, and ensembles with uncertainty statistics.

mod checkpoint;
mod descriptor;
mod ensemble;
mod oracle;
mod pair;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError,
                     CheckpointModel, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use descriptor::{DescriptorPotential, DescriptorSpec, FrameGeometry, TrainMeta};
pub(crate) use descriptor::accumulate_net_grad as descriptor_grad;
pub use ensemble::{ensemble_stats, EnsemblePotential, EnsembleStats};
pub use oracle::{oracle_potential, OraclePotential, OracleSpec, PairOverride};
pub use pair::{HarmonicSpring, LennardJones, Morse, PairKind};

use crate::element::Element;
use crate::structure::{Structure, StructureError};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum PotentialError {
    #[error("species {0} not covered by this potential")]
    UncoveredSpecies(Element),
    #[error("missing reference energy for element {0}")]
    MissingReference(Element),
    #[error("non-finite {what} encountered during evaluation")]
    NonFinite { what: &'static str },
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Energy, forces, and virial stress of one configuration.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalResult {
    /// Total potential energy, eV.
    pub energy: f64,
    /// Per-atom forces, eV/Å.
    pub forces: Vec<[f64; 3]>,
    /// Virial stress tensor, eV/Å³ (tension positive).
    pub stress: [[f64; 3]; 3],
}

impl EvalResult {
    pub fn zero(n: usize) -> Self {
        EvalResult {
            energy: 0.0,
            forces: vec![[0.0; 3]; n],
            stress: [[0.0; 3]; 3],
        }
    }

    /// Largest per-atom force magnitude, eV/Å.
    pub fn max_force(&self) -> f64 {
        self.forces
            .iter()
            .map(|f| crate::structure::norm(*f))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.energy.is_finite()
            && self.forces.iter().all(|f| f.iter().all(|x| x.is_finite()))
            && self.stress.iter().all(|r| r.iter().all(|x| x.is_finite()))
    }
}

/// An evaluatable interatomic model. Implementations are immutable after
/// construction, so evaluation is pure and safe to run concurrently.
pub trait Potential: Send + Sync {
    fn evaluate(&self, s: &Structure) -> Result<EvalResult, PotentialError>;

    /// Species the model can evaluate; `None` means species-agnostic.
    fn supported_species(&self) -> Option<Vec<Element>> {
        None
    }
}

impl<P: Potential + ?Sized> Potential for &P {
    fn evaluate(&self, s: &Structure) -> Result<EvalResult, PotentialError> {
        (**self).evaluate(s)
    }
    fn supported_species(&self) -> Option<Vec<Element>> {
        (**self).supported_species()
    }
}

impl<P: Potential + ?Sized> Potential for Box<P> {
    fn evaluate(&self, s: &Structure) -> Result<EvalResult, PotentialError> {
        (**self).evaluate(s)
    }
    fn supported_species(&self) -> Option<Vec<Element>> {
        (**self).supported_species()
    }
}

impl<P: Potential + ?Sized> Potential for std::sync::Arc<P> {
    fn evaluate(&self, s: &Structure) -> Result<EvalResult, PotentialError> {
        (**self).evaluate(s)
    }
    fn supported_species(&self) -> Option<Vec<Element>> {
        (**self).supported_species()
    }
}

pub(crate) fn check_coverage(p: &dyn Potential, s: &Structure) -> Result<(), PotentialError> {
    if let Some(cov) = p.supported_species() {
        for &e in s.species() {
            if !cov.contains(&e) {
                return Err(PotentialError::UncoveredSpecies(e));
            }
        }
    }
    Ok(())
}

/// Formation energy per atom relative to elemental reference energies:
/// `(E_total − Σ_e n_e·μ_e) / n`.
pub fn compute_formation_energy(
    e_total: f64,
    s: &Structure,
    refs: &BTreeMap<Element, f64>,
) -> Result<f64, PotentialError> {
    let mut e = e_total;
    for (el, count) in s.composition() {
        let mu = refs.get(&el).ok_or(PotentialError::MissingReference(el))?;
        e -= count as f64 * mu;
    }
    Ok(e / s.n_atoms() as f64)
}
