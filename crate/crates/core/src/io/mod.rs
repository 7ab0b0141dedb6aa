//! Parsers and writers for structure and dataset files, plus campaign
//! configuration.
//!
//! All functions here are pure text transforms; file handling lives with
//! the callers. Floating-point output uses 16 significant digits so that
//! directly printed fields round-trip bit-stably.

mod config;
mod extxyz;
mod poscar;

pub use config::{load_config, CampaignConfig, CompositionConfig, FitConfig, GeneratorConfig,
                 MdConfig, OracleConfig, ScreenConfig, ThresholdConfig};
pub use extxyz::{read_extxyz, write_extxyz};
pub use poscar::{read_poscar, write_poscar};

use crate::structure::{Structure, StructureError};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unknown element symbol {symbol:?}")]
    UnknownElement { line: usize, symbol: String },
    #[error("missing {key}")]
    MissingKey { key: String },
    #[error("{what}: expected {expected}, got {got}")]
    CountMismatch { what: String, expected: usize, got: usize },
    #[error("config error:\n{0}")]
    Config(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Where a labeled frame's reference values came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Oracle,
    External,
    Predicted,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Oracle => "oracle",
            Provenance::External => "external",
            Provenance::Predicted => "predicted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "oracle" => Some(Provenance::Oracle),
            "external" => Some(Provenance::External),
            "predicted" => Some(Provenance::Predicted),
            _ => None,
        }
    }
}

/// One training sample: a structure with total energy, per-atom forces,
/// and virial stress. The stress is symmetrized on construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledFrame {
    pub structure: Structure,
    /// Total energy, eV.
    pub energy: f64,
    /// Per-atom forces, eV/Å.
    pub forces: Vec<[f64; 3]>,
    /// Symmetric stress tensor, eV/Å³.
    pub stress: [[f64; 3]; 3],
    pub provenance: Provenance,
}

impl LabeledFrame {
    pub fn new(
        structure: Structure,
        energy: f64,
        forces: Vec<[f64; 3]>,
        stress: [[f64; 3]; 3],
        provenance: Provenance,
    ) -> Result<Self, IoError> {
        if forces.len() != structure.n_atoms() {
            return Err(IoError::CountMismatch {
                what: "forces rows".into(),
                expected: structure.n_atoms(),
                got: forces.len(),
            });
        }
        let mut sym = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                sym[a][b] = 0.5 * (stress[a][b] + stress[b][a]);
            }
        }
        Ok(LabeledFrame { structure, energy, forces, stress: sym, provenance })
    }

    pub fn n_atoms(&self) -> usize {
        self.structure.n_atoms()
    }

    pub fn energy_per_atom(&self) -> f64 {
        self.energy / self.n_atoms() as f64
    }

    /// Label a structure by evaluating a potential on it.
    pub fn from_evaluation(
        structure: Structure,
        out: &crate::potential::EvalResult,
        provenance: Provenance,
    ) -> Self {
        LabeledFrame::new(structure, out.energy, out.forces.clone(), out.stress, provenance)
            .expect("evaluation output matches structure")
    }
}

/// 16-significant-digit scientific formatting used by all writers.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{:.15e}", x)
}
