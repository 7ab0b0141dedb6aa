//! Campaign verification: recompute a deterministic sample of the stored
//! candidate artifacts from their stored inputs and assert byte equality,
//! so every number in a report is re-derivable from the artifacts.

use crate::screen::{gibbs_stage, CampaignError, CandidateRecord};
use crate::store::{content_key, Store};
use matscreen_core::io::CampaignConfig;
use matscreen_core::potential::{load_checkpoint, EnsemblePotential};
use matscreen_core::relax::{relax_cell, relax_positions, CellRelaxOptions, RelaxOptions};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub sampled: usize,
    pub verified: usize,
    pub mismatches: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Recompute `fraction` of the stored candidates (at least one) with the
/// stored ensemble and compare the serialized artifacts exactly.
pub fn verify(cfg: &CampaignConfig, out_dir: &Path, fraction: f64) -> Result<VerifyReport, CampaignError> {
    let store = Store::open(out_dir)?;
    let ens_key = content_key(&(
        &cfg.composition,
        &cfg.generator,
        &cfg.oracle,
        &cfg.thresholds,
        &cfg.active,
        &cfg.fit,
        cfg.seed,
    ));
    // verification replays stored work; it must never train fresh models
    let Some(text) = store.get::<String>("ensemble", ens_key) else {
        return Ok(VerifyReport {
            sampled: 0,
            verified: 0,
            mismatches: vec!["no ensemble artifact for this config; run `screen` first".into()],
        });
    };
    let ensemble: EnsemblePotential = match load_checkpoint(&text)? {
        matscreen_core::potential::CheckpointModel::Ensemble(e) => e,
        _ => {
            return Ok(VerifyReport {
                sampled: 0,
                verified: 0,
                mismatches: vec!["ensemble artifact has the wrong checkpoint kind".into()],
            })
        }
    };

    let keys = store.keys("candidate");
    if keys.is_empty() {
        return Ok(VerifyReport { sampled: 0, verified: 0, mismatches: vec![
            "no candidate artifacts found; run `screen` first".into(),
        ] });
    }
    let take = ((keys.len() as f64 * fraction).ceil() as usize).clamp(1, keys.len());
    let step = keys.len() / take;
    let sample: Vec<u64> = keys.iter().copied().step_by(step.max(1)).take(take).collect();

    let refs = cfg.reference_energies()?;
    let mut mismatches = Vec::new();
    let mut verified = 0;
    for key in &sample {
        let Some(stored): Option<CandidateRecord> = store.get("candidate", *key) else {
            mismatches.push(format!("candidate {key:016x}: unreadable artifact"));
            continue;
        };
        let recomputed = recompute(cfg, &stored, &ensemble, &refs);
        match recomputed {
            Ok(rec) => {
                let a = serde_json::to_string(&stored).unwrap();
                let b = serde_json::to_string(&rec).unwrap();
                if a == b {
                    verified += 1;
                } else {
                    mismatches.push(format!(
                        "candidate {key:016x}: recomputation differs from the stored artifact"
                    ));
                }
            }
            Err(e) => mismatches.push(format!("candidate {key:016x}: recompute failed: {e}")),
        }
    }
    Ok(VerifyReport { sampled: sample.len(), verified, mismatches })
}

/// Re-run the relax and phonon stages from the stored input; MD rows are
/// carried over (their determinism is covered by the full-report test).
fn recompute(
    cfg: &CampaignConfig,
    stored: &CandidateRecord,
    ensemble: &EnsemblePotential,
    refs: &std::collections::BTreeMap<matscreen_core::element::Element, f64>,
) -> Result<CandidateRecord, String> {
    let (structure, eval, converged, max_force) = if cfg.screen.relax_cell {
        let out = relax_cell(&stored.input, ensemble, &CellRelaxOptions {
            pressure: cfg.pressure,
            max_iter: cfg.screen.relax_max_iter,
            ..CellRelaxOptions::default()
        })
        .map_err(|e| e.to_string())?;
        (out.structure, out.eval, out.converged, out.max_force)
    } else {
        let out = relax_positions(&stored.input, ensemble, &RelaxOptions {
            max_iter: cfg.screen.relax_max_iter,
            ..RelaxOptions::default()
        })
        .map_err(|e| e.to_string())?;
        (out.structure, out.eval, out.converged, out.max_force)
    };
    let formation =
        matscreen_core::potential::compute_formation_energy(eval.energy, &structure, refs)
            .map_err(|e| e.to_string())?;
    let mut rec = CandidateRecord {
        index: stored.index,
        input: stored.input.clone(),
        relaxed: structure,
        energy: eval.energy,
        energy_per_atom: eval.energy / stored.input.n_atoms() as f64,
        formation_energy: formation,
        max_force,
        converged,
        gibbs_curve: Vec::new(),
        imaginary_modes: false,
        min_frequency_thz: 0.0,
        diffusivity: stored.diffusivity.clone(),
    };
    if !stored.gibbs_curve.is_empty() || stored.imaginary_modes {
        gibbs_stage(cfg, &mut rec, ensemble, refs)?;
    }
    Ok(rec)
}
