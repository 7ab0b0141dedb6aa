//! The active-learning loop: flag structures whose committee disagreement
//! exceeds the thresholds, label them with the reference oracle, retrain
//! the ensemble from scratch, and stop once enough fresh candidates pass.

use crate::explore::{generate_candidates, ExploreError, GeneratorSpec};
use crate::fit::{derive_seed, train_ensemble, FitError, FitHyperParams};
use crate::io::{LabeledFrame, Provenance};
use crate::potential::{ensemble_stats, EnsemblePotential, Potential, PotentialError};
use crate::relax::{relax_positions, RelaxOptions};
use crate::structure::Structure;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, thiserror::Error)]
pub enum ActiveError {
    #[error("ensemble training failed at cycle {cycle}: {source}")]
    TrainingFailed { cycle: usize, source: FitError },
    #[error("initial labeled pool is empty after filtering")]
    EmptySeedSet,
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Flagging thresholds and the loop termination criteria.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Thresholds {
    /// eV/atom.
    pub energy_std_max: f64,
    /// eV/Å.
    pub force_std_max: f64,
    /// eV/Å³; disabled when None.
    pub stress_std_max: Option<f64>,
    pub pass_fraction_min: f64,
    pub max_cycles: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            energy_std_max: 0.040,
            force_std_max: 1.0,
            stress_std_max: None,
            pass_fraction_min: 0.90,
            max_cycles: 15,
        }
    }
}

impl Thresholds {
    /// Either-of flagging rule over the committee spreads.
    pub fn flags(&self, energy_std: f64, force_std: f64, stress_std: f64) -> bool {
        energy_std > self.energy_std_max
            || force_std > self.force_std_max
            || self.stress_std_max.map(|s| stress_std > s).unwrap_or(false)
    }
}

/// Flag structures whose ensemble spread exceeds any threshold. Returns the
/// flagged indices and the pass fraction 1 − flagged/total.
pub fn flag_uncertain(
    ensemble: &EnsemblePotential,
    structures: &[Structure],
    thresholds: &Thresholds,
) -> Result<(Vec<usize>, f64), ActiveError> {
    let mut flagged = Vec::new();
    for (i, s) in structures.iter().enumerate() {
        let stats = ensemble_stats(ensemble, s)?;
        if thresholds.flags(stats.energy_std, stats.force_std, stats.stress_std) {
            flagged.push(i);
        }
    }
    let pass = 1.0 - flagged.len() as f64 / structures.len().max(1) as f64;
    Ok((flagged, pass))
}

/// One cycle of loop bookkeeping, replayable for the termination decision.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ALCycleRecord {
    pub cycle: usize,
    pub candidates: usize,
    pub flagged: usize,
    pub pass_fraction: f64,
    /// Validation errors of the ensemble used for flagging this cycle.
    pub val_energy_mae_before: f64,
    pub val_force_mae_before: f64,
    /// Validation errors after this cycle's retraining.
    pub val_energy_mae_after: f64,
    pub val_force_mae_after: f64,
    /// Labeled pool size after augmentation.
    pub training_set_size: usize,
    pub terminated: bool,
}

/// Pure replay of the stop rule from a cycle record.
pub fn should_terminate(record: &ALCycleRecord, thresholds: &Thresholds) -> bool {
    record.pass_fraction >= thresholds.pass_fraction_min
}

#[derive(Clone, Debug)]
pub struct ALOptions {
    pub thresholds: Thresholds,
    pub per_cycle: usize,
    pub initial_labeled: usize,
    pub validation_count: usize,
    pub ensemble_size: usize,
    pub fit: FitHyperParams,
    /// Held-out fraction inside each training run.
    pub split: f64,
    pub relax_before_flagging: bool,
    pub relax_max_iter: usize,
    pub seed: u64,
}

impl Default for ALOptions {
    fn default() -> Self {
        ALOptions {
            thresholds: Thresholds::default(),
            per_cycle: 60,
            initial_labeled: 50,
            validation_count: 100,
            ensemble_size: 4,
            fit: FitHyperParams::default(),
            split: 0.1,
            relax_before_flagging: true,
            relax_max_iter: 50,
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub struct ALOutcome {
    pub ensemble: EnsemblePotential,
    pub records: Vec<ALCycleRecord>,
    pub training_set: Vec<LabeledFrame>,
    pub validation_set: Vec<LabeledFrame>,
    /// Total oracle labelings performed (deduplicated).
    pub oracle_calls: usize,
}

/// Guard against labeling collapsed geometries the relaxation may produce
/// under an immature surrogate; mirrors a reference calculation failing to
/// converge on an unphysical input.
fn labelable(s: &Structure, oracle_out: &crate::potential::EvalResult) -> bool {
    oracle_out.is_finite() && (oracle_out.energy / s.n_atoms() as f64).abs() < 100.0
}

struct Labeler<'a> {
    oracle: &'a dyn Potential,
    seen: BTreeSet<u64>,
    calls: usize,
}

impl Labeler<'_> {
    /// Oracle-label a structure unless its content hash was already
    /// labeled or the geometry is unphysical.
    fn label(&mut self, s: &Structure) -> Result<Option<LabeledFrame>, PotentialError> {
        if !self.seen.insert(s.content_hash()) {
            return Ok(None);
        }
        let out = self.oracle.evaluate(s)?;
        if !labelable(s, &out) {
            return Ok(None);
        }
        self.calls += 1;
        Ok(Some(LabeledFrame::from_evaluation(s.clone(), &out, Provenance::Oracle)))
    }
}

fn validation_mae(p: &dyn Potential, frames: &[LabeledFrame]) -> (f64, f64) {
    let mut e_mae = 0.0;
    let mut f_mae = 0.0;
    let mut f_count = 0usize;
    for f in frames {
        match p.evaluate(&f.structure) {
            Ok(out) => {
                e_mae += ((out.energy - f.energy) / f.n_atoms() as f64).abs();
                for (a, b) in out.forces.iter().zip(&f.forces) {
                    for x in 0..3 {
                        f_mae += (a[x] - b[x]).abs();
                        f_count += 1;
                    }
                }
            }
            Err(_) => {
                e_mae += 10.0; // count a failed evaluation as a large error
            }
        }
    }
    (
        e_mae / frames.len().max(1) as f64,
        f_mae / f_count.max(1) as f64,
    )
}

/// Run the full loop: generate → relax with the current ensemble → flag →
/// oracle-label the flagged → retrain from scratch → stop at the pass
/// fraction or the cycle cap. Deterministic for a given seed.
pub fn run_al_loop(
    generator: &GeneratorSpec,
    oracle: &dyn Potential,
    opts: &ALOptions,
) -> Result<ALOutcome, ActiveError> {
    let mut labeler = Labeler { oracle, seen: BTreeSet::new(), calls: 0 };

    // initial labeled pool
    let init_spec = GeneratorSpec { seed: derive_seed(opts.seed, 1_000), ..generator.clone() };
    let (init_structures, _) = generate_candidates(&init_spec, opts.initial_labeled)?;
    let mut training: Vec<LabeledFrame> = Vec::new();
    for s in &init_structures {
        if let Some(f) = labeler.label(s)? {
            training.push(f);
        }
    }
    if training.is_empty() {
        return Err(ActiveError::EmptySeedSet);
    }

    // fixed validation pool, never trained on
    let val_spec = GeneratorSpec { seed: derive_seed(opts.seed, 2_000), ..generator.clone() };
    let (val_structures, _) = generate_candidates(&val_spec, opts.validation_count)?;
    let validation: Vec<LabeledFrame> = val_structures
        .iter()
        .filter_map(|s| {
            let out = oracle.evaluate(s).ok()?;
            labelable(s, &out)
                .then(|| LabeledFrame::from_evaluation(s.clone(), &out, Provenance::Oracle))
        })
        .collect();

    let member_seeds = |cycle: usize| -> Vec<u64> {
        (0..opts.ensemble_size)
            .map(|m| derive_seed(opts.seed, (cycle as u64 + 1) * 100 + m as u64))
            .collect()
    };
    let retrain = |frames: &[LabeledFrame], cycle: usize| -> Result<EnsemblePotential, ActiveError> {
        train_ensemble(frames, opts.split, &opts.fit, &member_seeds(cycle))
            .map(|(e, _)| e)
            .map_err(|source| ActiveError::TrainingFailed { cycle, source })
    };

    let mut ensemble = retrain(&training, 0)?;
    let mut records: Vec<ALCycleRecord> = Vec::new();

    for cycle in 1..=opts.thresholds.max_cycles {
        let cyc_spec = GeneratorSpec {
            seed: derive_seed(opts.seed, 3_000 + cycle as u64),
            ..generator.clone()
        };
        let (candidates, _) = generate_candidates(&cyc_spec, opts.per_cycle)?;
        let evaluated: Vec<Structure> = if opts.relax_before_flagging {
            candidates
                .iter()
                .map(|s| {
                    match relax_positions(s, &ensemble, &RelaxOptions {
                        f_tol: 0.05,
                        max_iter: opts.relax_max_iter,
                        record_trajectory: false,
                    }) {
                        Ok(out) => out.structure,
                        Err(_) => s.clone(),
                    }
                })
                .collect()
        } else {
            candidates
        };

        let (flagged, pass_fraction) = flag_uncertain(&ensemble, &evaluated, &opts.thresholds)?;
        let (e_before, f_before) = validation_mae(&ensemble, &validation);

        for &i in &flagged {
            if let Some(f) = labeler.label(&evaluated[i])? {
                training.push(f);
            }
        }
        ensemble = retrain(&training, cycle)?;
        let (e_after, f_after) = validation_mae(&ensemble, &validation);

        let record = ALCycleRecord {
            cycle,
            candidates: evaluated.len(),
            flagged: flagged.len(),
            pass_fraction,
            val_energy_mae_before: e_before,
            val_force_mae_before: f_before,
            val_energy_mae_after: e_after,
            val_force_mae_after: f_after,
            training_set_size: training.len(),
            terminated: pass_fraction >= opts.thresholds.pass_fraction_min,
        };
        let stop = record.terminated;
        records.push(record);
        if stop {
            break;
        }
    }

    Ok(ALOutcome {
        ensemble,
        records,
        training_set: training,
        validation_set: validation,
        oracle_calls: labeler.calls,
    })
}
