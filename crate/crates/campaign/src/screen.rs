//! The screening pipeline: train (or load) the surrogate ensemble through
//! active learning, generate candidates, relax them, rank by formation
//! Gibbs free energy on the temperature grid, and probe the ranked head
//! with short diffusivity MD.

use crate::ledger::{Ledger, Meter, Metered};
use crate::store::{content_key, Store};
use matscreen_core::active::{run_al_loop, ALCycleRecord, ALOptions, Thresholds};
use matscreen_core::element::Element;
use matscreen_core::explore::{generate_candidates, GeneratorSpec};
use matscreen_core::fit::FitHyperParams;
use matscreen_core::io::{write_poscar, CampaignConfig, IoError};
use matscreen_core::md::{
    classify_mobility, einstein_diffusivity, run_nvt, MdOptions, Mobility, MOBILITY_THRESHOLD,
};
use matscreen_core::phonon::{dispersion_grid, force_constants, helmholtz_free_energy};
use matscreen_core::potential::{
    compute_formation_energy, load_checkpoint, oracle_potential, save_checkpoint,
    CheckpointModel, EnsemblePotential, OracleSpec, Potential,
};
use matscreen_core::relax::{relax_cell, relax_positions, CellRelaxOptions, RelaxOptions};
use matscreen_core::structure::Structure;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub const REPORT_SCHEMA: &str = "matscreen-screen-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("campaign config: {0}")]
    Config(#[from] IoError),
    #[error("active learning failed: {0}")]
    Active(#[from] matscreen_core::active::ActiveError),
    #[error("candidate generation failed: {0}")]
    Explore(#[from] matscreen_core::explore::ExploreError),
    #[error("missing reference energy for {0}; add it to [references]")]
    MissingReference(Element),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("stored ensemble checkpoint is unreadable: {0}")]
    BadCheckpoint(#[from] matscreen_core::potential::CheckpointError),
    #[error("{0}")]
    Other(String),
}

/// One relaxed, characterized candidate; the unit of content-addressed
/// storage and of the verify recomputation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub index: usize,
    pub input: Structure,
    pub relaxed: Structure,
    pub energy: f64,
    pub energy_per_atom: f64,
    pub formation_energy: f64,
    pub max_force: f64,
    pub converged: bool,
    /// (T, ΔG_form per atom) over the grid; empty until the phonon stage.
    pub gibbs_curve: Vec<(f64, f64)>,
    pub imaginary_modes: bool,
    pub min_frequency_thz: f64,
    pub diffusivity: Option<DiffusivityRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiffusivityRow {
    pub id: String,
    pub per_species: BTreeMap<String, f64>,
    pub overall: f64,
    pub mobility: Mobility,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub id: String,
    pub rank: usize,
    /// Content hash of the relaxed structure (hex), traceable to
    /// structures/<key>.poscar under the output directory.
    pub structure_key: String,
    /// ΔG_form at T*, eV/atom; static formation energy when phonons were
    /// not computed for this candidate.
    pub delta_g_form: f64,
    pub formation_energy: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub volume_per_atom: f64,
    pub converged: bool,
    pub imaginary_modes: bool,
    pub gibbs_curve: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FailedCandidate {
    pub index: usize,
    pub stage: String,
    pub error: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScreenReport {
    pub schema: String,
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub temperature_select: f64,
    pub al_history: Vec<ALCycleRecord>,
    pub ranking: Vec<RankedCandidate>,
    pub diffusivity: Vec<DiffusivityRow>,
    pub failed: Vec<FailedCandidate>,
}

pub struct ScreenOutcome {
    pub report: ScreenReport,
    pub ensemble: EnsemblePotential,
    pub records: Vec<CandidateRecord>,
}

pub fn oracle_from_config(cfg: &CampaignConfig, extra: &[Element]) -> Result<OracleSpec, CampaignError> {
    let mut elements: Vec<Element> = cfg
        .composition_elements()?
        .into_iter()
        .map(|(e, _)| e)
        .collect();
    elements.extend_from_slice(extra);
    elements.sort();
    elements.dedup();
    let mut spec = OracleSpec::new(cfg.oracle.seed, elements);
    spec.cutoff = cfg.oracle.cutoff;
    spec.three_body_strength = cfg.oracle.three_body_strength;
    Ok(spec)
}

pub fn generator_from_config(cfg: &CampaignConfig, seed: u64) -> Result<GeneratorSpec, CampaignError> {
    let comp = cfg.composition_elements()?;
    if comp.is_empty() {
        return Err(CampaignError::Other(
            "composition.elements must not be empty for generation".into(),
        ));
    }
    let mut spec = GeneratorSpec::new(comp, seed);
    spec.max_atoms = cfg.composition.max_atoms;
    spec.volume_per_atom = (cfg.generator.volume_per_atom[0], cfg.generator.volume_per_atom[1]);
    spec.length_ratio_range = (cfg.generator.length_ratio_range[0], cfg.generator.length_ratio_range[1]);
    spec.angle_range = (cfg.generator.angle_range[0], cfg.generator.angle_range[1]);
    spec.min_dist_scale = cfg.generator.min_dist_scale;
    spec.max_attempts = cfg.generator.max_attempts;
    Ok(spec)
}

pub fn al_options_from_config(cfg: &CampaignConfig) -> ALOptions {
    ALOptions {
        thresholds: Thresholds {
            energy_std_max: cfg.thresholds.energy_std,
            force_std_max: cfg.thresholds.force_std,
            stress_std_max: cfg.thresholds.stress_std,
            pass_fraction_min: cfg.thresholds.pass_fraction,
            max_cycles: cfg.thresholds.max_cycles,
        },
        per_cycle: cfg.active.per_cycle,
        initial_labeled: cfg.active.initial_labeled,
        validation_count: cfg.active.validation_count,
        ensemble_size: cfg.active.ensemble_size,
        fit: FitHyperParams {
            hidden: cfg.fit.hidden,
            epochs: cfg.fit.epochs,
            batch_size: cfg.fit.batch_size,
            learning_rate: cfg.fit.learning_rate,
            momentum: cfg.fit.momentum,
            alpha_energy: cfg.fit.alpha_energy,
            alpha_force: cfg.fit.alpha_force,
            alpha_stress: cfg.fit.alpha_stress,
            ..FitHyperParams::default()
        },
        split: cfg.fit.holdout,
        relax_before_flagging: cfg.active.relax_before_flagging,
        relax_max_iter: 50,
        seed: cfg.seed,
    }
}

/// Key identifying the surrogate-ensemble artifact: everything upstream of
/// training that can change its bytes.
fn ensemble_key(cfg: &CampaignConfig) -> u64 {
    content_key(&(
        &cfg.composition,
        &cfg.generator,
        &cfg.oracle,
        &cfg.thresholds,
        &cfg.active,
        &cfg.fit,
        cfg.seed,
    ))
}

/// Train the ensemble through active learning, or load it from the store.
/// Returns the ensemble and the cycle history (empty when loaded).
pub fn obtain_ensemble(
    cfg: &CampaignConfig,
    store: &Store,
    ledger: &Ledger,
) -> Result<(EnsemblePotential, Vec<ALCycleRecord>), CampaignError> {
    let key = ensemble_key(cfg);
    if let Some(text) = store.get::<String>("ensemble", key) {
        if let CheckpointModel::Ensemble(e) = load_checkpoint(&text)? {
            let history: Vec<ALCycleRecord> =
                store.get("al-history", key).unwrap_or_default();
            return Ok((e, history));
        }
    }
    let oracle = oracle_potential(&oracle_from_config(cfg, &[])?);
    let metered = Metered::new(oracle, ledger.clone(), Meter::Oracle);
    let generator = generator_from_config(cfg, cfg.seed)?;
    let opts = al_options_from_config(cfg);
    let t0 = std::time::Instant::now();
    let outcome = run_al_loop(&generator, &metered, &opts)?;
    ledger.record_training(t0.elapsed().as_secs_f64());
    store.put(
        "ensemble",
        key,
        &save_checkpoint(&CheckpointModel::Ensemble(outcome.ensemble.clone())),
    )?;
    store.put("al-history", key, &outcome.records)?;
    Ok((outcome.ensemble, outcome.records))
}

fn candidate_key(cfg: &CampaignConfig, ensemble_key: u64, s: &Structure) -> u64 {
    content_key(&(
        "candidate",
        ensemble_key,
        s.content_hash(),
        &cfg.screen,
        cfg.pressure,
        &cfg.references,
        cfg.temperatures(),
    ))
}

/// Relax + static formation energy for one candidate.
fn relax_stage(
    cfg: &CampaignConfig,
    index: usize,
    input: &Structure,
    potential: &dyn Potential,
    refs: &BTreeMap<Element, f64>,
) -> Result<CandidateRecord, String> {
    let (structure, eval, converged, max_force) = if cfg.screen.relax_cell {
        let out = relax_cell(input, potential, &CellRelaxOptions {
            pressure: cfg.pressure,
            max_iter: cfg.screen.relax_max_iter,
            ..CellRelaxOptions::default()
        })
        .map_err(|e| format!("relax: {e}"))?;
        (out.structure, out.eval, out.converged, out.max_force)
    } else {
        let out = relax_positions(input, potential, &RelaxOptions {
            max_iter: cfg.screen.relax_max_iter,
            ..RelaxOptions::default()
        })
        .map_err(|e| format!("relax: {e}"))?;
        (out.structure, out.eval, out.converged, out.max_force)
    };
    let formation = compute_formation_energy(eval.energy, &structure, refs)
        .map_err(|e| format!("formation energy: {e}"))?;
    Ok(CandidateRecord {
        index,
        input: input.clone(),
        relaxed: structure,
        energy: eval.energy,
        energy_per_atom: eval.energy / input.n_atoms() as f64,
        formation_energy: formation,
        max_force,
        converged,
        gibbs_curve: Vec::new(),
        imaginary_modes: false,
        min_frequency_thz: 0.0,
        diffusivity: None,
    })
}

/// Harmonic ΔG_form(T) over the grid for one relaxed candidate.
pub fn gibbs_stage(
    cfg: &CampaignConfig,
    record: &mut CandidateRecord,
    potential: &dyn Potential,
    refs: &BTreeMap<Element, f64>,
) -> Result<(), String> {
    let temps = cfg.temperatures();
    let fc = force_constants(&record.relaxed, potential, cfg.screen.supercell, 0.01)
        .map_err(|e| format!("force constants: {e}"))?;
    let ph = dispersion_grid(&fc, cfg.screen.qgrid, false);
    record.min_frequency_thz = ph.min_frequency();
    record.imaginary_modes = ph.has_imaginary();
    if record.imaginary_modes {
        return Ok(());
    }
    let n = record.relaxed.n_atoms() as f64;
    let mu: f64 = record
        .relaxed
        .composition()
        .iter()
        .map(|(e, c)| refs.get(e).copied().unwrap_or(0.0) * *c as f64)
        .sum();
    let pv = cfg.pressure * record.relaxed.volume();
    let mut curve = Vec::with_capacity(temps.len());
    for &t in &temps {
        let fvib = helmholtz_free_energy(&ph, t).map_err(|e| format!("free energy: {e}"))?;
        curve.push((t, (record.energy + fvib + pv - mu) / n));
    }
    record.gibbs_curve = curve;
    Ok(())
}

/// ΔG_form at the selection temperature (or the static formation energy as
/// a fallback when no curve exists).
fn delta_g_at(record: &CandidateRecord, t_select: f64) -> f64 {
    record
        .gibbs_curve
        .iter()
        .min_by(|a, b| {
            (a.0 - t_select)
                .abs()
                .partial_cmp(&(b.0 - t_select).abs())
                .unwrap()
        })
        .map(|&(_, g)| g)
        .unwrap_or(record.formation_energy)
}

fn md_stage(
    cfg: &CampaignConfig,
    record: &CandidateRecord,
    id: &str,
    potential: &dyn Potential,
) -> Result<DiffusivityRow, String> {
    let steps = (cfg.md.time_ps * 1000.0 / cfg.md.timestep_fs).round() as usize;
    let traj = run_nvt(&record.relaxed, potential, &MdOptions {
        temperature: cfg.md.temperature,
        timestep: cfg.md.timestep_fs,
        steps,
        friction: cfg.md.friction,
        seed: matscreen_core::fit::derive_seed(cfg.seed, record.relaxed.content_hash()),
        stride: cfg.md.stride,
        zero_momentum: true,
    })
    .map_err(|e| format!("md: {e}"))?;
    let report = einstein_diffusivity(&traj, None, 3, None).map_err(|e| format!("msd: {e}"))?;
    Ok(DiffusivityRow {
        id: id.to_string(),
        per_species: report
            .per_species
            .iter()
            .map(|(e, d)| (e.symbol().to_string(), *d))
            .collect(),
        overall: report.overall,
        mobility: classify_mobility(report.overall, MOBILITY_THRESHOLD),
    })
}

/// Full screening campaign. Candidate stages are cached content-addressed
/// in the store, so a rerun over the same output directory performs no
/// fresh oracle work and reproduces the identical report.
pub fn screen(cfg: &CampaignConfig, out_dir: &Path) -> Result<ScreenOutcome, CampaignError> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let store = Store::open(out_dir)?;
    let ledger = Ledger::new();
    let refs = cfg.reference_energies()?;
    for (e, _) in cfg.composition_elements()? {
        if !refs.contains_key(&e) {
            return Err(CampaignError::MissingReference(e));
        }
    }

    let (ensemble, al_history) = obtain_ensemble(cfg, &store, &ledger)?;
    let ens_key = ensemble_key(cfg);
    let surrogate = Metered::new(ensemble.clone(), ledger.clone(), Meter::Surrogate);

    let gen = generator_from_config(cfg, matscreen_core::fit::derive_seed(cfg.seed, 5_000))?;
    let (candidates, _telemetry) = generate_candidates(&gen, cfg.screen.count)?;

    // stage 1: relax everything (cached, concurrent, order preserved)
    let relax_results: Vec<Result<CandidateRecord, FailedCandidate>> = candidates
        .par_iter()
        .enumerate()
        .map(|(index, input)| {
            let key = candidate_key(cfg, ens_key, input);
            if let Some(rec) = store.get::<CandidateRecord>("candidate", key) {
                return Ok(rec);
            }
            match relax_stage(cfg, index, input, &surrogate, &refs) {
                Ok(rec) => Ok(rec),
                Err(error) => Err(FailedCandidate { index, stage: "relax".into(), error }),
            }
        })
        .collect();

    let mut failed: Vec<FailedCandidate> = Vec::new();
    let mut records: Vec<CandidateRecord> = Vec::new();
    for r in relax_results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => failed.push(f),
        }
    }

    // stage 2: phonon ΔG(T) for the most stable static candidates
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        (records[a].formation_energy, records[a].relaxed.content_hash())
            .partial_cmp(&(records[b].formation_energy, records[b].relaxed.content_hash()))
            .unwrap()
    });
    let head: Vec<usize> = order.iter().copied().take(cfg.screen.top_gibbs).collect();
    let gibbs_results: Vec<(usize, Result<CandidateRecord, FailedCandidate>)> = head
        .par_iter()
        .map(|&ri| {
            let mut rec = records[ri].clone();
            if !rec.gibbs_curve.is_empty() || rec.imaginary_modes {
                return (ri, Ok(rec)); // cached artifact already carries phonons
            }
            match gibbs_stage(cfg, &mut rec, &surrogate, &refs) {
                Ok(()) => (ri, Ok(rec)),
                Err(error) => (
                    ri,
                    Err(FailedCandidate { index: rec.index, stage: "phonon".into(), error }),
                ),
            }
        })
        .collect();
    for (ri, r) in gibbs_results {
        match r {
            Ok(rec) => records[ri] = rec,
            Err(f) => failed.push(f),
        }
    }

    // rank the phonon head at T*: stable candidates first, imaginary-mode
    // candidates flagged and pushed to the tail
    let t_select = cfg.temperature.select;
    let mut ranked_idx: Vec<usize> = head.clone();
    ranked_idx.sort_by(|&a, &b| {
        let ka = (
            records[a].imaginary_modes,
            delta_g_at(&records[a], t_select),
            records[a].relaxed.content_hash(),
        );
        let kb = (
            records[b].imaginary_modes,
            delta_g_at(&records[b], t_select),
            records[b].relaxed.content_hash(),
        );
        ka.partial_cmp(&kb).unwrap()
    });

    // stage 3: MD diffusivity for the ranked head; the ranking already
    // pushes imaginary-mode candidates to the tail
    let md_targets: Vec<(usize, String)> = ranked_idx
        .iter()
        .take(cfg.screen.top_md)
        .enumerate()
        .map(|(pos, &ri)| (ri, format!("ID{:02}", pos + 1)))
        .collect();
    let md_results: Vec<(usize, Result<DiffusivityRow, FailedCandidate>)> = md_targets
        .par_iter()
        .map(|(ri, id)| {
            if let Some(existing) = &records[*ri].diffusivity {
                return (*ri, Ok(DiffusivityRow { id: id.clone(), ..existing.clone() }));
            }
            match md_stage(cfg, &records[*ri], id, &surrogate) {
                Ok(row) => (*ri, Ok(row)),
                Err(error) => (
                    *ri,
                    Err(FailedCandidate {
                        index: records[*ri].index,
                        stage: "md".into(),
                        error,
                    }),
                ),
            }
        })
        .collect();
    let mut diffusivity = Vec::new();
    for (ri, r) in md_results {
        match r {
            Ok(row) => {
                records[ri].diffusivity = Some(row.clone());
                diffusivity.push(row);
            }
            Err(f) => failed.push(f),
        }
    }

    // persist candidate artifacts and traceable structures
    for rec in &records {
        let key = candidate_key(cfg, ens_key, &rec.input);
        store.put("candidate", key, rec)?;
    }
    let structures_dir = out_dir.join("structures");
    fs::create_dir_all(&structures_dir)?;

    let ranking: Vec<RankedCandidate> = ranked_idx
        .iter()
        .enumerate()
        .map(|(pos, &ri)| {
            let rec = &records[ri];
            let lengths = rec.relaxed.lattice().lengths();
            let angles = rec.relaxed.lattice().angles();
            let key = format!("{:016x}", rec.relaxed.content_hash());
            fs::write(
                structures_dir.join(format!("{key}.poscar")),
                write_poscar(&rec.relaxed),
            )
            .ok();
            RankedCandidate {
                id: format!("ID{:02}", pos + 1),
                rank: pos + 1,
                structure_key: key,
                delta_g_form: delta_g_at(rec, t_select),
                formation_energy: rec.formation_energy,
                a: lengths[0],
                b: lengths[1],
                c: lengths[2],
                alpha: angles[0],
                beta: angles[1],
                gamma: angles[2],
                volume_per_atom: rec.relaxed.volume() / rec.relaxed.n_atoms() as f64,
                converged: rec.converged,
                imaginary_modes: rec.imaginary_modes,
                gibbs_curve: rec.gibbs_curve.clone(),
            }
        })
        .collect();

    failed.sort_by_key(|f| (f.index, f.stage.clone()));
    let report = ScreenReport {
        schema: REPORT_SCHEMA.to_string(),
        version: REPORT_VERSION,
        config_hash: format!("{:016x}", content_key(cfg)),
        seed: cfg.seed,
        temperature_select: t_select,
        al_history,
        ranking,
        diffusivity,
        failed,
    };

    fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(&report).unwrap())?;
    fs::write(out_dir.join("ranking.csv"), ranking_csv(&report))?;
    fs::write(out_dir.join("diffusivity.csv"), diffusivity_csv(&report))?;
    fs::write(
        out_dir.join("ledger.json"),
        serde_json::to_string_pretty(&ledger.snapshot()).unwrap(),
    )?;
    let events: String = records
        .iter()
        .map(|r| {
            serde_json::to_string(&serde_json::json!({
                "candidate": r.index,
                "converged": r.converged,
                "formation_energy": r.formation_energy,
                "imaginary_modes": r.imaginary_modes,
            }))
            .unwrap()
                + "\n"
        })
        .collect();
    fs::write(out_dir.join("events.jsonl"), events)?;

    Ok(ScreenOutcome { report, ensemble, records })
}

pub fn ranking_csv(report: &ScreenReport) -> String {
    let mut out = String::from(
        "id,rank,structure_key,delta_g_form_ev_per_atom,formation_energy_ev_per_atom,a,b,c,alpha,beta,gamma,volume_per_atom,converged,imaginary_modes\n",
    );
    for r in &report.ranking {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.id,
            r.rank,
            r.structure_key,
            r.delta_g_form,
            r.formation_energy,
            r.a,
            r.b,
            r.c,
            r.alpha,
            r.beta,
            r.gamma,
            r.volume_per_atom,
            r.converged,
            r.imaginary_modes
        ));
    }
    out
}

pub fn diffusivity_csv(report: &ScreenReport) -> String {
    let mut out = String::from("id,overall_cm2_s,mobility,per_species\n");
    for d in &report.diffusivity {
        let per: Vec<String> = d
            .per_species
            .iter()
            .map(|(e, v)| format!("{e}:{v}"))
            .collect();
        out.push_str(&format!(
            "{},{},{:?},{}\n",
            d.id,
            d.overall,
            d.mobility,
            per.join(";")
        ));
    }
    out
}
