//! Dopant substitution analysis: enumerate low-concentration substitutions
//! on host structures, relax them, and rank the change in formation Gibbs
//! free energy per (dopant, site) pair at both 0 K and the selection
//! temperature.

use crate::screen::{gibbs_stage, CampaignError, CandidateRecord};
use matscreen_core::element::Element;
use matscreen_core::explore::{
    enumerate_substitutions, rank_stabilization, GibbsPoint, SubstitutionSpec,
};
use matscreen_core::io::CampaignConfig;
use matscreen_core::potential::{compute_formation_energy, Potential};
use matscreen_core::relax::{relax_positions, RelaxOptions};
use matscreen_core::structure::Structure;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One heatmap cell: the stabilization effect of a dopant on one host site
/// species, emitted at both temperatures.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DopantCell {
    pub host: String,
    pub dopant: String,
    pub site: String,
    /// Best-occupation ΔΔG at T*, eV/atom; negative stabilizes.
    pub ddg_tstar: f64,
    /// Best-occupation ΔΔG at 0 K, eV/atom.
    pub ddg_t0: f64,
    pub stabilizing_at_tstar: bool,
    pub stabilizing_at_t0: bool,
    pub n_occupations: usize,
    /// False when any structure involved had imaginary modes, in which
    /// case the vibrational term was dropped for the whole row.
    pub harmonic: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DopantReport {
    pub schema: String,
    pub version: u32,
    pub temperature_select: f64,
    pub concentration: f64,
    pub cells: Vec<DopantCell>,
}

pub const DOPANT_SCHEMA: &str = "matscreen-dopant-report";

/// ΔG_form per atom of a relaxed structure at one temperature: harmonic
/// vibrational term plus pV when phonons are clean, static otherwise.
struct GibbsEval {
    record: CandidateRecord,
}

impl GibbsEval {
    fn build(
        cfg: &CampaignConfig,
        s: &Structure,
        potential: &dyn Potential,
        refs: &BTreeMap<Element, f64>,
        with_phonons: bool,
    ) -> Result<Self, String> {
        let out = relax_positions(s, potential, &RelaxOptions {
            max_iter: cfg.screen.relax_max_iter,
            ..RelaxOptions::default()
        })
        .map_err(|e| format!("relax: {e}"))?;
        let formation = compute_formation_energy(out.eval.energy, &out.structure, refs)
            .map_err(|e| e.to_string())?;
        let mut record = CandidateRecord {
            index: 0,
            input: s.clone(),
            relaxed: out.structure,
            energy: out.eval.energy,
            energy_per_atom: out.eval.energy / s.n_atoms() as f64,
            formation_energy: formation,
            max_force: out.max_force,
            converged: out.converged,
            gibbs_curve: Vec::new(),
            imaginary_modes: false,
            min_frequency_thz: 0.0,
            diffusivity: None,
        };
        if with_phonons {
            gibbs_stage(cfg, &mut record, potential, refs)?;
        }
        Ok(GibbsEval { record })
    }

    fn harmonic(&self) -> bool {
        !self.record.gibbs_curve.is_empty() && !self.record.imaginary_modes
    }

    /// ΔG_form at T; static formation energy when no clean phonons exist.
    fn at(&self, t: f64, harmonic: bool) -> f64 {
        if harmonic {
            self.record
                .gibbs_curve
                .iter()
                .min_by(|a, b| (a.0 - t).abs().partial_cmp(&(b.0 - t).abs()).unwrap())
                .map(|&(_, g)| g)
                .unwrap_or(self.record.formation_energy)
        } else {
            self.record.formation_energy
        }
    }
}

/// For each (host, dopant, site): enumerate substitutions, relax, compute
/// ΔG_form, and reduce to best-occupation ΔΔG rows at 0 K and T*.
pub fn dopant_analysis(
    cfg: &CampaignConfig,
    hosts: &[(String, Structure)],
    dopants: &[Element],
    sites: &[Element],
    potential: &dyn Potential,
    with_phonons: bool,
) -> Result<DopantReport, CampaignError> {
    // dopant coverage must be explicit: name the missing element
    if let Some(covered) = potential.supported_species() {
        for d in dopants {
            if !covered.contains(d) {
                return Err(CampaignError::Other(format!(
                    "potential does not cover dopant {d}"
                )));
            }
        }
    }
    let refs = cfg.reference_energies()?;
    for d in dopants {
        if !refs.contains_key(d) {
            return Err(CampaignError::MissingReference(*d));
        }
    }
    let t_star = cfg.temperature.select;
    let mut cells = Vec::new();

    for (host_id, host) in hosts {
        let host_eval = GibbsEval::build(cfg, host, potential, &refs, with_phonons)
            .map_err(CampaignError::Other)?;
        for &dopant in dopants {
            for &site in sites {
                if !host.species().contains(&site) {
                    continue;
                }
                if dopant == site {
                    // identity substitution: ΔΔG is zero by construction
                    cells.push(DopantCell {
                        host: host_id.clone(),
                        dopant: dopant.symbol().into(),
                        site: site.symbol().into(),
                        ddg_tstar: 0.0,
                        ddg_t0: 0.0,
                        stabilizing_at_tstar: false,
                        stabilizing_at_t0: false,
                        n_occupations: 0,
                        harmonic: host_eval.harmonic(),
                    });
                    continue;
                }
                let spec = SubstitutionSpec {
                    concentration: 0.10,
                    occupations: 3.min(count_sites(host, site)),
                    ..SubstitutionSpec::new(
                        host.clone(),
                        dopant,
                        site,
                        matscreen_core::fit::derive_seed(
                            cfg.seed,
                            host.content_hash() ^ dopant.atomic_number() as u64
                                ^ ((site.atomic_number() as u64) << 8),
                        ),
                    )
                };
                let doped_structures = enumerate_substitutions(&spec)?;
                let evals: Vec<Result<GibbsEval, String>> = doped_structures
                    .par_iter()
                    .map(|d| GibbsEval::build(cfg, d, potential, &refs, with_phonons))
                    .collect();
                let mut doped_evals = Vec::new();
                for e in evals {
                    doped_evals.push(e.map_err(CampaignError::Other)?);
                }
                // drop the vibrational term for the whole row unless every
                // participant has clean phonons
                let harmonic =
                    host_eval.harmonic() && doped_evals.iter().all(|e| e.harmonic());
                let mut cell = DopantCell {
                    host: host_id.clone(),
                    dopant: dopant.symbol().into(),
                    site: site.symbol().into(),
                    ddg_tstar: 0.0,
                    ddg_t0: 0.0,
                    stabilizing_at_tstar: false,
                    stabilizing_at_t0: false,
                    n_occupations: doped_evals.len(),
                    harmonic,
                };
                for (t, ddg_slot, flag_slot) in [
                    (t_star, 0usize, 0usize),
                    (0.0, 1, 1),
                ] {
                    let host_point = GibbsPoint {
                        delta_g: host_eval.at(t, harmonic),
                        temperature: t,
                    };
                    let doped_points: Vec<(Element, Element, GibbsPoint)> = doped_evals
                        .iter()
                        .map(|e| {
                            (dopant, site, GibbsPoint {
                                delta_g: e.at(t, harmonic),
                                temperature: t,
                            })
                        })
                        .collect();
                    let rows = rank_stabilization(&host_point, &doped_points)?;
                    let ddg = rows[0].delta_delta_g;
                    if ddg_slot == 0 {
                        cell.ddg_tstar = ddg;
                        cell.stabilizing_at_tstar = ddg < 0.0;
                    } else {
                        cell.ddg_t0 = ddg;
                        cell.stabilizing_at_t0 = ddg < 0.0;
                    }
                    let _ = flag_slot;
                }
                cells.push(cell);
            }
        }
    }

    Ok(DopantReport {
        schema: DOPANT_SCHEMA.to_string(),
        version: 1,
        temperature_select: t_star,
        concentration: 0.10,
        cells,
    })
}

fn count_sites(host: &Structure, site: Element) -> usize {
    host.species().iter().filter(|e| **e == site).count()
}

pub fn dopant_csv(report: &DopantReport) -> String {
    let mut out = String::from(
        "host,dopant,site,ddg_tstar_ev_per_atom,ddg_t0_ev_per_atom,stabilizing_at_tstar,stabilizing_at_t0,n_occupations,harmonic\n",
    );
    for c in &report.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            c.host,
            c.dopant,
            c.site,
            c.ddg_tstar,
            c.ddg_t0,
            c.stabilizing_at_tstar,
            c.stabilizing_at_t0,
            c.n_occupations,
            c.harmonic
        ));
    }
    out
}
