//! Candidate generation: constrained random crystal structures with fixed
//! stoichiometry, dopant-substitution enumeration, and stabilization
//! ranking for the dopant heatmap.

use crate::element::Element;
use crate::fit::derive_seed;
use crate::structure::{Lattice, Structure, StructureError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

#[derive(Debug, thiserror::Error)]
pub enum ExploreError {
    #[error("generator composition is empty")]
    EmptyComposition,
    #[error("composition needs {total} atoms, above the max_atoms cap {max}")]
    TooManyAtoms { total: usize, max: usize },
    #[error("attempt cap exhausted after {attempts} attempts ({accepted} accepted, acceptance rate {rate:.4})")]
    AttemptsExhausted { attempts: usize, accepted: usize, rate: f64 },
    #[error("dopant {0} equals the substitution target species")]
    DopantEqualsTarget(Element),
    #[error("host contains no {0} sites")]
    NoTargetSites(Element),
    #[error("requested {requested} occupations but only {available} distinct site subsets exist")]
    TooManyOccupations { requested: usize, available: usize },
    #[error("free energies mix temperatures: {0} K vs {1} K")]
    TemperatureMismatch(f64, f64),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Constraints for the random structure generator (fixed stoichiometry).
#[derive(Clone, Debug)]
pub struct GeneratorSpec {
    /// Element counts per unit cell, sorted by element.
    pub composition: Vec<(Element, usize)>,
    pub max_atoms: usize,
    /// Sampled volume per atom, Å³.
    pub volume_per_atom: (f64, f64),
    /// Relative a:b:c ratios sampled per cell vector.
    pub length_ratio_range: (f64, f64),
    /// Cell angles, degrees.
    pub angle_range: (f64, f64),
    /// Minimum pair distance as a fraction of the covalent-radius sum.
    pub min_dist_scale: f64,
    /// Explicit per-pair minimum distances (Å) overriding the scaled sum.
    pub min_dist_overrides: Vec<(Element, Element, f64)>,
    /// Rejection-sampling cap per requested structure.
    pub max_attempts: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(composition: Vec<(Element, usize)>, seed: u64) -> Self {
        let mut composition = composition;
        composition.sort_by_key(|(e, _)| *e);
        GeneratorSpec {
            composition,
            max_atoms: 30,
            volume_per_atom: (8.0, 25.0),
            length_ratio_range: (0.6, 1.6),
            angle_range: (60.0, 120.0),
            min_dist_scale: 0.7,
            min_dist_overrides: Vec::new(),
            max_attempts: 5000,
            seed,
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.composition.iter().map(|(_, c)| c).sum()
    }

    /// Minimum allowed distance for a species pair, Å.
    pub fn min_dist(&self, a: Element, b: Element) -> f64 {
        for &(x, y, d) in &self.min_dist_overrides {
            if (x == a && y == b) || (x == b && y == a) {
                return d;
            }
        }
        self.min_dist_scale * (a.covalent_radius() + b.covalent_radius())
    }

    fn species_list(&self) -> Vec<Element> {
        let mut out = Vec::with_capacity(self.n_atoms());
        for &(e, c) in &self.composition {
            out.extend(std::iter::repeat(e).take(c));
        }
        out
    }

    fn validate(&self) -> Result<(), ExploreError> {
        let total = self.n_atoms();
        if total == 0 {
            return Err(ExploreError::EmptyComposition);
        }
        if total > self.max_atoms {
            return Err(ExploreError::TooManyAtoms { total, max: self.max_atoms });
        }
        Ok(())
    }
}

/// Rejection-sampling statistics of one generation run.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct GenTelemetry {
    pub attempts: usize,
    pub accepted: usize,
    pub acceptance_rate: f64,
}

/// Shortest periodic distance between two fractional points of a lattice,
/// searching the 27 neighbor images.
fn periodic_distance(lattice: &Lattice, a: [f64; 3], b: [f64; 3]) -> f64 {
    let mut df = [0.0; 3];
    for k in 0..3 {
        let d = b[k] - a[k];
        df[k] = d - d.round();
    }
    let mut best = f64::INFINITY;
    for n0 in -1..=1 {
        for n1 in -1..=1 {
            for n2 in -1..=1 {
                let f = [df[0] + n0 as f64, df[1] + n1 as f64, df[2] + n2 as f64];
                let r = lattice.frac_to_cart(f);
                best = best.min(crate::structure::norm(r));
            }
        }
    }
    best
}

/// Shortest nonzero lattice translation, Å.
fn shortest_lattice_vector(lattice: &Lattice) -> f64 {
    let mut best = f64::INFINITY;
    for n0 in -1..=1i64 {
        for n1 in -1..=1i64 {
            for n2 in -1..=1i64 {
                if (n0, n1, n2) == (0, 0, 0) {
                    continue;
                }
                let v = lattice.frac_to_cart([n0 as f64, n1 as f64, n2 as f64]);
                best = best.min(crate::structure::norm(v));
            }
        }
    }
    best
}

fn try_candidate(spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Option<Structure> {
    let n = spec.n_atoms();
    let species = spec.species_list();
    let v_target = rng.gen_range(spec.volume_per_atom.0..spec.volume_per_atom.1) * n as f64;
    let (rlo, rhi) = spec.length_ratio_range;
    let (alo, ahi) = spec.angle_range;
    let ratios = [
        rng.gen_range(rlo..rhi),
        rng.gen_range(rlo..rhi),
        rng.gen_range(rlo..rhi),
    ];
    let angles = [
        rng.gen_range(alo..ahi),
        rng.gen_range(alo..ahi),
        rng.gen_range(alo..ahi),
    ];
    let raw = Lattice::from_parameters(
        ratios[0], ratios[1], ratios[2], angles[0], angles[1], angles[2],
    )
    .ok()?;
    let scale = (v_target / raw.volume()).cbrt();
    let rows = raw.rows().map(|r| r.map(|x| x * scale));
    let lattice = Lattice::new(rows).ok()?;

    // every atom is its own periodic neighbor at the shortest translation
    let self_floor = species
        .iter()
        .map(|&e| spec.min_dist(e, e))
        .fold(0.0_f64, f64::max);
    if shortest_lattice_vector(&lattice) < self_floor {
        return None;
    }

    let mut frac: Vec<[f64; 3]> = Vec::with_capacity(n);
    for (i, &e) in species.iter().enumerate() {
        let mut placed = false;
        for _ in 0..60 {
            let f = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
            let ok = frac.iter().enumerate().all(|(j, &g)| {
                periodic_distance(&lattice, g, f) >= spec.min_dist(species[j], e)
            });
            if ok {
                frac.push(f);
                placed = true;
                break;
            }
        }
        if !placed {
            return None;
        }
        let _ = i;
    }
    Structure::new(species, frac, lattice).ok()
}

/// Generate `count` structures satisfying the composition and distance
/// constraints. Candidate `i` draws from a stream seeded by (seed, i), so
/// the output is deterministic and order-independent under parallelism.
pub fn generate_candidates(
    spec: &GeneratorSpec,
    count: usize,
) -> Result<(Vec<Structure>, GenTelemetry), ExploreError> {
    spec.validate()?;
    let mut structures = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let mut seen = BTreeSet::new();
    for i in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, i as u64));
        let mut found = false;
        for _ in 0..spec.max_attempts {
            attempts += 1;
            if let Some(s) = try_candidate(spec, &mut rng) {
                let tagged = s.with_tag("candidate_index", &i.to_string());
                debug_assert!(
                    seen.insert(tagged.content_hash()),
                    "random candidate collision"
                );
                seen.insert(tagged.content_hash());
                structures.push(tagged);
                found = true;
                break;
            }
        }
        if !found {
            return Err(ExploreError::AttemptsExhausted {
                attempts,
                accepted: structures.len(),
                rate: structures.len() as f64 / attempts as f64,
            });
        }
    }
    let telemetry = GenTelemetry {
        attempts,
        accepted: structures.len(),
        acceptance_rate: structures.len() as f64 / attempts.max(1) as f64,
    };
    Ok((structures, telemetry))
}

/// Dopant substitution request on one host structure.
#[derive(Clone, Debug)]
pub struct SubstitutionSpec {
    pub host: Structure,
    pub dopant: Element,
    /// Species whose sites are substituted.
    pub target: Element,
    /// Fraction of target sites replaced (rounded, at least one site).
    pub concentration: f64,
    /// Number of random distinct occupations to emit.
    pub occupations: usize,
    pub seed: u64,
}

impl SubstitutionSpec {
    pub fn new(host: Structure, dopant: Element, target: Element, seed: u64) -> Self {
        SubstitutionSpec {
            host,
            dopant,
            target,
            concentration: 0.10,
            occupations: 4,
            seed,
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out = 1usize;
    for i in 0..k {
        out = out.saturating_mul(n - i) / (i + 1);
    }
    out
}

/// Distinct doped structures, one per random site subset. Each result is
/// tagged with the dopant, target species, and substituted site indices.
pub fn enumerate_substitutions(spec: &SubstitutionSpec) -> Result<Vec<Structure>, ExploreError> {
    if spec.dopant == spec.target {
        return Err(ExploreError::DopantEqualsTarget(spec.dopant));
    }
    let sites: Vec<usize> = spec
        .host
        .species()
        .iter()
        .enumerate()
        .filter(|(_, e)| **e == spec.target)
        .map(|(i, _)| i)
        .collect();
    if sites.is_empty() {
        return Err(ExploreError::NoTargetSites(spec.target));
    }
    let k_sub = ((spec.concentration * sites.len() as f64).round() as usize).max(1);
    let available = binomial(sites.len(), k_sub);
    if spec.occupations > available {
        return Err(ExploreError::TooManyOccupations {
            requested: spec.occupations,
            available,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut chosen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let cap = spec.occupations * 10_000;
    let mut spins = 0usize;
    while chosen.len() < spec.occupations {
        let mut pool = sites.clone();
        for swap in 0..k_sub {
            let pick = rng.gen_range(swap..pool.len());
            pool.swap(swap, pick);
        }
        let mut subset: Vec<usize> = pool[..k_sub].to_vec();
        subset.sort_unstable();
        chosen.insert(subset);
        spins += 1;
        if spins > cap {
            return Err(ExploreError::TooManyOccupations {
                requested: spec.occupations,
                available,
            });
        }
    }

    let mut out = Vec::with_capacity(spec.occupations);
    for subset in chosen {
        let mut doped = spec.host.clone();
        for &i in &subset {
            doped = doped.with_species_at(i, spec.dopant)?;
        }
        let tag: Vec<String> = subset.iter().map(|i| i.to_string()).collect();
        out.push(
            doped
                .with_tag("dopant", spec.dopant.symbol())
                .with_tag("site", spec.target.symbol())
                .with_tag("occupation", &tag.join(",")),
        );
    }
    Ok(out)
}

/// One formation free-energy value at a temperature.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GibbsPoint {
    /// ΔG_form per atom, eV.
    pub delta_g: f64,
    /// K.
    pub temperature: f64,
}

/// One heatmap cell: best (lowest) doped-minus-host ΔG over the sampled
/// occupations of a (dopant, site) pair.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct StabilizationEntry {
    pub dopant: Element,
    pub site: Element,
    /// eV/atom; negative stabilizes the host.
    pub delta_delta_g: f64,
    pub n_occupations: usize,
}

impl StabilizationEntry {
    /// Negative ΔΔG: the doped lattice is more stable than the host
    /// ("blue" in the heatmap convention).
    pub fn is_stabilizing(&self) -> bool {
        self.delta_delta_g < 0.0
    }
}

/// Reduce per-occupation free energies to heatmap rows: for each
/// (dopant, site), ΔΔG = min over occupations of (ΔG_doped − ΔG_host).
pub fn rank_stabilization(
    host: &GibbsPoint,
    doped: &[(Element, Element, GibbsPoint)],
) -> Result<Vec<StabilizationEntry>, ExploreError> {
    for (_, _, g) in doped {
        if (g.temperature - host.temperature).abs() > 1e-9 {
            return Err(ExploreError::TemperatureMismatch(
                host.temperature,
                g.temperature,
            ));
        }
    }
    let mut keys: Vec<(Element, Element)> =
        doped.iter().map(|(d, s, _)| (*d, *s)).collect();
    keys.sort();
    keys.dedup();
    let mut out = Vec::with_capacity(keys.len());
    for (d, s) in keys {
        let vals: Vec<f64> = doped
            .iter()
            .filter(|(dd, ss, _)| *dd == d && *ss == s)
            .map(|(_, _, g)| g.delta_g - host.delta_g)
            .collect();
        let best = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        out.push(StabilizationEntry {
            dopant: d,
            site: s,
            delta_delta_g: best,
            n_occupations: vals.len(),
        });
    }
    Ok(out)
}
