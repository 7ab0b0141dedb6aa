//! Seeded synthetic ground-truth potential.
//!
//! A deterministic mixed analytic form: species-dependent Lennard-Jones or
//! Morse pair terms plus a Stillinger-Weber-style three-body angular term.
//! All parameters derive from a seed, so the same spec always produces the
//! same model. The functional family is deliberately different from the
//! trainable descriptor model so a fitted surrogate always has a residual
//! model error to learn down.

use super::pair::{switch, PairKind};
use super::{check_coverage, EvalResult, Potential, PotentialError};
use crate::element::Element;
use crate::neighbor::build_neighbor_list;
use crate::structure::{Fnv1a, Structure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Explicit pair-parameter override, e.g. to plant a stabilizing dopant
/// interaction in campaign experiments.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct PairOverride {
    pub a: Element,
    pub b: Element,
    pub kind: PairKind,
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct OracleSpec {
    pub seed: u64,
    pub elements: Vec<Element>,
    /// Pair interaction cutoff, Å.
    pub cutoff: f64,
    /// Overall scale of the three-body term, eV. Zero disables it.
    pub three_body_strength: f64,
    #[serde(default)]
    pub pair_overrides: Vec<PairOverride>,
}

impl OracleSpec {
    pub fn new(seed: u64, elements: Vec<Element>) -> Self {
        OracleSpec {
            seed,
            elements,
            cutoff: 5.0,
            three_body_strength: 0.3,
            pair_overrides: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OraclePotential {
    spec: OracleSpec,
    pair_params: BTreeMap<(Element, Element), PairKind>,
    three_body: BTreeMap<Element, f64>,
    /// Three-body radial cutoff, Å.
    r3: f64,
    /// Three-body radial envelope width, Å.
    w3: f64,
}

fn derived_rng(seed: u64, salt: &[u8]) -> ChaCha8Rng {
    let mut h = Fnv1a::new();
    h.write(&seed.to_le_bytes());
    h.write(salt);
    ChaCha8Rng::seed_from_u64(h.finish())
}

/// Build the deterministic oracle from its spec.
pub fn oracle_potential(spec: &OracleSpec) -> OraclePotential {
    let mut elements = spec.elements.clone();
    elements.sort();
    elements.dedup();
    let mut pair_params = BTreeMap::new();
    for (ia, &ea) in elements.iter().enumerate() {
        for &eb in &elements[ia..] {
            let mut rng = derived_rng(
                spec.seed,
                &[b"pair" as &[u8], &[ea.atomic_number(), eb.atomic_number()]].concat(),
            );
            let r0 = ea.covalent_radius() + eb.covalent_radius();
            let kind = if rng.gen_bool(0.5) {
                PairKind::LennardJones {
                    epsilon: rng.gen_range(0.15..0.7),
                    sigma: r0 * rng.gen_range(0.9..1.1) / 2.0_f64.powf(1.0 / 6.0),
                }
            } else {
                PairKind::Morse {
                    depth: rng.gen_range(0.2..0.8),
                    width: rng.gen_range(1.3..2.2),
                    r_eq: r0 * rng.gen_range(0.95..1.15),
                }
            };
            pair_params.insert((ea, eb), kind);
        }
    }
    for ov in &spec.pair_overrides {
        let key = if ov.a <= ov.b { (ov.a, ov.b) } else { (ov.b, ov.a) };
        pair_params.insert(key, ov.kind);
    }
    let mut three_body = BTreeMap::new();
    for &e in &elements {
        let mut rng = derived_rng(spec.seed, &[b"tri" as &[u8], &[e.atomic_number()]].concat());
        three_body.insert(e, spec.three_body_strength * rng.gen_range(0.3..1.0));
    }
    OraclePotential {
        r3: 0.6 * spec.cutoff,
        w3: 0.8,
        spec: OracleSpec { elements, ..spec.clone() },
        pair_params,
        three_body,
    }
}

impl OraclePotential {
    pub fn spec(&self) -> &OracleSpec {
        &self.spec
    }

    fn pair(&self, a: Element, b: Element) -> PairKind {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.pair_params[&key]
    }

    /// SW-style envelope: exp(-w/(r3 - r)) for r < r3, zero outside, with
    /// all derivatives vanishing at the cutoff. Returns (g, dg/dr).
    fn envelope(&self, r: f64) -> (f64, f64) {
        if r >= self.r3 {
            return (0.0, 0.0);
        }
        let g = (-self.w3 / (self.r3 - r)).exp();
        let dg = -g * self.w3 / ((self.r3 - r) * (self.r3 - r));
        (g, dg)
    }
}

impl Potential for OraclePotential {
    fn evaluate(&self, s: &Structure) -> Result<EvalResult, PotentialError> {
        check_coverage(self, s)?;
        let cutoff = self.spec.cutoff;
        let nl = build_neighbor_list(s, cutoff)?;
        let n = s.n_atoms();
        let species = s.species();
        let mut out = EvalResult::zero(n);
        let switch_start = 0.9 * cutoff;

        for p in &nl.pairs {
            let (v0, dv0) = self.pair(species[p.i], species[p.j]).value_and_derivative(p.distance);
            let (sw, dsw) = switch(p.distance, switch_start, cutoff);
            let v = v0 * sw;
            let dv = dv0 * sw + v0 * dsw;
            out.energy += 0.5 * v;
            for x in 0..3 {
                out.forces[p.i][x] += dv * p.displacement[x] / p.distance;
            }
            for a in 0..3 {
                for b in 0..3 {
                    out.stress[a][b] +=
                        0.5 * dv * p.displacement[a] * p.displacement[b] / p.distance;
                }
            }
        }

        if self.spec.three_body_strength > 0.0 {
            for i in 0..n {
                let lambda = self.three_body[&species[i]];
                let nbrs: Vec<_> = nl.pairs_of(i).filter(|p| p.distance < self.r3).collect();
                for a in 0..nbrs.len() {
                    for b in (a + 1)..nbrs.len() {
                        let (p, q) = (nbrs[a], nbrs[b]);
                        let (gp, dgp) = self.envelope(p.distance);
                        let (gq, dgq) = self.envelope(q.distance);
                        if gp == 0.0 || gq == 0.0 {
                            continue;
                        }
                        let inv_rp = 1.0 / p.distance;
                        let inv_rq = 1.0 / q.distance;
                        let c = crate::structure::dot(p.displacement, q.displacement)
                            * inv_rp
                            * inv_rq;
                        let hb = c + 1.0 / 3.0;
                        let h = hb * hb;
                        let dh = 2.0 * hb;
                        out.energy += lambda * h * gp * gq;
                        // gradient w.r.t. the two pair displacement vectors
                        let mut grad_p = [0.0; 3];
                        let mut grad_q = [0.0; 3];
                        for x in 0..3 {
                            let dc_dp =
                                q.displacement[x] * inv_rp * inv_rq - c * p.displacement[x] * inv_rp * inv_rp;
                            let dc_dq =
                                p.displacement[x] * inv_rp * inv_rq - c * q.displacement[x] * inv_rq * inv_rq;
                            grad_p[x] = lambda
                                * gq
                                * (dh * dc_dp * gp + h * dgp * p.displacement[x] * inv_rp);
                            grad_q[x] = lambda
                                * gp
                                * (dh * dc_dq * gq + h * dgq * q.displacement[x] * inv_rq);
                        }
                        for x in 0..3 {
                            out.forces[p.j][x] -= grad_p[x];
                            out.forces[q.j][x] -= grad_q[x];
                            out.forces[i][x] += grad_p[x] + grad_q[x];
                        }
                        for xa in 0..3 {
                            for xb in 0..3 {
                                out.stress[xa][xb] += grad_p[xa] * p.displacement[xb]
                                    + grad_q[xa] * q.displacement[xb];
                            }
                        }
                    }
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
            return Err(PotentialError::NonFinite { what: "oracle energy" });
        }
        Ok(out)
    }

    fn supported_species(&self) -> Option<Vec<Element>> {
        Some(self.spec.elements.clone())
    }
}
