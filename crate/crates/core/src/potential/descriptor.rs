//! Trainable descriptor potential: per-atom radial Gaussian descriptors
//! feeding a per-species feedforward network, E = Σ_i ε(d_i).
//!
//! Forces and virial stress come from exact backpropagation through the
//! descriptors; the parameter gradients needed for training (including the
//! force and stress terms, which involve mixed second derivatives of the
//! network) are computed with a forward-mode dual number pushed through the
//! backward pass, which keeps everything analytic.

use super::{EvalResult, Potential, PotentialError};
use crate::element::Element;
use crate::neighbor::build_neighbor_list;
use crate::structure::Structure;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Radial descriptor definition shared by every species of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptorSpec {
    /// Gaussian centers μ_k, Å.
    pub centers: Vec<f64>,
    /// Gaussian width η, Å⁻².
    pub eta: f64,
    /// Radial cutoff r_c, Å (cosine cutoff function).
    pub cutoff: f64,
}

impl Default for DescriptorSpec {
    fn default() -> Self {
        let n = 8;
        let (lo, hi) = (0.5, 5.0);
        let centers = (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect();
        DescriptorSpec { centers, eta: 4.0, cutoff: 5.0 }
    }
}

impl DescriptorSpec {
    pub fn n_centers(&self) -> usize {
        self.centers.len()
    }

    /// G_k(r) and dG_k/dr for every center. Zero at and beyond the cutoff.
    pub fn radial(&self, r: f64, g: &mut [f64], dg: &mut [f64]) {
        if r >= self.cutoff {
            g.fill(0.0);
            dg.fill(0.0);
            return;
        }
        let arg = std::f64::consts::PI * r / self.cutoff;
        let fc = 0.5 * (arg.cos() + 1.0);
        let dfc = -0.5 * std::f64::consts::PI / self.cutoff * arg.sin();
        for (k, &mu) in self.centers.iter().enumerate() {
            let e = (-self.eta * (r - mu) * (r - mu)).exp();
            g[k] = e * fc;
            dg[k] = e * (-2.0 * self.eta * (r - mu)) * fc + e * dfc;
        }
    }
}

/// Training metadata carried by a fitted model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub alpha_energy: f64,
    pub alpha_force: f64,
    pub alpha_stress: f64,
}

/// Per-species atomic-energy network: two tanh hidden layers and a linear
/// readout, with stored input standardization and a per-atom energy offset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeciesNet {
    pub hidden: usize,
    pub shift: Vec<f64>,
    pub inv_scale: Vec<f64>,
    /// Per-atom baseline energy, eV.
    pub offset: f64,
    /// Flat parameters: [W1 (h×d), b1 (h), W2 (h×h), b2 (h), w3 (h), b3].
    pub params: Vec<f64>,
}

pub(crate) fn n_params(d: usize, h: usize) -> usize {
    h * d + h + h * h + h + h + 1
}

impl SpeciesNet {
    fn new_random(d: usize, h: usize, rng: &mut impl Rng) -> Self {
        let mut params = vec![0.0; n_params(d, h)];
        let mut k = 0;
        let lim1 = (6.0 / (d + h) as f64).sqrt();
        for _ in 0..h * d {
            params[k] = rng.gen_range(-lim1..lim1);
            k += 1;
        }
        k += h; // b1 = 0
        let lim2 = (6.0 / (2 * h) as f64).sqrt();
        for _ in 0..h * h {
            params[k] = rng.gen_range(-lim2..lim2);
            k += 1;
        }
        k += h; // b2 = 0
        // damped readout init: predictions start near the baseline offset
        let lim3 = 0.1 * (6.0 / (h + 1) as f64).sqrt();
        for _ in 0..h {
            params[k] = rng.gen_range(-lim3..lim3);
            k += 1;
        }
        SpeciesNet {
            hidden: h,
            shift: vec![0.0; d],
            inv_scale: vec![1.0; d],
            offset: 0.0,
            params,
        }
    }
}

/// Forward-mode dual number: carries a value and one directional derivative.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Dual {
    pub re: f64,
    pub du: f64,
}

pub(crate) trait Scalar: Copy + Default {
    fn from_f64(x: f64) -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn scale(self, x: f64) -> Self;
    fn tanh(self) -> Self;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
}

impl Scalar for Dual {
    fn from_f64(x: f64) -> Self {
        Dual { re: x, du: 0.0 }
    }
    fn add(self, o: Self) -> Self {
        Dual { re: self.re + o.re, du: self.du + o.du }
    }
    fn sub(self, o: Self) -> Self {
        Dual { re: self.re - o.re, du: self.du - o.du }
    }
    fn mul(self, o: Self) -> Self {
        Dual { re: self.re * o.re, du: self.re * o.du + self.du * o.re }
    }
    fn scale(self, x: f64) -> Self {
        Dual { re: self.re * x, du: self.du * x }
    }
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        Dual { re: t, du: self.du * (1.0 - t * t) }
    }
}

/// One forward + backward sweep of the two-hidden-layer network, generic
/// over the scalar type. Returns (y, dy/dx) and the intermediates needed
/// for parameter gradients.
struct NetPass<T> {
    y: T,
    /// ∂y/∂x.
    input_grad: Vec<T>,
    h1: Vec<T>,
    h2: Vec<T>,
    g1: Vec<T>,
    g2: Vec<T>,
    x: Vec<T>,
}

fn net_pass<T: Scalar>(d: usize, h: usize, params: &[f64], x: &[T]) -> NetPass<T> {
    let (w1, rest) = params.split_at(h * d);
    let (b1, rest) = rest.split_at(h);
    let (w2, rest) = rest.split_at(h * h);
    let (b2, rest) = rest.split_at(h);
    let (w3, b3) = rest.split_at(h);

    let mut h1 = vec![T::default(); h];
    for u in 0..h {
        let mut z = T::from_f64(b1[u]);
        for v in 0..d {
            z = z.add(x[v].scale(w1[u * d + v]));
        }
        h1[u] = z.tanh();
    }
    let mut h2 = vec![T::default(); h];
    for u in 0..h {
        let mut z = T::from_f64(b2[u]);
        for v in 0..h {
            z = z.add(h1[v].scale(w2[u * h + v]));
        }
        h2[u] = z.tanh();
    }
    let mut y = T::from_f64(b3[0]);
    for u in 0..h {
        y = y.add(h2[u].scale(w3[u]));
    }
    // backward: g2 = w3 ⊙ (1-h2²), g1 = (W2ᵀ g2) ⊙ (1-h1²), a = W1ᵀ g1
    let one = T::from_f64(1.0);
    let mut g2 = vec![T::default(); h];
    for u in 0..h {
        g2[u] = one.sub(h2[u].mul(h2[u])).scale(w3[u]);
    }
    let mut g1 = vec![T::default(); h];
    for v in 0..h {
        let mut acc = T::default();
        for u in 0..h {
            acc = acc.add(g2[u].scale(w2[u * h + v]));
        }
        g1[v] = acc.mul(one.sub(h1[v].mul(h1[v])));
    }
    let mut input_grad = vec![T::default(); d];
    for v in 0..d {
        let mut acc = T::default();
        for u in 0..h {
            acc = acc.add(g1[u].scale(w1[u * d + v]));
        }
        input_grad[v] = acc;
    }
    NetPass { y, input_grad, h1, h2, g1, g2, x: x.to_vec() }
}

/// Plain evaluation: (ε, ∂ε/∂x).
pub(crate) fn eval_net(d: usize, h: usize, params: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
    let pass = net_pass::<f64>(d, h, params, x);
    (pass.y, pass.input_grad)
}

/// Accumulate `c_energy·∂ε/∂θ + ∂(qᵀ ∂ε/∂x)/∂θ` into `grad`.
///
/// The second term is obtained by evaluating the backward pass on the dual
/// input x + ε·q and reading the derivative parts of the standard
/// parameter-gradient formulas.
pub(crate) fn accumulate_net_grad(
    d: usize,
    h: usize,
    params: &[f64],
    x: &[f64],
    q: &[f64],
    c_energy: f64,
    grad: &mut [f64],
) {
    let xd: Vec<Dual> = x.iter().zip(q).map(|(&re, &du)| Dual { re, du }).collect();
    let pass = net_pass::<Dual>(d, h, params, &xd);
    let take = |t: Dual| c_energy * t.re + t.du;
    let mut k = 0;
    for u in 0..h {
        for v in 0..d {
            grad[k] += take(pass.g1[u].mul(pass.x[v]));
            k += 1;
        }
    }
    for u in 0..h {
        grad[k] += take(pass.g1[u]);
        k += 1;
    }
    for u in 0..h {
        for v in 0..h {
            grad[k] += take(pass.g2[u].mul(pass.h1[v]));
            k += 1;
        }
    }
    for u in 0..h {
        grad[k] += take(pass.g2[u]);
        k += 1;
    }
    for u in 0..h {
        grad[k] += take(pass.h2[u]);
        k += 1;
    }
    grad[k] += take(Dual { re: 1.0, du: 0.0 });
}

/// Precomputed geometry of one frame against a model's descriptor spec:
/// everything that does not depend on network weights.
#[derive(Clone, Debug)]
pub struct FrameGeometry {
    pub n: usize,
    pub volume: f64,
    /// Index of each atom's species in the model species list.
    pub species_idx: Vec<usize>,
    /// Raw (unstandardized) descriptor vectors, length n_species·n_centers.
    pub descriptors: Vec<Vec<f64>>,
    pub pairs: Vec<GeomPair>,
}

#[derive(Clone, Debug)]
pub struct GeomPair {
    pub i: usize,
    pub j: usize,
    /// Species index of atom j in the model species list.
    pub tj: usize,
    pub r: f64,
    pub unit: [f64; 3],
    pub disp: [f64; 3],
    /// dG_k/dr per descriptor center.
    pub dg: Vec<f64>,
}

impl FrameGeometry {
    pub fn build(
        s: &Structure,
        spec: &DescriptorSpec,
        species: &[Element],
    ) -> Result<Self, PotentialError> {
        let n = s.n_atoms();
        let species_idx: Vec<usize> = s
            .species()
            .iter()
            .map(|e| {
                species
                    .iter()
                    .position(|m| m == e)
                    .ok_or(PotentialError::UncoveredSpecies(*e))
            })
            .collect::<Result<_, _>>()?;
        let nk = spec.n_centers();
        let dlen = species.len() * nk;
        let nl = build_neighbor_list(s, spec.cutoff)?;
        let mut descriptors = vec![vec![0.0; dlen]; n];
        let mut pairs = Vec::with_capacity(nl.pairs.len());
        let mut g = vec![0.0; nk];
        let mut dg = vec![0.0; nk];
        for p in &nl.pairs {
            spec.radial(p.distance, &mut g, &mut dg);
            let tj = species_idx[p.j];
            for k in 0..nk {
                descriptors[p.i][tj * nk + k] += g[k];
            }
            pairs.push(GeomPair {
                i: p.i,
                j: p.j,
                tj,
                r: p.distance,
                unit: [
                    p.displacement[0] / p.distance,
                    p.displacement[1] / p.distance,
                    p.displacement[2] / p.distance,
                ],
                disp: p.displacement,
                dg: dg.clone(),
            });
        }
        Ok(FrameGeometry {
            n,
            volume: s.volume(),
            species_idx,
            descriptors,
            pairs,
        })
    }
}

/// The trainable model: descriptor spec plus one network per species.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptorPotential {
    /// Species universe, sorted by atomic number.
    pub species: Vec<Element>,
    pub descriptor: DescriptorSpec,
    pub nets: Vec<SpeciesNet>,
    pub meta: TrainMeta,
}

impl DescriptorPotential {
    pub fn new_random(
        mut species: Vec<Element>,
        descriptor: DescriptorSpec,
        hidden: usize,
        seed: u64,
    ) -> Self {
        species.sort();
        species.dedup();
        let d = species.len() * descriptor.n_centers();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nets = species
            .iter()
            .map(|_| SpeciesNet::new_random(d, hidden, &mut rng))
            .collect();
        DescriptorPotential {
            species,
            descriptor,
            nets,
            meta: TrainMeta { seed, ..TrainMeta::default() },
        }
    }

    pub fn input_dim(&self) -> usize {
        self.species.len() * self.descriptor.n_centers()
    }

    /// Energy/forces/stress from a precomputed frame geometry.
    pub fn evaluate_geometry(&self, geo: &FrameGeometry) -> EvalResult {
        let (energy, forces, stress, _) = self.evaluate_geometry_full(geo);
        EvalResult { energy, forces, stress }
    }

    /// Like `evaluate_geometry` but also returns the per-atom descriptor
    /// sensitivities ∂E/∂d_i (raw descriptor space), needed for training.
    pub(crate) fn evaluate_geometry_full(
        &self,
        geo: &FrameGeometry,
    ) -> (f64, Vec<[f64; 3]>, [[f64; 3]; 3], Vec<Vec<f64>>) {
        let d = self.input_dim();
        let nk = self.descriptor.n_centers();
        let mut energy = 0.0;
        let mut forces = vec![[0.0; 3]; geo.n];
        let mut stress = [[0.0; 3]; 3];
        let mut sens = Vec::with_capacity(geo.n);
        let mut x = vec![0.0; d];
        for i in 0..geo.n {
            let net = &self.nets[geo.species_idx[i]];
            for m in 0..d {
                x[m] = (geo.descriptors[i][m] - net.shift[m]) * net.inv_scale[m];
            }
            let (y, dydx) = eval_net(d, net.hidden, &net.params, &x);
            energy += y + net.offset;
            let a_raw: Vec<f64> = dydx
                .iter()
                .zip(&net.inv_scale)
                .map(|(g, s)| g * s)
                .collect();
            sens.push(a_raw);
        }
        for p in &geo.pairs {
            let ai = &sens[p.i];
            let mut w = 0.0;
            for k in 0..nk {
                w += ai[p.tj * nk + k] * p.dg[k];
            }
            for xk in 0..3 {
                forces[p.i][xk] += w * p.unit[xk];
                forces[p.j][xk] -= w * p.unit[xk];
            }
            for a in 0..3 {
                for b in 0..3 {
                    stress[a][b] += w * p.disp[a] * p.disp[b] / p.r;
                }
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                stress[a][b] /= geo.volume;
            }
        }
        (energy, forces, stress, sens)
    }
}

impl Potential for DescriptorPotential {
    fn evaluate(&self, s: &Structure) -> Result<EvalResult, PotentialError> {
        let geo = FrameGeometry::build(s, &self.descriptor, &self.species)?;
        let out = self.evaluate_geometry(&geo);
        if !out.is_finite() {
            return Err(PotentialError::NonFinite { what: "descriptor energy" });
        }
        Ok(out)
    }

    fn supported_species(&self) -> Option<Vec<Element>> {
        Some(self.species.clone())
    }
}
