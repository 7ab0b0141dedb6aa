//! Training of descriptor potentials on labeled frames.
//!
//! The target is the weighted multi-target squared loss over N frames:
//! L = (1/N)·Σ_i [α_E‖(E_i−Ê_i)/n_i‖² + α_F·mean_a‖F−F̂‖² + α_S‖σ−σ̂‖²],
//! with the energy term per-atom normalized so mixed-size frames contribute
//! comparably. During optimization each residual is additionally divided by
//! its training-set std so the α defaults (1, 10, 0.1) act on comparable
//! scales; reported losses and errors are always in raw physical units.
//!
//! The optimizer is plain momentum gradient descent with a cosine-decayed
//! step, which keeps runs bit-reproducible for a given seed.

use crate::io::LabeledFrame;
use crate::potential::{
    DescriptorPotential, DescriptorSpec, EnsemblePotential, FrameGeometry, PotentialError,
    TrainMeta,
};
use crate::element::Element;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FitError {
    #[error("need at least {need} frames, got {got}")]
    TooFewFrames { need: usize, got: usize },
    #[error("holdout split must lie in (0,1), got {0}")]
    BadSplit(f64),
    #[error("frame {frame}: prediction list length mismatch")]
    ShapeMismatch { frame: usize },
    #[error("non-finite loss at frame {frame}")]
    NonFiniteLoss { frame: usize },
    #[error("ensemble needs k >= 2 members, got {0}")]
    TooFewMembers(usize),
    #[error("duplicate member seeds")]
    DuplicateSeeds,
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Hyperparameters of one training run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitHyperParams {
    pub descriptor: DescriptorSpec,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub alpha_energy: f64,
    pub alpha_force: f64,
    pub alpha_stress: f64,
    /// Deterministic multi-start: short pilot runs from seeds derived from
    /// the main seed; the best-validation basin is then trained in full.
    pub restarts: usize,
}

impl Default for FitHyperParams {
    fn default() -> Self {
        FitHyperParams {
            descriptor: DescriptorSpec::default(),
            hidden: 16,
            epochs: 300,
            batch_size: 8,
            learning_rate: 0.01,
            momentum: 0.9,
            alpha_energy: 1.0,
            alpha_force: 10.0,
            alpha_stress: 0.1,
            restarts: 1,
        }
    }
}

/// Per-target mean absolute and root-mean-square errors.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct TargetErrors {
    /// eV/atom.
    pub energy_mae: f64,
    pub energy_rmse: f64,
    /// eV/Å, per force component.
    pub force_mae: f64,
    pub force_rmse: f64,
    /// eV/Å³, per stress component.
    pub stress_mae: f64,
    pub stress_rmse: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Best validation loss seen so far; non-increasing by construction.
    pub best_val_loss: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitReport {
    /// Raw multi-target loss of the returned model on the training split.
    pub final_loss: f64,
    pub train: TargetErrors,
    pub validation: TargetErrors,
    pub history: Vec<EpochRecord>,
    pub seed: u64,
    pub train_frames: usize,
    pub validation_frames: usize,
}

/// The raw multi-target loss over matched frame/prediction lists.
pub fn loss(
    frames: &[LabeledFrame],
    predictions: &[crate::potential::EvalResult],
    alpha_energy: f64,
    alpha_force: f64,
    alpha_stress: f64,
) -> Result<f64, FitError> {
    if frames.len() != predictions.len() {
        return Err(FitError::ShapeMismatch { frame: frames.len().min(predictions.len()) });
    }
    let mut total = 0.0;
    for (idx, (f, p)) in frames.iter().zip(predictions).enumerate() {
        if p.forces.len() != f.n_atoms() {
            return Err(FitError::ShapeMismatch { frame: idx });
        }
        let (e, fo, st) = loss_terms(f, p);
        let l = alpha_energy * e + alpha_force * fo + alpha_stress * st;
        if !l.is_finite() {
            return Err(FitError::NonFiniteLoss { frame: idx });
        }
        total += l;
    }
    Ok(total / frames.len() as f64)
}

/// Unweighted per-frame loss terms: (energy, force, stress).
pub fn loss_terms(f: &LabeledFrame, p: &crate::potential::EvalResult) -> (f64, f64, f64) {
    let n = f.n_atoms() as f64;
    let de = (f.energy - p.energy) / n;
    let e_term = de * de;
    let mut f_term = 0.0;
    for (fa, pa) in f.forces.iter().zip(&p.forces) {
        for x in 0..3 {
            let d = fa[x] - pa[x];
            f_term += d * d;
        }
    }
    f_term /= n;
    let mut s_term = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let d = f.stress[a][b] - p.stress[a][b];
            s_term += d * d;
        }
    }
    (e_term, f_term, s_term)
}

struct PreparedFrame {
    geo: FrameGeometry,
    energy: f64,
    forces: Vec<[f64; 3]>,
    stress: [[f64; 3]; 3],
}

/// Residual scales used to normalize the loss during optimization.
#[derive(Clone, Copy, Debug)]
struct Normalization {
    energy: f64,
    force: f64,
    stress: f64,
}

/// Floors for the residual-normalization scales, in physical units, so
/// near-constant targets cannot blow up the normalized gradients.
const MIN_ENERGY_SCALE: f64 = 0.005; // eV/atom
const MIN_FORCE_SCALE: f64 = 0.02; // eV/Å
const MIN_STRESS_SCALE: f64 = 0.002; // eV/Å³

/// Global-norm gradient clip per batch; keeps momentum steps bounded.
const GRAD_CLIP: f64 = 10.0;

fn normalization(frames: &[&PreparedFrame], model: &DescriptorPotential) -> Normalization {
    // per-atom energy residual spread after the baseline offsets
    let mut e_res = Vec::with_capacity(frames.len());
    for f in frames {
        let offset: f64 = f
            .geo
            .species_idx
            .iter()
            .map(|&si| model.nets[si].offset)
            .sum();
        e_res.push((f.energy - offset) / f.geo.n as f64);
    }
    let mean = e_res.iter().sum::<f64>() / e_res.len() as f64;
    let e_var = e_res.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / e_res.len() as f64;
    let mut f_sq = 0.0;
    let mut f_count = 0usize;
    let mut s_sq = 0.0;
    let mut s_count = 0usize;
    for f in frames {
        for fa in &f.forces {
            for x in 0..3 {
                f_sq += fa[x] * fa[x];
                f_count += 1;
            }
        }
        for row in &f.stress {
            for &s in row {
                s_sq += s * s;
                s_count += 1;
            }
        }
    }
    Normalization {
        energy: e_var.sqrt().max(MIN_ENERGY_SCALE),
        force: (f_sq / f_count.max(1) as f64).sqrt().max(MIN_FORCE_SCALE),
        stress: (s_sq / s_count.max(1) as f64).sqrt().max(MIN_STRESS_SCALE),
    }
}

/// Normalized loss of one frame, optionally accumulating parameter grads.
fn frame_loss_grad(
    model: &DescriptorPotential,
    f: &PreparedFrame,
    hp: &FitHyperParams,
    norm: &Normalization,
    mut grads: Option<&mut Vec<Vec<f64>>>,
) -> f64 {
    let n = f.geo.n;
    let nf = n as f64;
    let nk = model.descriptor.n_centers();
    let d = model.input_dim();
    let (energy, forces, stress, _sens) = model.evaluate_geometry_full(&f.geo);

    let de = (energy - f.energy) / nf / norm.energy;
    let mut l = hp.alpha_energy * de * de;

    let mut g_force = vec![[0.0; 3]; n];
    for a in 0..n {
        for x in 0..3 {
            let r = (forces[a][x] - f.forces[a][x]) / norm.force;
            l += hp.alpha_force * r * r / nf;
            g_force[a][x] = 2.0 * hp.alpha_force * r / (norm.force * nf);
        }
    }
    let mut g_stress = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let r = (stress[a][b] - f.stress[a][b]) / norm.stress;
            l += hp.alpha_stress * r * r;
            g_stress[a][b] = 2.0 * hp.alpha_stress * r / norm.stress;
        }
    }

    if let Some(grads) = grads.as_deref_mut() {
        // cotangent of the per-atom descriptor sensitivities
        let mut q = vec![vec![0.0; d]; n];
        for p in &f.geo.pairs {
            // dL/dw_p from forces and stress
            let mut dl_dw = 0.0;
            for x in 0..3 {
                dl_dw += (g_force[p.i][x] - g_force[p.j][x]) * p.unit[x];
            }
            for a in 0..3 {
                for b in 0..3 {
                    dl_dw += g_stress[a][b] * p.disp[a] * p.disp[b] / (p.r * f.geo.volume);
                }
            }
            if dl_dw != 0.0 {
                let qi = &mut q[p.i];
                for k in 0..nk {
                    qi[p.tj * nk + k] += dl_dw * p.dg[k];
                }
            }
        }
        let c_energy = 2.0 * hp.alpha_energy * de / (norm.energy * nf);
        let mut x = vec![0.0; d];
        let mut qx = vec![0.0; d];
        for i in 0..n {
            let si = f.geo.species_idx[i];
            let net = &model.nets[si];
            for m in 0..d {
                x[m] = (f.geo.descriptors[i][m] - net.shift[m]) * net.inv_scale[m];
                qx[m] = q[i][m] * net.inv_scale[m];
            }
            crate::potential::descriptor_grad(
                d,
                net.hidden,
                &net.params,
                &x,
                &qx,
                c_energy,
                &mut grads[si],
            );
        }
    }
    l
}

fn dataset_loss(
    model: &DescriptorPotential,
    frames: &[&PreparedFrame],
    hp: &FitHyperParams,
    norm: &Normalization,
) -> f64 {
    frames
        .iter()
        .map(|f| frame_loss_grad(model, f, hp, norm, None))
        .sum::<f64>()
        / frames.len().max(1) as f64
}

/// Per-species baseline energies by ridge-regularized least squares on the
/// frame energies; degenerate for fixed stoichiometries, where the ridge
/// term splits the mean energy evenly across species.
fn baseline_offsets(frames: &[&PreparedFrame], n_species: usize) -> Vec<f64> {
    let k = n_species;
    let mut ata = vec![vec![0.0; k]; k];
    let mut atb = vec![0.0; k];
    for f in frames {
        let mut counts = vec![0.0; k];
        for &si in &f.geo.species_idx {
            counts[si] += 1.0;
        }
        for a in 0..k {
            for b in 0..k {
                ata[a][b] += counts[a] * counts[b];
            }
            atb[a] += counts[a] * f.energy;
        }
    }
    let ridge = 1e-6 * (0..k).map(|a| ata[a][a]).sum::<f64>().max(1.0) / k as f64;
    for a in 0..k {
        ata[a][a] += ridge;
    }
    solve_dense(&mut ata, &mut atb);
    atb
}

/// In-place Gaussian elimination with partial pivoting; b becomes x.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col];
        if p.abs() < 1e-300 {
            continue;
        }
        for row in (col + 1)..n {
            let f = a[row][col] / p;
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let p = a[col][col];
        if p.abs() < 1e-300 {
            b[col] = 0.0;
            continue;
        }
        b[col] /= p;
        for row in 0..col {
            b[row] -= a[row][col] * b[col];
        }
    }
}

fn input_standardization(
    frames: &[&PreparedFrame],
    model: &mut DescriptorPotential,
) {
    let d = model.input_dim();
    let k = model.species.len();
    let mut sums = vec![vec![0.0; d]; k];
    let mut sq = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for f in frames {
        for (i, &si) in f.geo.species_idx.iter().enumerate() {
            counts[si] += 1;
            for m in 0..d {
                let v = f.geo.descriptors[i][m];
                sums[si][m] += v;
                sq[si][m] += v * v;
            }
        }
    }
    for si in 0..k {
        let c = counts[si].max(1) as f64;
        for m in 0..d {
            let mean = sums[si][m] / c;
            let var = (sq[si][m] / c - mean * mean).max(0.0);
            model.nets[si].shift[m] = mean;
            model.nets[si].inv_scale[m] = 1.0 / var.sqrt().max(0.05);
        }
    }
}

fn target_errors(
    model: &DescriptorPotential,
    frames: &[&PreparedFrame],
) -> TargetErrors {
    let mut out = TargetErrors::default();
    let (mut ne, mut nf, mut ns) = (0usize, 0usize, 0usize);
    for f in frames {
        let pred = model.evaluate_geometry(&f.geo);
        let de = (pred.energy - f.energy) / f.geo.n as f64;
        out.energy_mae += de.abs();
        out.energy_rmse += de * de;
        ne += 1;
        for (fa, pa) in f.forces.iter().zip(&pred.forces) {
            for x in 0..3 {
                let d = pa[x] - fa[x];
                out.force_mae += d.abs();
                out.force_rmse += d * d;
                nf += 1;
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                let d = pred.stress[a][b] - f.stress[a][b];
                out.stress_mae += d.abs();
                out.stress_rmse += d * d;
                ns += 1;
            }
        }
    }
    out.energy_mae /= ne.max(1) as f64;
    out.energy_rmse = (out.energy_rmse / ne.max(1) as f64).sqrt();
    out.force_mae /= nf.max(1) as f64;
    out.force_rmse = (out.force_rmse / nf.max(1) as f64).sqrt();
    out.stress_mae /= ns.max(1) as f64;
    out.stress_rmse = (out.stress_rmse / ns.max(1) as f64).sqrt();
    out
}

/// Train one descriptor potential.
///
/// `split` is the held-out validation fraction; held-out frames never enter
/// a gradient update and the returned model is the best-validation
/// checkpoint. Fully deterministic for a given seed: with `restarts > 1`,
/// pilot runs over seeds derived from `seed` pick the starting basin and the
/// winner is retrained with the full epoch budget.
pub fn train(
    frames: &[LabeledFrame],
    split: f64,
    hp: &FitHyperParams,
    seed: u64,
) -> Result<(DescriptorPotential, FitReport), FitError> {
    if hp.restarts <= 1 {
        return train_single(frames, split, hp, seed);
    }
    let pilot = FitHyperParams {
        epochs: (hp.epochs * 15 / 100).max(1),
        ..hp.clone()
    };
    let mut best: Option<(f64, u64)> = None;
    for r in 0..hp.restarts {
        let sub = derive_seed(seed, r as u64);
        let (_, report) = train_single(frames, split, &pilot, sub)?;
        let score = report
            .history
            .last()
            .map(|h| h.best_val_loss)
            .unwrap_or(f64::INFINITY);
        if best.is_none() || score < best.unwrap().0 {
            best = Some((score, sub));
        }
    }
    train_single(frames, split, hp, best.unwrap().1)
}

/// Stable seed mixing (splitmix64 over seed ^ f(index)).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E3779B97F4A7C15);
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn train_single(
    frames: &[LabeledFrame],
    split: f64,
    hp: &FitHyperParams,
    seed: u64,
) -> Result<(DescriptorPotential, FitReport), FitError> {
    if frames.len() < 10 {
        return Err(FitError::TooFewFrames { need: 10, got: frames.len() });
    }
    if !(split > 0.0 && split < 1.0) {
        return Err(FitError::BadSplit(split));
    }
    let mut species: Vec<Element> = frames
        .iter()
        .flat_map(|f| f.structure.species().iter().copied())
        .collect();
    species.sort();
    species.dedup();

    let prepared: Vec<PreparedFrame> = frames
        .iter()
        .map(|f| {
            Ok(PreparedFrame {
                geo: FrameGeometry::build(&f.structure, &hp.descriptor, &species)?,
                energy: f.energy,
                forces: f.forces.clone(),
                stress: f.stress,
            })
        })
        .collect::<Result<_, PotentialError>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..frames.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((frames.len() as f64 * split).round() as usize).clamp(1, frames.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let train_set: Vec<&PreparedFrame> = train_idx.iter().map(|&i| &prepared[i]).collect();
    let val_set: Vec<&PreparedFrame> = val_idx.iter().map(|&i| &prepared[i]).collect();

    let mut model =
        DescriptorPotential::new_random(species.clone(), hp.descriptor.clone(), hp.hidden, seed);
    model.meta = TrainMeta {
        seed,
        alpha_energy: hp.alpha_energy,
        alpha_force: hp.alpha_force,
        alpha_stress: hp.alpha_stress,
    };
    let offsets = baseline_offsets(&train_set, species.len());
    for (net, off) in model.nets.iter_mut().zip(&offsets) {
        net.offset = *off;
    }
    input_standardization(&train_set, &mut model);
    let norm = normalization(&train_set, &model);

    let mut velocity: Vec<Vec<f64>> =
        model.nets.iter().map(|n| vec![0.0; n.params.len()]).collect();
    let mut history = Vec::with_capacity(hp.epochs);
    let mut best_val = f64::INFINITY;
    let mut best_params: Vec<Vec<f64>> = model.nets.iter().map(|n| n.params.clone()).collect();
    let mut train_order: Vec<usize> = (0..train_set.len()).collect();
    let total_steps = hp.epochs * train_set.len().div_ceil(hp.batch_size);
    let mut step = 0usize;

    for epoch in 0..hp.epochs {
        train_order.shuffle(&mut rng);
        for chunk in train_order.chunks(hp.batch_size) {
            let mut grads: Vec<Vec<f64>> =
                model.nets.iter().map(|n| vec![0.0; n.params.len()]).collect();
            let mut batch_loss = 0.0;
            for &fi in chunk {
                batch_loss +=
                    frame_loss_grad(&model, train_set[fi], hp, &norm, Some(&mut grads));
            }
            if !batch_loss.is_finite() {
                return Err(FitError::NonFiniteLoss { frame: chunk[0] });
            }
            let mut scale = 1.0 / chunk.len() as f64;
            let gnorm = scale
                * grads
                    .iter()
                    .flat_map(|g| g.iter().map(|x| x * x))
                    .sum::<f64>()
                    .sqrt();
            if gnorm > GRAD_CLIP {
                scale *= GRAD_CLIP / gnorm;
            }
            let progress = step as f64 / total_steps.max(1) as f64;
            let warmup = (progress / 0.05).min(1.0);
            let lr = hp.learning_rate
                * warmup
                * (0.01 + 0.99 * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
            for (si, net) in model.nets.iter_mut().enumerate() {
                for (p, (v, g)) in net
                    .params
                    .iter_mut()
                    .zip(velocity[si].iter_mut().zip(&grads[si]))
                {
                    *v = hp.momentum * *v - lr * g * scale;
                    *p += *v;
                }
            }
            step += 1;
        }
        let train_loss = dataset_loss(&model, &train_set, hp, &norm);
        let val_loss = dataset_loss(&model, &val_set, hp, &norm);
        if !val_loss.is_finite() || !train_loss.is_finite() {
            return Err(FitError::NonFiniteLoss { frame: 0 });
        }
        if val_loss < best_val {
            best_val = val_loss;
            for (bp, net) in best_params.iter_mut().zip(&model.nets) {
                bp.clone_from(&net.params);
            }
        }
        history.push(EpochRecord { epoch, train_loss, val_loss, best_val_loss: best_val });
    }

    for (net, bp) in model.nets.iter_mut().zip(best_params) {
        net.params = bp;
    }

    // raw-unit report on the best-validation checkpoint
    let train_frames_raw: Vec<LabeledFrame> =
        train_idx.iter().map(|&i| frames[i].clone()).collect();
    let train_preds: Vec<_> = train_set
        .iter()
        .map(|f| model.evaluate_geometry(&f.geo))
        .collect();
    let final_loss = loss(
        &train_frames_raw,
        &train_preds,
        hp.alpha_energy,
        hp.alpha_force,
        hp.alpha_stress,
    )?;
    let report = FitReport {
        final_loss,
        train: target_errors(&model, &train_set),
        validation: target_errors(&model, &val_set),
        history,
        seed,
        train_frames: train_set.len(),
        validation_frames: val_set.len(),
    };
    Ok((model, report))
}

/// Train `k` members on the identical frame set, differing only in their
/// parameter initialization seeds. Members train concurrently.
pub fn train_ensemble(
    frames: &[LabeledFrame],
    split: f64,
    hp: &FitHyperParams,
    seeds: &[u64],
) -> Result<(EnsemblePotential, Vec<FitReport>), FitError> {
    if seeds.len() < 2 {
        return Err(FitError::TooFewMembers(seeds.len()));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err(FitError::DuplicateSeeds);
    }
    let results: Vec<Result<(DescriptorPotential, FitReport), FitError>> = seeds
        .par_iter()
        .map(|&s| train(frames, split, hp, s))
        .collect();
    let mut members = Vec::with_capacity(seeds.len());
    let mut reports = Vec::with_capacity(seeds.len());
    for r in results {
        let (m, rep) = r?;
        members.push(m);
        reports.push(rep);
    }
    let ensemble = EnsemblePotential::new(members).expect("k >= 2 checked above");
    Ok((ensemble, reports))
}
