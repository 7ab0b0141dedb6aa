//! Constant-temperature molecular dynamics and Einstein-relation
//! self-diffusivity.
//!
//! The integrator is velocity Verlet with a Langevin thermostat in the
//! BAOAB splitting; zero friction reduces it exactly to symplectic NVE.
//! Positions are integrated unwrapped so mean squared displacements are
//! continuous across cell boundaries; forces are always evaluated on the
//! wrapped periodic geometry.

use crate::consts::{A2_FS_TO_CM2_S, EV_TO_MASS_VEL2, KB, MASS_VEL2_TO_EV};
use crate::element::Element;
use crate::potential::{Potential, PotentialError};
use crate::structure::{Lattice, Structure, StructureError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum MdError {
    #[error("timestep {0} fs above the 2 fs guard")]
    TimestepTooLarge(f64),
    #[error("kinetic temperature {t_kin:.1} K exceeded 10x the target at step {step}")]
    TemperatureBlowup { step: usize, t_kin: f64 },
    #[error("non-finite forces at step {0}")]
    NonFiniteForces(usize),
    #[error("fit window [{lo}, {hi}] fs exceeds the trajectory span {span} fs")]
    WindowExceedsSpan { lo: f64, hi: f64, span: f64 },
    #[error("trajectory has too few frames ({0}) for a diffusivity fit")]
    TooFewFrames(usize),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

#[derive(Clone, Debug)]
pub struct MdOptions {
    /// Target temperature, K.
    pub temperature: f64,
    /// Timestep, fs (guarded at 2 fs).
    pub timestep: f64,
    pub steps: usize,
    /// Langevin friction, fs⁻¹; zero gives plain NVE velocity Verlet.
    pub friction: f64,
    pub seed: u64,
    /// Record every `stride`-th step (plus the initial state).
    pub stride: usize,
    /// Remove the center-of-mass momentum after drawing initial velocities.
    pub zero_momentum: bool,
}

impl Default for MdOptions {
    fn default() -> Self {
        MdOptions {
            temperature: 300.0,
            timestep: 1.0,
            steps: 1000,
            friction: 0.01,
            seed: 0,
            stride: 5,
            zero_momentum: true,
        }
    }
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct TrajFrame {
    /// fs.
    pub time: f64,
    /// Unwrapped Cartesian positions, Å.
    pub positions: Vec<[f64; 3]>,
    /// Å/fs.
    pub velocities: Vec<[f64; 3]>,
    pub potential_energy: f64,
    pub kinetic_energy: f64,
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct Trajectory {
    pub timestep: f64,
    pub stride: usize,
    pub species: Vec<Element>,
    pub lattice: Lattice,
    pub frames: Vec<TrajFrame>,
    pub target_temperature: f64,
    pub friction: f64,
    pub seed: u64,
}

impl Trajectory {
    pub fn span(&self) -> f64 {
        self.frames.last().map(|f| f.time).unwrap_or(0.0)
    }

    /// Instantaneous kinetic temperature of one frame, K.
    pub fn kinetic_temperature(&self, frame: usize) -> f64 {
        let n = self.species.len();
        2.0 * self.frames[frame].kinetic_energy / (3.0 * n as f64 * KB)
    }

    /// Total momentum of one frame, amu·Å/fs.
    pub fn total_momentum(&self, frame: usize) -> [f64; 3] {
        let mut p = [0.0; 3];
        for (e, v) in self.species.iter().zip(&self.frames[frame].velocities) {
            for x in 0..3 {
                p[x] += e.mass() * v[x];
            }
        }
        p
    }
}

fn kinetic_energy(species: &[Element], v: &[[f64; 3]]) -> f64 {
    species
        .iter()
        .zip(v)
        .map(|(e, vi)| {
            0.5 * e.mass() * (vi[0] * vi[0] + vi[1] * vi[1] + vi[2] * vi[2]) * MASS_VEL2_TO_EV
        })
        .sum()
}

/// Langevin NVT run; deterministic for a given seed.
pub fn run_nvt(s: &Structure, p: &dyn Potential, opts: &MdOptions) -> Result<Trajectory, MdError> {
    if opts.timestep > 2.0 || opts.timestep <= 0.0 {
        return Err(MdError::TimestepTooLarge(opts.timestep));
    }
    let n = s.n_atoms();
    let dt = opts.timestep;
    let species = s.species().to_vec();
    let masses: Vec<f64> = species.iter().map(|e| e.mass()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    // Maxwell-Boltzmann initial velocities at the target temperature
    let mut vel = vec![[0.0; 3]; n];
    if opts.temperature > 0.0 {
        for (i, m) in masses.iter().enumerate() {
            let sigma = (KB * opts.temperature / (m * MASS_VEL2_TO_EV)).sqrt();
            for x in 0..3 {
                let z: f64 = StandardNormal.sample(&mut rng);
                vel[i][x] = sigma * z;
            }
        }
        if opts.zero_momentum {
            let total_mass: f64 = masses.iter().sum();
            let mut pcom = [0.0; 3];
            for (m, v) in masses.iter().zip(&vel) {
                for x in 0..3 {
                    pcom[x] += m * v[x];
                }
            }
            for v in &mut vel {
                for x in 0..3 {
                    v[x] -= pcom[x] / total_mass;
                }
            }
        }
    }

    let mut pos = s.cart_coords();
    let eval_forces = |pos: &[[f64; 3]], step: usize| -> Result<(f64, Vec<[f64; 3]>), MdError> {
        let wrapped = s.with_cart_coords(pos)?;
        let out = p.evaluate(&wrapped)?;
        if !out.is_finite() {
            return Err(MdError::NonFiniteForces(step));
        }
        Ok((out.energy, out.forces))
    };
    let (mut epot, mut forces) = eval_forces(&pos, 0)?;

    let c1 = (-opts.friction * dt).exp();
    let c2 = if opts.friction > 0.0 { (1.0 - c1 * c1).sqrt() } else { 0.0 };

    let mut frames = Vec::with_capacity(opts.steps / opts.stride + 2);
    let record = |frames: &mut Vec<TrajFrame>,
                  step: usize,
                  pos: &[[f64; 3]],
                  vel: &[[f64; 3]],
                  epot: f64| {
        frames.push(TrajFrame {
            time: step as f64 * dt,
            positions: pos.to_vec(),
            velocities: vel.to_vec(),
            potential_energy: epot,
            kinetic_energy: kinetic_energy(&species, vel),
        });
    };
    record(&mut frames, 0, &pos, &vel, epot);

    for step in 1..=opts.steps {
        // B: half kick
        for i in 0..n {
            let f = EV_TO_MASS_VEL2 / masses[i];
            for x in 0..3 {
                vel[i][x] += 0.5 * dt * forces[i][x] * f;
            }
        }
        // A: half drift
        for i in 0..n {
            for x in 0..3 {
                pos[i][x] += 0.5 * dt * vel[i][x];
            }
        }
        // O: Ornstein-Uhlenbeck velocity refresh
        if opts.friction > 0.0 && opts.temperature > 0.0 {
            for i in 0..n {
                let sigma = (KB * opts.temperature / (masses[i] * MASS_VEL2_TO_EV)).sqrt();
                for x in 0..3 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    vel[i][x] = c1 * vel[i][x] + c2 * sigma * z;
                }
            }
        }
        // A: half drift
        for i in 0..n {
            for x in 0..3 {
                pos[i][x] += 0.5 * dt * vel[i][x];
            }
        }
        // B: half kick with fresh forces
        let (e_new, f_new) = eval_forces(&pos, step)?;
        epot = e_new;
        forces = f_new;
        for i in 0..n {
            let f = EV_TO_MASS_VEL2 / masses[i];
            for x in 0..3 {
                vel[i][x] += 0.5 * dt * forces[i][x] * f;
            }
        }

        if opts.temperature > 0.0 {
            let t_kin =
                2.0 * kinetic_energy(&species, &vel) / (3.0 * n as f64 * KB);
            if t_kin > 10.0 * opts.temperature {
                return Err(MdError::TemperatureBlowup { step, t_kin });
            }
        }
        if step % opts.stride == 0 {
            record(&mut frames, step, &pos, &vel, epot);
        }
    }

    Ok(Trajectory {
        timestep: dt,
        stride: opts.stride,
        species,
        lattice: *s.lattice(),
        frames,
        target_temperature: opts.temperature,
        friction: opts.friction,
        seed: opts.seed,
    })
}

/// Mobility classes against the low-diffusivity screening threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mobility {
    Mobile,
    Inert,
}

/// Default mobility boundary, cm²/s.
pub const MOBILITY_THRESHOLD: f64 = 1e-7;

/// Inert iff D < threshold; the boundary itself counts as mobile.
pub fn classify_mobility(d: f64, threshold: f64) -> Mobility {
    if d < threshold {
        Mobility::Inert
    } else {
        Mobility::Mobile
    }
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct DiffusivityReport {
    /// Self-diffusion coefficient per species, cm²/s.
    pub per_species: BTreeMap<Element, f64>,
    /// All-atom average, cm²/s.
    pub overall: f64,
    /// Time-lag MSD curve: (lag fs, MSD Å²).
    pub msd: Vec<(f64, f64)>,
    /// Fit window in lag time, fs.
    pub window: (f64, f64),
    pub dimensionality: usize,
    /// R² of the linear fit on the window.
    pub r_squared: f64,
}

/// Einstein-relation diffusivity: D = slope/(2d) of the multi-time-origin
/// averaged MSD, fit over `window` (fractions of the trajectory span when
/// not given explicitly; defaults to [0.2, 0.8]).
pub fn einstein_diffusivity(
    traj: &Trajectory,
    species_filter: Option<Element>,
    dimensionality: usize,
    window_fs: Option<(f64, f64)>,
) -> Result<DiffusivityReport, MdError> {
    let nf = traj.frames.len();
    if nf < 4 {
        return Err(MdError::TooFewFrames(nf));
    }
    let span = traj.span();
    let (lo, hi) = window_fs.unwrap_or((0.2 * span, 0.8 * span));
    if hi > span || lo >= hi || lo < 0.0 {
        return Err(MdError::WindowExceedsSpan { lo, hi, span });
    }
    let frame_dt = traj.timestep * traj.stride as f64;
    let k_lo = ((lo / frame_dt).ceil() as usize).max(1);
    let k_hi = ((hi / frame_dt).floor() as usize).min(nf - 1);
    if k_lo >= k_hi {
        return Err(MdError::TooFewFrames(nf));
    }

    let atoms: Vec<usize> = traj
        .species
        .iter()
        .enumerate()
        .filter(|(_, e)| species_filter.map(|f| **e == f).unwrap_or(true))
        .map(|(i, _)| i)
        .collect();
    if atoms.is_empty() {
        return Err(MdError::TooFewFrames(0));
    }

    // lag grid, at most 256 points
    let lag_step = ((k_hi - k_lo) / 256).max(1);
    let lags: Vec<usize> = (k_lo..=k_hi).step_by(lag_step).collect();

    let msd_of = |subset: &[usize]| -> Vec<(f64, f64)> {
        lags.iter()
            .map(|&k| {
                let origins = nf - k;
                let origin_step = (origins / 2048).max(1);
                let mut acc = 0.0;
                let mut count = 0usize;
                let mut t0 = 0;
                while t0 < origins {
                    let a = &traj.frames[t0].positions;
                    let b = &traj.frames[t0 + k].positions;
                    for &i in subset {
                        let dx = b[i][0] - a[i][0];
                        let dy = b[i][1] - a[i][1];
                        let dz = b[i][2] - a[i][2];
                        acc += dx * dx + dy * dy + dz * dz;
                    }
                    count += subset.len();
                    t0 += origin_step;
                }
                (k as f64 * frame_dt, acc / count as f64)
            })
            .collect()
    };

    let fit = |curve: &[(f64, f64)]| -> (f64, f64) {
        let n = curve.len() as f64;
        let sx: f64 = curve.iter().map(|(t, _)| t).sum();
        let sy: f64 = curve.iter().map(|(_, m)| m).sum();
        let sxx: f64 = curve.iter().map(|(t, _)| t * t).sum();
        let sxy: f64 = curve.iter().map(|(t, m)| t * m).sum();
        let denom = n * sxx - sx * sx;
        let slope = if denom.abs() < 1e-300 { 0.0 } else { (n * sxy - sx * sy) / denom };
        let intercept = (sy - slope * sx) / n;
        let mean_y = sy / n;
        let ss_tot: f64 = curve.iter().map(|(_, m)| (m - mean_y) * (m - mean_y)).sum();
        let ss_res: f64 = curve
            .iter()
            .map(|(t, m)| {
                let r = m - (slope * t + intercept);
                r * r
            })
            .sum();
        let r2 = if ss_tot < 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
        (slope, r2)
    };

    let msd = msd_of(&atoms);
    let (slope, r_squared) = fit(&msd);
    let overall = (slope / (2.0 * dimensionality as f64) * A2_FS_TO_CM2_S).max(0.0);

    let mut per_species = BTreeMap::new();
    let mut unique: Vec<Element> = traj.species.clone();
    unique.sort();
    unique.dedup();
    for e in unique {
        if species_filter.map(|f| e != f).unwrap_or(false) {
            continue;
        }
        let subset: Vec<usize> = atoms
            .iter()
            .copied()
            .filter(|&i| traj.species[i] == e)
            .collect();
        if subset.is_empty() {
            continue;
        }
        let curve = msd_of(&subset);
        let (s, _) = fit(&curve);
        per_species.insert(e, (s / (2.0 * dimensionality as f64) * A2_FS_TO_CM2_S).max(0.0));
    }

    Ok(DiffusivityReport {
        per_species,
        overall,
        msd,
        window: (k_lo as f64 * frame_dt, k_hi as f64 * frame_dt),
        dimensionality,
        r_squared,
    })
}
