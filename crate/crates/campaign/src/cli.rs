//! Command-line interface: one subcommand per pipeline stage plus the
//! campaign orchestrators.

use crate::dope::{dopant_analysis, dopant_csv};
use crate::ledger::{cost_report, CostLedger, CostModel};
use crate::screen::{diffusivity_csv, oracle_from_config, ranking_csv, screen};
use crate::verify::verify;
use clap::{Args, Parser, Subcommand, ValueEnum};
use matscreen_core::element::Element;
use matscreen_core::fit::{train, train_ensemble, FitHyperParams};
use matscreen_core::io::{
    load_config, read_extxyz, read_poscar, write_extxyz, write_poscar, CampaignConfig,
    LabeledFrame, Provenance,
};
use matscreen_core::md::{einstein_diffusivity, run_nvt, MdOptions};
use matscreen_core::mech::{elastic_tensor, ideal_shear, ElasticMethod, ShearPlane};
use matscreen_core::phonon::{
    dispersion_grid, dos, force_constants, heat_capacity, helmholtz_free_energy,
};
use matscreen_core::potential::{
    load_checkpoint, oracle_potential, save_checkpoint, CheckpointModel, LennardJones, Morse,
    Potential,
};
use matscreen_core::relax::{relax_cell, relax_positions, CellRelaxOptions, RelaxOptions};
use matscreen_core::structure::Structure;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "matscreen",
    about = "Atomistic materials screening: trainable potentials, relaxation, phonons, mechanics, MD, and active-learning campaigns",
    version
)]
pub struct Cli {
    /// Campaign configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for campaign artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Stdout summary format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args)]
pub struct PotentialArg {
    /// Potential spec: "lj[:eps,sigma,cutoff]", "morse[:depth,width,req,cutoff]",
    /// "oracle" (the config's synthetic oracle), or a checkpoint path.
    #[arg(long, default_value = "oracle")]
    pub potential: String,
}

#[derive(Subcommand)]
pub enum Command {
    /// Train a descriptor potential (or ensemble) on labeled frames.
    Fit {
        /// Training frames, extended XYZ.
        #[arg(long)]
        data: PathBuf,
        /// Held-out validation fraction.
        #[arg(long, default_value_t = 0.1)]
        split: f64,
        /// Train an ensemble of this size instead of a single model.
        #[arg(long)]
        ensemble: Option<usize>,
        /// Checkpoint output path.
        #[arg(long)]
        out_model: PathBuf,
        /// Fit report output path (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Relax atomic positions (optionally the cell) of a POSCAR structure.
    Relax {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        potential: PotentialArg,
        /// Relax the cell shape as well.
        #[arg(long)]
        cell: bool,
        #[arg(long, default_value_t = 0.05)]
        ftol: f64,
        /// External pressure, eV/Å³ (cell relaxations).
        #[arg(long, default_value_t = 0.0)]
        pressure: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        /// Write the relaxation trajectory (extended XYZ).
        #[arg(long)]
        traj: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Phonon dispersion, DOS, and harmonic thermodynamics.
    Phonon {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        potential: PotentialArg,
        #[arg(long, value_parser = parse_triple, default_value = "2,2,2")]
        supercell: [usize; 3],
        #[arg(long, value_parser = parse_triple, default_value = "8,8,8")]
        qgrid: [usize; 3],
        #[arg(long, default_value_t = 0.01)]
        amplitude: f64,
        /// Write the grid dispersion table (CSV).
        #[arg(long)]
        bands_out: Option<PathBuf>,
        /// Write the Gaussian-smeared DOS table (CSV).
        #[arg(long)]
        dos_out: Option<PathBuf>,
        /// Write F(T) and C_V(T) over the config temperature grid (CSV).
        #[arg(long)]
        thermo_out: Option<PathBuf>,
    },
    /// Elastic stiffness tensor by finite strains.
    Elastic {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        potential: PotentialArg,
        #[arg(long, default_value_t = 0.005)]
        delta: f64,
        #[arg(long)]
        relax_ions: bool,
        #[arg(long, value_enum, default_value_t = MethodArg::Energy)]
        method: MethodArg,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Ideal shear strength along a shear plane.
    Shear {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        potential: PotentialArg,
        #[arg(long, value_enum, default_value_t = PlaneArg::Xy)]
        plane: PlaneArg,
        #[arg(long, default_value_t = 0.01)]
        dgamma: f64,
        #[arg(long, default_value_t = 0.3)]
        gmax: f64,
        #[arg(long)]
        relax_ions: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Langevin NVT molecular dynamics with Einstein diffusivity.
    Md {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        potential: PotentialArg,
        #[arg(long, default_value_t = 300.0)]
        temp: f64,
        #[arg(long, default_value_t = 1.0)]
        time_ps: f64,
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
        #[arg(long, default_value_t = 0.01)]
        friction: f64,
        #[arg(long, default_value_t = 5)]
        stride: usize,
        /// Write the MSD curve (CSV).
        #[arg(long)]
        msd_out: Option<PathBuf>,
        /// Write the trajectory (extended XYZ).
        #[arg(long)]
        traj: Option<PathBuf>,
    },
    /// Generate random candidate structures from the config composition.
    Generate {
        #[arg(long)]
        count: Option<usize>,
        /// Multi-frame extended XYZ pool output.
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the active-learning loop and save the ensemble checkpoint.
    Al,
    /// Full screening campaign: AL, generate, relax, rank, MD.
    Screen,
    /// Dopant substitution analysis on host structures.
    Dope {
        /// Host structures (POSCAR paths).
        #[arg(long, value_delimiter = ',', required = true)]
        hosts: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        dopants: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        sites: Vec<String>,
        #[command(flatten)]
        potential: PotentialArg,
        /// Include harmonic vibrational free energies (slower).
        #[arg(long)]
        phonons: bool,
    },
    /// Crossover analysis of oracle vs surrogate screening cost.
    Cost {
        /// Ledger JSON from a campaign (measured mode).
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Oracle cost per evaluation (explicit mode).
        #[arg(long)]
        oracle_cost: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        surrogate_cost: f64,
        #[arg(long, default_value_t = 0.0)]
        training_cost: f64,
        /// Training labels consumed by the surrogate path.
        #[arg(long)]
        labels: Option<u64>,
        #[arg(long, default_value_t = 1000)]
        n_max: u64,
    },
    /// Recompute a sample of stored campaign artifacts and compare.
    Verify {
        #[arg(long, default_value_t = 0.1)]
        fraction: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Energy,
    Stress,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlaneArg {
    Xy,
    Yz,
    Zx,
}

fn parse_triple(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("expected three comma-separated integers: {e}"))?;
    if parts.len() != 3 {
        return Err(format!("expected three components, got {}", parts.len()));
    }
    Ok([parts[0], parts[1], parts[2]])
}

pub enum CliError {
    /// Bad arguments or inputs: exit code 1.
    Usage(String),
    /// Failure during computation: exit code 2.
    Runtime(String),
}

type CliResult = Result<(), CliError>;

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn load_campaign_config(cli: &Cli) -> Result<CampaignConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            load_config(&text).map_err(usage)?
        }
        None => CampaignConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.display().to_string();
    }
    if cli.threads > 0 {
        cfg.workers = cli.threads;
    }
    Ok(cfg)
}

fn resolve_potential(
    spec: &str,
    cfg: &CampaignConfig,
    extra_elements: &[Element],
) -> Result<Box<dyn Potential>, CliError> {
    let (kind, args) = spec.split_once(':').unwrap_or((spec, ""));
    let floats = || -> Result<Vec<f64>, CliError> {
        args.split(',')
            .filter(|t| !t.is_empty())
            .map(|t| t.trim().parse::<f64>().map_err(usage))
            .collect()
    };
    match kind {
        "lj" => {
            let v = floats()?;
            let (eps, sigma, cutoff) = match v.len() {
                0 => (1.0, 1.0, 3.0),
                3 => (v[0], v[1], v[2]),
                _ => return Err(usage("lj spec takes eps,sigma,cutoff")),
            };
            Ok(Box::new(LennardJones::new(eps, sigma, cutoff)))
        }
        "morse" => {
            let v = floats()?;
            let (d, w, r, c) = match v.len() {
                0 => (0.8, 1.6, 2.0, 5.0),
                4 => (v[0], v[1], v[2], v[3]),
                _ => return Err(usage("morse spec takes depth,width,req,cutoff")),
            };
            Ok(Box::new(Morse::new(d, w, r, c)))
        }
        "oracle" => {
            let spec = oracle_from_config(cfg, extra_elements).map_err(runtime)?;
            Ok(Box::new(oracle_potential(&spec)))
        }
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read potential {path}: {e}")))?;
            match load_checkpoint(&text).map_err(usage)? {
                CheckpointModel::Descriptor(m) => Ok(Box::new(m)),
                CheckpointModel::Ensemble(e) => Ok(Box::new(e)),
            }
        }
    }
}

fn read_structure(path: &Path) -> Result<Structure, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    read_poscar(&text).map_err(usage)
}

fn out_dir(cfg: &CampaignConfig) -> PathBuf {
    PathBuf::from(&cfg.out_dir)
}

fn emit_summary(cli: &Cli, json: serde_json::Value, csv: String) {
    match cli.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&json).unwrap()),
        Format::Csv => print!("{csv}"),
    }
}

pub fn run(cli: &Cli) -> CliResult {
    let cfg = load_campaign_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(runtime)?;
    pool.install(|| dispatch(cli, &cfg))
}

fn dispatch(cli: &Cli, cfg: &CampaignConfig) -> CliResult {
    match &cli.command {
        Command::Fit { data, split, ensemble, out_model, report } => {
            let text = fs::read_to_string(data)
                .map_err(|e| usage(format!("cannot read {}: {e}", data.display())))?;
            let frames = read_extxyz(&text).map_err(usage)?;
            let hp = FitHyperParams {
                hidden: cfg.fit.hidden,
                epochs: cfg.fit.epochs,
                batch_size: cfg.fit.batch_size,
                learning_rate: cfg.fit.learning_rate,
                momentum: cfg.fit.momentum,
                alpha_energy: cfg.fit.alpha_energy,
                alpha_force: cfg.fit.alpha_force,
                alpha_stress: cfg.fit.alpha_stress,
                ..FitHyperParams::default()
            };
            let (model, reports) = match ensemble {
                Some(k) => {
                    let seeds: Vec<u64> = (0..*k)
                        .map(|m| matscreen_core::fit::derive_seed(cfg.seed, 100 + m as u64))
                        .collect();
                    let (e, reps) = train_ensemble(&frames, *split, &hp, &seeds).map_err(runtime)?;
                    (CheckpointModel::Ensemble(e), reps)
                }
                None => {
                    let (m, rep) = train(&frames, *split, &hp, cfg.seed).map_err(runtime)?;
                    (CheckpointModel::Descriptor(m), vec![rep])
                }
            };
            fs::write(out_model, save_checkpoint(&model)).map_err(runtime)?;
            if let Some(path) = report {
                fs::write(path, serde_json::to_string_pretty(&reports).unwrap())
                    .map_err(runtime)?;
            }
            let summary = serde_json::json!({
                "frames": frames.len(),
                "members": reports.len(),
                "validation_energy_mae": reports.iter().map(|r| r.validation.energy_mae).collect::<Vec<_>>(),
                "checkpoint": out_model.display().to_string(),
            });
            let csv = format!(
                "member,val_energy_mae,val_force_mae\n{}",
                reports
                    .iter()
                    .enumerate()
                    .map(|(i, r)| format!("{i},{},{}\n", r.validation.energy_mae, r.validation.force_mae))
                    .collect::<String>()
            );
            emit_summary(cli, summary, csv);
            Ok(())
        }
        Command::Relax { input, potential, cell, ftol, pressure, max_iter, traj, output } => {
            let s = read_structure(input)?;
            let p = resolve_potential(&potential.potential, cfg, s.species())?;
            let record = traj.is_some();
            let result = if *cell {
                relax_cell(&s, &p, &CellRelaxOptions {
                    f_tol: *ftol,
                    pressure: *pressure,
                    max_iter: *max_iter,
                    record_trajectory: record,
                    ..CellRelaxOptions::default()
                })
                .map_err(runtime)?
            } else {
                relax_positions(&s, &p, &RelaxOptions {
                    f_tol: *ftol,
                    max_iter: *max_iter,
                    record_trajectory: record,
                })
                .map_err(runtime)?
            };
            fs::write(output, write_poscar(&result.structure)).map_err(runtime)?;
            if let Some(path) = traj {
                fs::write(path, write_extxyz(&result.trajectory)).map_err(runtime)?;
            }
            emit_summary(
                cli,
                serde_json::json!({
                    "converged": result.converged,
                    "iterations": result.iterations,
                    "energy": result.eval.energy,
                    "max_force": result.max_force,
                    "output": output.display().to_string(),
                }),
                format!(
                    "converged,iterations,energy,max_force\n{},{},{},{}\n",
                    result.converged, result.iterations, result.eval.energy, result.max_force
                ),
            );
            Ok(())
        }
        Command::Phonon { input, potential, supercell, qgrid, amplitude, bands_out, dos_out, thermo_out } => {
            let s = read_structure(input)?;
            let p = resolve_potential(&potential.potential, cfg, s.species())?;
            let fc = force_constants(&s, &p, *supercell, *amplitude).map_err(runtime)?;
            let ph = dispersion_grid(&fc, *qgrid, false);
            if let Some(path) = bands_out {
                let mut text = String::from("q1,q2,q3,frequencies_thz
");
                for (q, nus) in ph.qpoints.iter().zip(&ph.frequencies) {
                    let row: Vec<String> = nus.iter().map(|v| v.to_string()).collect();
                    text.push_str(&format!("{},{},{},{}
", q[0], q[1], q[2], row.join(";")));
                }
                fs::write(path, text).map_err(runtime)?;
            }
            if let Some(path) = dos_out {
                let table = dos(&ph, None, 401);
                let mut text = String::from("frequency_thz,dos_per_thz\n");
                for (w, d) in table.omega.iter().zip(&table.density) {
                    text.push_str(&format!("{w},{d}\n"));
                }
                fs::write(path, text).map_err(runtime)?;
            }
            if let Some(path) = thermo_out {
                let mut text = String::from("temperature_k,f_ev,cv_ev_per_k\n");
                for t in cfg.temperatures() {
                    let f = helmholtz_free_energy(&ph, t).map_err(runtime)?;
                    let cv = heat_capacity(&ph, t).map_err(runtime)?;
                    text.push_str(&format!("{t},{f},{cv}\n"));
                }
                fs::write(path, text).map_err(runtime)?;
            }
            emit_summary(
                cli,
                serde_json::json!({
                    "qpoints": ph.n_qpoints(),
                    "branches": ph.n_branches(),
                    "min_frequency_thz": ph.min_frequency(),
                    "imaginary": ph.has_imaginary(),
                    "residual_force": fc.residual_force,
                }),
                format!(
                    "qpoints,branches,min_frequency_thz,imaginary\n{},{},{},{}\n",
                    ph.n_qpoints(),
                    ph.n_branches(),
                    ph.min_frequency(),
                    ph.has_imaginary()
                ),
            );
            Ok(())
        }
        Command::Elastic { input, potential, delta, relax_ions, method, output } => {
            let s = read_structure(input)?;
            let p = resolve_potential(&potential.potential, cfg, s.species())?;
            let method = match method {
                MethodArg::Energy => ElasticMethod::EnergyBased,
                MethodArg::Stress => ElasticMethod::StressBased,
            };
            let c = elastic_tensor(&s, &p, *delta, *relax_ions, method).map_err(runtime)?;
            if let Some(path) = output {
                fs::write(path, serde_json::to_string_pretty(&c).unwrap()).map_err(runtime)?;
            }
            let gpa = c.gpa();
            let mut csv = String::from("row,c1,c2,c3,c4,c5,c6 (GPa)\n");
            for (i, row) in gpa.iter().enumerate() {
                csv.push_str(&format!(
                    "{},{}\n",
                    i + 1,
                    row.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(",")
                ));
            }
            emit_summary(
                cli,
                serde_json::json!({
                    "bulk_modulus_gpa": c.bulk_modulus() * matscreen_core::consts::EV_A3_TO_GPA,
                    "shear_modulus_gpa": c.shear_modulus() * matscreen_core::consts::EV_A3_TO_GPA,
                    "positive_definite": c.is_positive_definite(),
                    "asymmetry": c.asymmetry(),
                    "c_gpa": gpa,
                }),
                csv,
            );
            Ok(())
        }
        Command::Shear { input, potential, plane, dgamma, gmax, relax_ions, output } => {
            let s = read_structure(input)?;
            let p = resolve_potential(&potential.potential, cfg, s.species())?;
            let plane = match plane {
                PlaneArg::Xy => ShearPlane::Xy,
                PlaneArg::Yz => ShearPlane::Yz,
                PlaneArg::Zx => ShearPlane::Zx,
            };
            let curve = ideal_shear(&s, &p, plane, *dgamma, *gmax, *relax_ions).map_err(runtime)?;
            if let Some(path) = output {
                fs::write(path, serde_json::to_string_pretty(&curve).unwrap()).map_err(runtime)?;
            }
            let mut csv = String::from("gamma,energy_ev,tau_ev_a3\n");
            for ((g, e), t) in curve.gamma.iter().zip(&curve.energy).zip(&curve.stress) {
                csv.push_str(&format!("{g},{e},{t}\n"));
            }
            emit_summary(
                cli,
                serde_json::json!({
                    "tau_max": curve.tau_max,
                    "gamma_at_max": curve.gamma_at_max,
                    "reached_instability": curve.reached_instability,
                }),
                csv,
            );
            Ok(())
        }
        Command::Md { input, potential, temp, time_ps, dt, friction, stride, msd_out, traj } => {
            let s = read_structure(input)?;
            let p = resolve_potential(&potential.potential, cfg, s.species())?;
            let steps = (time_ps * 1000.0 / dt).round() as usize;
            let trajectory = run_nvt(&s, &p, &MdOptions {
                temperature: *temp,
                timestep: *dt,
                steps,
                friction: *friction,
                seed: cfg.seed,
                stride: *stride,
                zero_momentum: true,
            })
            .map_err(runtime)?;
            let report = einstein_diffusivity(&trajectory, None, 3, None).map_err(runtime)?;
            if let Some(path) = msd_out {
                let mut text = String::from("lag_fs,msd_a2\n");
                for (t, m) in &report.msd {
                    text.push_str(&format!("{t},{m}\n"));
                }
                fs::write(path, text).map_err(runtime)?;
            }
            if let Some(path) = traj {
                let frames: Vec<LabeledFrame> = trajectory
                    .frames
                    .iter()
                    .map(|f| {
                        let s2 = s.with_cart_coords(&f.positions).expect("frame count");
                        LabeledFrame::new(
                            s2,
                            f.potential_energy,
                            vec![[0.0; 3]; s.n_atoms()],
                            [[0.0; 3]; 3],
                            Provenance::Predicted,
                        )
                        .expect("frame shape")
                    })
                    .collect();
                fs::write(path, write_extxyz(&frames)).map_err(runtime)?;
            }
            emit_summary(
                cli,
                serde_json::json!({
                    "steps": steps,
                    "overall_diffusivity_cm2_s": report.overall,
                    "per_species": report.per_species,
                    "fit_r_squared": report.r_squared,
                }),
                format!(
                    "overall_cm2_s,r_squared\n{},{}\n",
                    report.overall, report.r_squared
                ),
            );
            Ok(())
        }
        Command::Generate { count, output } => {
            let gen = crate::screen::generator_from_config(cfg, cfg.seed).map_err(usage)?;
            let n = count.unwrap_or(cfg.screen.count);
            let (structures, telemetry) =
                matscreen_core::explore::generate_candidates(&gen, n).map_err(runtime)?;
            let frames: Vec<LabeledFrame> = structures
                .iter()
                .map(|s| {
                    LabeledFrame::new(
                        s.clone(),
                        0.0,
                        vec![[0.0; 3]; s.n_atoms()],
                        [[0.0; 3]; 3],
                        Provenance::External,
                    )
                    .expect("generated shapes are valid")
                })
                .collect();
            fs::write(output, write_extxyz(&frames)).map_err(runtime)?;
            emit_summary(
                cli,
                serde_json::json!({
                    "generated": structures.len(),
                    "attempts": telemetry.attempts,
                    "acceptance_rate": telemetry.acceptance_rate,
                    "output": output.display().to_string(),
                }),
                format!(
                    "generated,attempts,acceptance_rate\n{},{},{}\n",
                    structures.len(),
                    telemetry.attempts,
                    telemetry.acceptance_rate
                ),
            );
            Ok(())
        }
        Command::Al => {
            let dir = out_dir(cfg);
            fs::create_dir_all(&dir).map_err(runtime)?;
            let oracle =
                oracle_potential(&oracle_from_config(cfg, &[]).map_err(usage)?);
            let gen = crate::screen::generator_from_config(cfg, cfg.seed).map_err(usage)?;
            let opts = crate::screen::al_options_from_config(cfg);
            let outcome = matscreen_core::active::run_al_loop(&gen, &oracle, &opts)
                .map_err(runtime)?;
            let mut cycles = String::new();
            for r in &outcome.records {
                cycles.push_str(&serde_json::to_string(r).unwrap());
                cycles.push('\n');
            }
            fs::write(dir.join("cycles.jsonl"), cycles).map_err(runtime)?;
            fs::write(
                dir.join("ensemble.json"),
                save_checkpoint(&CheckpointModel::Ensemble(outcome.ensemble)),
            )
            .map_err(runtime)?;
            fs::write(dir.join("training.extxyz"), write_extxyz(&outcome.training_set))
                .map_err(runtime)?;
            let last = outcome.records.last();
            emit_summary(
                cli,
                serde_json::json!({
                    "cycles": outcome.records.len(),
                    "terminated": last.map(|r| r.terminated).unwrap_or(false),
                    "pass_fraction": last.map(|r| r.pass_fraction),
                    "training_set": outcome.training_set.len(),
                    "oracle_calls": outcome.oracle_calls,
                    "out_dir": dir.display().to_string(),
                }),
                format!(
                    "cycles,terminated,training_set,oracle_calls\n{},{},{},{}\n",
                    outcome.records.len(),
                    last.map(|r| r.terminated).unwrap_or(false),
                    outcome.training_set.len(),
                    outcome.oracle_calls
                ),
            );
            Ok(())
        }
        Command::Screen => {
            let dir = out_dir(cfg);
            let outcome = screen(cfg, &dir).map_err(runtime)?;
            emit_summary(
                cli,
                serde_json::json!({
                    "ranked": outcome.report.ranking.len(),
                    "diffusivity_rows": outcome.report.diffusivity.len(),
                    "failed": outcome.report.failed.len(),
                    "al_cycles": outcome.report.al_history.len(),
                    "report": dir.join("report.json").display().to_string(),
                }),
                ranking_csv(&outcome.report) + "\n" + &diffusivity_csv(&outcome.report),
            );
            Ok(())
        }
        Command::Dope { hosts, dopants, sites, potential, phonons } => {
            let dir = out_dir(cfg);
            fs::create_dir_all(&dir).map_err(runtime)?;
            let parse_elements = |items: &[String]| -> Result<Vec<Element>, CliError> {
                items
                    .iter()
                    .map(|s| Element::from_str(s).map_err(usage))
                    .collect()
            };
            let dopant_els = parse_elements(dopants)?;
            let site_els = parse_elements(sites)?;
            let mut host_structs = Vec::new();
            for path in hosts {
                let s = read_structure(path)?;
                let id = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().to_string())
                    .unwrap_or_else(|| "host".to_string());
                host_structs.push((id, s));
            }
            let p = resolve_potential(&potential.potential, cfg, &dopant_els)?;
            let report =
                dopant_analysis(cfg, &host_structs, &dopant_els, &site_els, &p, *phonons)
                    .map_err(runtime)?;
            fs::write(
                dir.join("dopant_report.json"),
                serde_json::to_string_pretty(&report).unwrap(),
            )
            .map_err(runtime)?;
            fs::write(dir.join("dopant_heatmap.csv"), dopant_csv(&report)).map_err(runtime)?;
            emit_summary(
                cli,
                serde_json::to_value(&report).unwrap(),
                dopant_csv(&report),
            );
            Ok(())
        }
        Command::Cost { ledger, oracle_cost, surrogate_cost, training_cost, labels, n_max } => {
            let model = if let Some(oc) = oracle_cost {
                CostModel {
                    oracle_unit: *oc,
                    surrogate_unit: *surrogate_cost,
                    training_cost: *training_cost,
                    labels: labels.unwrap_or(0),
                }
            } else if let Some(path) = ledger {
                let text = fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read ledger: {e}")))?;
                let led: CostLedger = serde_json::from_str(&text).map_err(usage)?;
                let oracle_unit = led
                    .oracle_unit_cost()
                    .ok_or_else(|| usage("ledger has no oracle evaluations"))?;
                let surrogate_unit = led.surrogate_unit_cost().unwrap_or(0.0);
                CostModel {
                    oracle_unit,
                    surrogate_unit,
                    training_cost: led.training_wall_s,
                    labels: labels.unwrap_or(led.oracle_evaluations),
                }
            } else {
                return Err(usage("provide either --ledger or --oracle-cost"));
            };
            let report = cost_report(&model, *n_max).map_err(usage)?;
            let mut csv = String::from("n,oracle_cost,surrogate_cost\n");
            for (n, a, b) in &report.curves {
                csv.push_str(&format!("{n},{a},{b}\n"));
            }
            emit_summary(cli, serde_json::to_value(&report).unwrap(), csv);
            Ok(())
        }
        Command::Verify { fraction } => {
            let dir = out_dir(cfg);
            let report = verify(cfg, &dir, *fraction).map_err(runtime)?;
            emit_summary(
                cli,
                serde_json::to_value(&report).unwrap(),
                format!(
                    "sampled,verified,mismatches\n{},{},{}\n",
                    report.sampled,
                    report.verified,
                    report.mismatches.len()
                ),
            );
            if report.ok() {
                Ok(())
            } else {
                Err(runtime(format!(
                    "verification failed:\n{}",
                    report.mismatches.join("\n")
                )))
            }
        }
    }
}
