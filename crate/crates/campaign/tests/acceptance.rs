//! Acceptance suite: every release-gating behavior checked at its stated
//! tolerance, one test per criterion, each printing a PASS line.

use matscreen_core::active::{run_al_loop, ALOptions};
use matscreen_core::consts::{EV_PER_THZ, KB, MASS_VEL2_TO_EV, SQRT_EV_A2_AMU_TO_THZ};
use matscreen_core::element::Element;
use matscreen_core::explore::GeneratorSpec;
use matscreen_core::fdcheck::force_fd_error;
use matscreen_core::fit::{train, FitHyperParams};
use matscreen_core::io::{
    read_extxyz, read_poscar, write_extxyz, write_poscar, LabeledFrame, Provenance,
};
use matscreen_core::md::{
    classify_mobility, einstein_diffusivity, run_nvt, MdOptions, Mobility, MOBILITY_THRESHOLD,
};
use matscreen_core::mech::{elastic_tensor, ideal_shear, ElasticMethod, ShearPlane};
use matscreen_core::phonon::{
    dispersion_grid, dos, force_constants, frequencies_at, gibbs_qha, heat_capacity,
    helmholtz_free_energy, QhaPoint,
};
use matscreen_core::potential::{
    oracle_potential, EvalResult, HarmonicSpring, LennardJones, OracleSpec, Potential,
    PotentialError,
};
use matscreen_core::relax::{relax_cell, relax_positions, CellRelaxOptions, RelaxOptions};
use matscreen_core::structure::{Lattice, Structure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn el(s: &str) -> Element {
    Element::from_symbol(s).unwrap()
}

fn random_cells(pool: &[Element], seed: u64, count: usize, dmin: f64) -> Vec<Structure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let a = rng.gen_range(4.5..6.5);
        let n = rng.gen_range(2..=4);
        let species: Vec<Element> = (0..n)
            .map(|_| pool[rng.gen_range(0..pool.len())])
            .collect();
        let frac: Vec<[f64; 3]> = (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let s = Structure::new(species, frac, Lattice::cubic(a).unwrap()).unwrap();
        if (0..n).all(|i| (i + 1..n).all(|j| s.min_image_distance(i, j).unwrap() > dmin)) {
            out.push(s);
        }
    }
    out
}

/// Criterion 1: analytic forces match central finite differences for the
/// Lennard-Jones model, the synthetic oracle, and a trained descriptor
/// potential, on 20 random structures each.
#[test]
fn acceptance_1_force_consistency() {
    let lj = LennardJones::new(1.0, 1.0, 3.0);
    let lj_cells = random_cells(&[el("Ar")], 100, 20, 1.1);
    let mut worst_lj = 0.0_f64;
    for s in &lj_cells {
        worst_lj = worst_lj.max(force_fd_error(&lj, s, 1e-4).unwrap());
    }
    assert!(worst_lj < 1e-5, "LJ force FD error {worst_lj}");

    let oracle = oracle_potential(&OracleSpec::new(7, vec![el("Si"), el("O")]));
    let oracle_cells = random_cells(&[el("Si"), el("O")], 101, 20, 1.8);
    let mut worst_oracle = 0.0_f64;
    for s in &oracle_cells {
        worst_oracle = worst_oracle.max(force_fd_error(&oracle, s, 1e-4).unwrap());
    }
    assert!(worst_oracle < 1e-5, "oracle force FD error {worst_oracle}");

    let frames: Vec<LabeledFrame> = random_cells(&[el("Si"), el("O")], 102, 30, 1.8)
        .iter()
        .map(|s| {
            LabeledFrame::from_evaluation(s.clone(), &oracle.evaluate(s).unwrap(), Provenance::Oracle)
        })
        .collect();
    let hp = FitHyperParams { epochs: 200, restarts: 1, ..FitHyperParams::default() };
    let (trained, _) = train(&frames, 0.2, &hp, 9).unwrap();
    let mut worst_trained = 0.0_f64;
    for s in &oracle_cells {
        worst_trained = worst_trained.max(force_fd_error(&trained, s, 1e-4).unwrap());
    }
    assert!(worst_trained < 1e-3, "trained force FD error {worst_trained}");
    println!(
        "ACCEPTANCE 1 PASS: force FD errors LJ {worst_lj:.2e} / oracle {worst_oracle:.2e} / trained {worst_trained:.2e} eV/Å"
    );
}

/// Criterion 2: the LJ dimer relaxes from 1.3σ to the analytic minimum,
/// and every converged relaxation satisfies the 0.05 eV/Å criterion.
#[test]
fn acceptance_2_relaxation() {
    let lj = LennardJones::new(1.0, 1.0, 3.0);
    let start = Structure::new(
        vec![el("Ar"), el("Ar")],
        vec![[0.1, 0.1, 0.1], [0.1 + 1.3 / 20.0, 0.1, 0.1]],
        Lattice::cubic(20.0).unwrap(),
    )
    .unwrap();
    let out = relax_positions(&start, &lj, &RelaxOptions { f_tol: 1e-6, ..Default::default() })
        .unwrap();
    assert!(out.converged);
    let r = out.structure.min_image_distance(0, 1).unwrap();
    let r_star = 2.0_f64.powf(1.0 / 6.0);
    assert!((r - r_star).abs() < 1e-4, "dimer bond {r} vs {r_star}");
    assert!((out.eval.energy + 1.0).abs() < 1e-8, "dimer energy {}", out.eval.energy);

    for (i, s) in random_cells(&[el("Ar")], 104, 5, 0.95).iter().enumerate() {
        let res = relax_positions(s, &lj, &RelaxOptions::default()).unwrap();
        if res.converged {
            assert!(
                res.max_force < 0.05,
                "converged run {i} ended above the force criterion: {}",
                res.max_force
            );
        }
    }
    println!("ACCEPTANCE 2 PASS: dimer to analytic minimum, converged runs below 0.05 eV/Å");
}

/// Criterion 3: chain dispersion vs the analytic law, Γ acoustic zeros,
/// DOS normalization, the Dulong-Petit limit, and C_V = −T ∂²F/∂T².
#[test]
fn acceptance_3_phonons() {
    let a = 2.0;
    let k = 2.0;
    let chain = Structure::new(
        vec![el("Ar")],
        vec![[0.0; 3]],
        Lattice::new([[a, 0.0, 0.0], [0.0, 12.0, 0.0], [0.0, 0.0, 12.0]]).unwrap(),
    )
    .unwrap();
    let spring = HarmonicSpring { k, r_eq: a, cutoff: 3.0 };
    let fc = force_constants(&chain, &spring, [8, 1, 1], 0.01).unwrap();
    let m = el("Ar").mass();
    let mut worst = 0.0_f64;
    for i in 1..16 {
        let t = i as f64 / 16.0;
        let nu = frequencies_at(&fc, [t, 0.0, 0.0])[2];
        let analytic =
            2.0 * (k / m).sqrt() * (std::f64::consts::PI * t).sin().abs() * SQRT_EV_A2_AMU_TO_THZ;
        worst = worst.max(((nu - analytic) / analytic).abs());
    }
    assert!(worst < 1e-6, "chain dispersion rel error {worst}");
    for nu in frequencies_at(&fc, [0.0; 3]) {
        assert!(nu.abs() < 1e-3, "Γ acoustic mode at {nu} THz");
    }
    let ph = dispersion_grid(&fc, [16, 1, 1], false);
    let table = dos(&ph, None, 600);
    let integral = table.integral();
    assert!(((integral - 3.0) / 3.0).abs() < 1e-6, "DOS integral {integral}");

    // Dulong-Petit on the relaxed LJ FCC primitive cell, 8x8x8 grid
    let lj = LennardJones::new(1.0, 1.0, 2.5);
    let h = 1.55 / 2.0;
    let prim = relax_cell(
        &Structure::new(
            vec![el("Ar")],
            vec![[0.0; 3]],
            Lattice::new([[0.0, h, h], [h, 0.0, h], [h, h, 0.0]]).unwrap(),
        )
        .unwrap(),
        &lj,
        &CellRelaxOptions { stress_tol: 1e-6, f_tol: 1e-7, ..Default::default() },
    )
    .unwrap()
    .structure;
    let fcc_fc = force_constants(&prim, &lj, [3, 3, 3], 0.01).unwrap();
    let fcc_ph = dispersion_grid(&fcc_fc, [8, 8, 8], false);
    let nu_max = fcc_ph.frequencies.iter().flatten().cloned().fold(0.0, f64::max);
    let t_high = nu_max * EV_PER_THZ / (KB * 0.049);
    let cv = heat_capacity(&fcc_ph, t_high).unwrap();
    let dp = 3.0 * KB;
    assert!(
        ((cv - dp) / dp).abs() < 5e-3,
        "Dulong-Petit: C_V {cv} vs 3kB {dp} at {t_high:.0} K"
    );

    let t = 300.0;
    let dt = 1.0;
    let f = |tt: f64| helmholtz_free_energy(&fcc_ph, tt).unwrap();
    let cv_fd = -t * (f(t + dt) - 2.0 * f(t) + f(t - dt)) / (dt * dt);
    let cv300 = heat_capacity(&fcc_ph, t).unwrap();
    assert!(
        ((cv300 - cv_fd) / cv_fd).abs() < 1e-3,
        "thermodynamic consistency: {cv300} vs {cv_fd}"
    );
    println!(
        "ACCEPTANCE 3 PASS: dispersion {worst:.1e}, DOS {integral:.8}, Dulong-Petit {:.3}%",
        100.0 * ((cv - dp) / dp).abs()
    );
}

/// Criterion 4: the analytic QHA parabola with pressure, and positive
/// thermal expansion for LJ FCC on [100, 800] K.
#[test]
fn acceptance_4_qha() {
    let empty = |v: f64| matscreen_core::phonon::PhononResult {
        qpoints: vec![[0.0; 3]],
        frequencies: vec![vec![]],
        group_velocities: None,
        n_atoms: 1,
        primitive_volume: v,
    };
    let v0 = 10.0;
    let p = 0.8;
    let points: Vec<QhaPoint> = (0..9)
        .map(|i| {
            let v = 8.0 + 0.5 * i as f64;
            QhaPoint { volume: v, e_ref: (v - v0) * (v - v0), phonons: empty(v) }
        })
        .collect();
    let (_, vstar) = gibbs_qha(&points, 300.0, p).unwrap();
    assert!((vstar - (v0 - p / 2.0)).abs() < 1e-6, "parabola V* = {vstar}");

    let lj = LennardJones::new(1.0, 1.0, 2.5);
    let h = 1.55 / 2.0;
    let prim = relax_cell(
        &Structure::new(
            vec![el("Ar")],
            vec![[0.0; 3]],
            Lattice::new([[0.0, h, h], [h, 0.0, h], [h, h, 0.0]]).unwrap(),
        )
        .unwrap(),
        &lj,
        &CellRelaxOptions { stress_tol: 1e-6, f_tol: 1e-7, ..Default::default() },
    )
    .unwrap()
    .structure;
    let scan: Vec<QhaPoint> = (0..7)
        .map(|i| {
            let scale = 0.985 + 0.01 * i as f64;
            let scaled = prim.with_lattice(
                Lattice::new(prim.lattice().rows().map(|r| r.map(|x| x * scale))).unwrap(),
            );
            let e_ref = lj.evaluate(&scaled).unwrap().energy;
            let fc = force_constants(&scaled, &lj, [3, 3, 3], 0.01).unwrap();
            QhaPoint {
                volume: scaled.volume(),
                e_ref,
                phonons: dispersion_grid(&fc, [6, 6, 6], false),
            }
        })
        .collect();
    let mut prev = 0.0;
    for (i, t) in [100.0, 300.0, 500.0, 800.0].iter().enumerate() {
        let (_, v) = gibbs_qha(&scan, *t, 0.0).unwrap();
        if i > 0 {
            assert!(v > prev, "thermal expansion not monotone at {t} K");
        }
        prev = v;
    }
    println!("ACCEPTANCE 4 PASS: QHA parabola exact, dV*/dT > 0 on [100, 800] K");
}

/// Criterion 5: energy-based and stress-based elastic tensors agree within
/// 2%, cubic symmetry within 1%, and the shear-curve slope matches C44
/// within 5%.
#[test]
fn acceptance_5_elasticity() {
    let lj = LennardJones::new(1.0, 1.0, 2.5);
    let start = Structure::new(
        vec![el("Ar"); 4],
        vec![
            [0.0, 0.0, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
            [0.5, 0.5, 0.0],
        ],
        Lattice::cubic(1.55).unwrap(),
    )
    .unwrap();
    let fcc = relax_cell(&start, &lj, &CellRelaxOptions {
        stress_tol: 1e-6,
        f_tol: 1e-7,
        ..Default::default()
    })
    .unwrap()
    .structure;
    let energy = elastic_tensor(&fcc, &lj, 0.005, false, ElasticMethod::EnergyBased).unwrap();
    let stress = elastic_tensor(&fcc, &lj, 0.005, false, ElasticMethod::StressBased).unwrap();
    let c11 = energy.c[0][0];
    let mut worst_pair = 0.0_f64;
    for i in 0..6 {
        for j in 0..6 {
            let denom = energy.c[i][j].abs().max(0.02 * c11);
            worst_pair = worst_pair.max(((energy.c[i][j] - stress.c[i][j]) / denom).abs());
        }
    }
    assert!(worst_pair < 0.02, "dual-route disagreement {worst_pair}");
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        assert!(((energy.c[a][a] - energy.c[b][b]) / c11).abs() < 0.01);
    }
    for (a, b) in [(3, 4), (3, 5), (4, 5)] {
        assert!(((energy.c[a][a] - energy.c[b][b]) / c11).abs() < 0.01);
    }
    let curve = ideal_shear(&fcc, &lj, ShearPlane::Xy, 0.01, 0.06, false).unwrap();
    let slope = curve.stress[1] / curve.gamma[1];
    let rel = ((slope - energy.c[3][3]) / energy.c[3][3]).abs();
    assert!(rel < 0.05, "shear slope off C44 by {}%", 100.0 * rel);
    println!(
        "ACCEPTANCE 5 PASS: dual-route {:.2}%, shear slope {:.2}% off C44",
        100.0 * worst_pair,
        100.0 * rel
    );
}

struct ZeroPotential;

impl Potential for ZeroPotential {
    fn evaluate(&self, s: &Structure) -> Result<EvalResult, PotentialError> {
        Ok(EvalResult::zero(s.n_atoms()))
    }
}

/// Criterion 6: single-particle Langevin diffusivity against kT/(mγ)
/// within 15%, frozen systems at exactly zero, and the 1e-7 cm²/s mobility
/// boundary applied exactly.
#[test]
fn acceptance_6_diffusivity() {
    let s = Structure::new(vec![el("Ar")], vec![[0.5; 3]], Lattice::cubic(10.0).unwrap())
        .unwrap();
    let gamma = 0.01;
    let temp = 300.0;
    let traj = run_nvt(&s, &ZeroPotential, &MdOptions {
        temperature: temp,
        friction: gamma,
        timestep: 1.0,
        steps: 1_000_000,
        stride: 10,
        seed: 40,
        zero_momentum: false,
        ..MdOptions::default()
    })
    .unwrap();
    let span = traj.span();
    let report =
        einstein_diffusivity(&traj, None, 3, Some((0.01 * span, 0.10 * span))).unwrap();
    let expected = KB * temp / (el("Ar").mass() * gamma * MASS_VEL2_TO_EV) * 0.1;
    let rel = ((report.overall - expected) / expected).abs();
    assert!(rel < 0.15, "Langevin D off by {}%", 100.0 * rel);

    let frozen = run_nvt(&s, &ZeroPotential, &MdOptions {
        temperature: 0.0,
        friction: 0.0,
        steps: 2000,
        stride: 10,
        seed: 1,
        ..MdOptions::default()
    })
    .unwrap();
    let d0 = einstein_diffusivity(&frozen, None, 3, None).unwrap().overall;
    assert_eq!(d0, 0.0, "frozen system must have D = 0");

    assert_eq!(classify_mobility(5e-8, MOBILITY_THRESHOLD), Mobility::Inert);
    assert_eq!(classify_mobility(1e-6, MOBILITY_THRESHOLD), Mobility::Mobile);
    assert_eq!(classify_mobility(1e-7, MOBILITY_THRESHOLD), Mobility::Mobile);
    println!(
        "ACCEPTANCE 6 PASS: Langevin D within {:.1}%, frozen D = 0, boundary exact",
        100.0 * rel
    );
}

/// Criterion 7: the active-learning loop with the reference thresholds
/// (0.040 eV/atom, 1.0 eV/Å, 90%, ≤15 cycles) terminates, improves the
/// validation MAE over cycle 1, and ends at pass fraction ≥ 0.90.
#[test]
fn acceptance_7_active_learning() {
    let oracle = oracle_potential(&OracleSpec::new(7, vec![el("Si"), el("O")]));
    let mut gen = GeneratorSpec::new(vec![(el("Si"), 2), (el("O"), 4)], 0);
    gen.volume_per_atom = (10.0, 19.0);
    gen.min_dist_scale = 0.8;
    let opts = ALOptions {
        per_cycle: 30,
        initial_labeled: 10,
        validation_count: 100,
        ensemble_size: 4,
        fit: FitHyperParams { epochs: 400, restarts: 2, ..FitHyperParams::default() },
        relax_max_iter: 50,
        seed: 2,
        ..ALOptions::default()
    };
    assert_eq!(opts.thresholds.energy_std_max, 0.040);
    assert_eq!(opts.thresholds.force_std_max, 1.0);
    assert_eq!(opts.thresholds.pass_fraction_min, 0.90);
    assert_eq!(opts.thresholds.max_cycles, 15);
    let out = run_al_loop(&gen, &oracle, &opts).unwrap();
    let last = out.records.last().unwrap();
    assert!(last.terminated, "loop must terminate inside 15 cycles");
    assert!(last.pass_fraction >= 0.90, "pass fraction {}", last.pass_fraction);
    let first = out.records[0].val_energy_mae_before;
    assert!(
        last.val_energy_mae_after < first,
        "final MAE {} vs cycle-1 MAE {first}",
        last.val_energy_mae_after
    );
    println!(
        "ACCEPTANCE 7 PASS: {} cycles, pass {:.3}, MAE {:.4} -> {:.4} eV/atom",
        out.records.len(),
        last.pass_fraction,
        first,
        last.val_energy_mae_after
    );
}

/// Criterion 8: a 60-candidate screen is byte-identical across two runs
/// with the same seed, and both parsers survive 1000 random round trips.
#[test]
fn acceptance_8_campaign_determinism_and_parsers() {
    let cfg = matscreen_core::io::load_config(
        r#"
seed = 11

[composition]
elements = { Si = 2, O = 4 }

[generator]
volume_per_atom = [10.0, 19.0]
min_dist_scale = 0.8

[active]
initial_labeled = 10
per_cycle = 30
validation_count = 40

[fit]
epochs = 300

[temperature]
grid = "0..2000 step 100"

[references]
Si = -4.0
O = -3.0

[screen]
count = 60
top_gibbs = 12
top_md = 5
relax_max_iter = 60
qgrid = [3, 3, 3]
supercell = [2, 2, 2]

[md]
time_ps = 1.0
"#,
    )
    .unwrap();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    matscreen::screen::screen(&cfg, dir_a.path()).unwrap();
    matscreen::screen::screen(&cfg, dir_b.path()).unwrap();
    let a = std::fs::read_to_string(dir_a.path().join("report.json")).unwrap();
    let b = std::fs::read_to_string(dir_b.path().join("report.json")).unwrap();
    assert_eq!(a, b, "screen reports must be byte-identical");

    // 1000 random round trips per format
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let palette = [el("H"), el("O"), el("Si"), el("Ca"), el("Mg")];
    for case in 0..1000 {
        let n = rng.gen_range(1..=6);
        let lattice = Lattice::new([
            [rng.gen_range(3.0..8.0), 0.0, 0.0],
            [rng.gen_range(-0.8..0.8), rng.gen_range(3.0..8.0), 0.0],
            [rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8), rng.gen_range(3.0..8.0)],
        ])
        .unwrap();
        let species: Vec<Element> =
            (0..n).map(|_| palette[rng.gen_range(0..palette.len())]).collect();
        let frac: Vec<[f64; 3]> = (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let s = Structure::new(species, frac, lattice).unwrap();

        let back = read_poscar(&write_poscar(&s)).unwrap();
        assert_eq!(back.species(), s.species(), "POSCAR species at case {case}");
        for (x, y) in back.frac_coords().iter().zip(s.frac_coords()) {
            for k in 0..3 {
                assert!((x[k] - y[k]).abs() < 1e-12, "POSCAR coords at case {case}");
            }
        }
        for (ra, rb) in back.lattice().rows().iter().zip(s.lattice().rows()) {
            for k in 0..3 {
                assert!((ra[k] - rb[k]).abs() < 1e-12, "POSCAR lattice at case {case}");
            }
        }

        let frame = LabeledFrame::new(
            s.clone(),
            rng.gen_range(-20.0..20.0),
            (0..n).map(|_| [rng.gen_range(-3.0..3.0); 3]).collect(),
            [[rng.gen_range(-0.1..0.1); 3]; 3],
            Provenance::Oracle,
        )
        .unwrap();
        let text = write_extxyz(std::slice::from_ref(&frame));
        let frames = read_extxyz(&text).unwrap();
        assert_eq!(frames.len(), 1);
        assert!((frames[0].energy - frame.energy).abs() < 1e-12);
        for (x, y) in frames[0]
            .structure
            .frac_coords()
            .iter()
            .zip(frame.structure.frac_coords())
        {
            for k in 0..3 {
                let d = (x[k] - y[k]).abs();
                assert!(d.min(1.0 - d) < 1e-12, "extxyz coordinate drift at case {case}");
            }
        }
        assert_eq!(text, write_extxyz(&frames), "extxyz rewrite differs at case {case}");
    }
    println!("ACCEPTANCE 8 PASS: byte-identical 60-candidate screen, 1000 round trips per parser");
}

/// Criterion 9: the cost crossover sits within ±5 structures of the
/// closed-form value at the 50x ratio, and is monotone non-increasing in
/// the oracle unit cost.
#[test]
fn acceptance_9_cost_crossover() {
    use matscreen::ledger::{crossover, CostModel};
    let m = CostModel { oracle_unit: 50.0, surrogate_unit: 1.0, training_cost: 0.0, labels: 100 };
    let n = crossover(&m).unwrap().unwrap();
    let closed = 100.0 * 50.0 / 49.0;
    assert!((n as f64 - closed).abs() <= 5.0, "crossover {n} vs closed form {closed:.2}");
    let mut prev = u64::MAX;
    for unit in [25.0, 50.0, 100.0, 200.0, 800.0] {
        let m = CostModel { oracle_unit: unit, surrogate_unit: 1.0, training_cost: 0.0, labels: 100 };
        let c = crossover(&m).unwrap().unwrap();
        assert!(c <= prev, "crossover increased with oracle cost");
        prev = c;
    }
    println!("ACCEPTANCE 9 PASS: crossover {n} ≈ {closed:.1}, monotone in oracle cost");
}
