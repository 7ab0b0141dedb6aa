//! Elastic behavior of the relaxed LJ FCC crystal: cubic symmetry, the
//! energy-based vs stress-based cross-check, rotation invariance, step-size
//! robustness, and consistency between the shear curve and C44.

use matscreen_core::element::Element;
use matscreen_core::fdcheck::{random_rotation, rotate_structure};
use matscreen_core::mech::{
    elastic_tensor, ideal_shear, ElasticMethod, ShearPlane,
};
use matscreen_core::potential::LennardJones;
use matscreen_core::relax::{relax_cell, CellRelaxOptions};
use matscreen_core::structure::{Lattice, Structure};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn el(s: &str) -> Element {
    Element::from_symbol(s).unwrap()
}

fn relaxed_fcc(lj: &LennardJones) -> Structure {
    let start = Structure::new(
        vec![el("Ar"); 4],
        vec![
            [0.0, 0.0, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
            [0.5, 0.5, 0.0],
        ],
        Lattice::cubic(1.55 * lj.sigma).unwrap(),
    )
    .unwrap();
    let out = relax_cell(&start, lj, &CellRelaxOptions {
        stress_tol: 1e-6,
        f_tol: 1e-7,
        ..CellRelaxOptions::default()
    })
    .unwrap();
    assert!(out.converged);
    out.structure
}

#[test]
fn cubic_symmetry_and_method_cross_check() {
    let lj = LennardJones::new(1.0, 1.0, 2.5);
    let fcc = relaxed_fcc(&lj);
    let energy = elastic_tensor(&fcc, &lj, 0.005, false, ElasticMethod::EnergyBased).unwrap();
    let stress = elastic_tensor(&fcc, &lj, 0.005, false, ElasticMethod::StressBased).unwrap();
    let c = &energy.c;
    let c11 = c[0][0];

    // cubic relations
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        assert!(((c[a][a] - c[b][b]) / c11).abs() < 0.01, "C{a}{a} vs C{b}{b}");
    }
    for (a, b) in [((0, 1), (0, 2)), ((0, 1), (1, 2))] {
        assert!(
            ((c[a.0][a.1] - c[b.0][b.1]) / c11).abs() < 0.01,
            "off-diagonal equality"
        );
    }
    for (a, b) in [(3, 4), (3, 5)] {
        assert!(((c[a][a] - c[b][b]) / c11).abs() < 0.01, "shear equality");
    }
    // the normal/shear cross-blocks vanish for a cubic crystal
    for i in 0..3 {
        for j in 3..6 {
            assert!(
                (c[i][j] / c11).abs() < 0.01,
                "C[{i}][{j}] = {} should be ~0",
                c[i][j]
            );
        }
    }
    assert!(energy.asymmetry() < 0.02);
    assert!(energy.is_positive_definite());

    // dual-route agreement, elementwise within 2% of the dominant scale
    for i in 0..6 {
        for j in 0..6 {
            let denom = energy.c[i][j].abs().max(0.02 * c11);
            assert!(
                ((energy.c[i][j] - stress.c[i][j]) / denom).abs() < 0.02,
                "method disagreement at [{i}][{j}]: {} vs {}",
                energy.c[i][j],
                stress.c[i][j]
            );
        }
    }
    println!(
        "LJ FCC: C11 {:.4} C12 {:.4} C44 {:.4} eV/A^3 (B {:.4})",
        c[0][0], c[0][1], c[3][3], energy.bulk_modulus()
    );
}

#[test]
fn rotation_leaves_voigt_invariants() {
    let lj = LennardJones::new(1.0, 1.0, 2.5);
    let fcc = relaxed_fcc(&lj);
    let base = elastic_tensor(&fcc, &lj, 0.005, false, ElasticMethod::EnergyBased).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rot = random_rotation(&mut rng);
    let rotated = rotate_structure(&fcc, &rot);
    let turned = elastic_tensor(&rotated, &lj, 0.005, false, ElasticMethod::EnergyBased).unwrap();
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    assert!(
        rel(turned.bulk_modulus(), base.bulk_modulus()) < 0.01,
        "bulk modulus moved under rotation: {} vs {}",
        turned.bulk_modulus(),
        base.bulk_modulus()
    );
    assert!(
        rel(turned.shear_modulus(), base.shear_modulus()) < 0.01,
        "Voigt shear modulus moved under rotation"
    );
}

#[test]
fn richardson_step_halving() {
    let lj = LennardJones::new(1.0, 1.0, 2.5);
    let fcc = relaxed_fcc(&lj);
    let coarse = elastic_tensor(&fcc, &lj, 0.005, false, ElasticMethod::EnergyBased).unwrap();
    let fine = elastic_tensor(&fcc, &lj, 0.0025, false, ElasticMethod::EnergyBased).unwrap();
    let scale = coarse.c[0][0];
    for i in 0..6 {
        for j in 0..6 {
            let denom = fine.c[i][j].abs().max(0.02 * scale);
            assert!(
                ((coarse.c[i][j] - fine.c[i][j]) / denom).abs() < 0.01,
                "step sensitivity at [{i}][{j}]"
            );
        }
    }
}

#[test]
fn shear_curve_slope_matches_c44() {
    let lj = LennardJones::new(1.0, 1.0, 2.5);
    let fcc = relaxed_fcc(&lj);
    let c = elastic_tensor(&fcc, &lj, 0.005, false, ElasticMethod::EnergyBased).unwrap();
    let curve = ideal_shear(&fcc, &lj, ShearPlane::Xy, 0.01, 0.06, false).unwrap();
    // interior central-difference τ at γ=Δγ carries slope C66 (=C44 cubic)
    let slope = curve.stress[1] / curve.gamma[1];
    let rel = ((slope - c.c[3][3]) / c.c[3][3]).abs();
    assert!(
        rel < 0.05,
        "shear slope {slope} vs C44 {} ({}% off)",
        c.c[3][3],
        100.0 * rel
    );
    // centrosymmetric crystal: E(γ) is even
    use matscreen_core::mech::apply_shear;
    use matscreen_core::potential::Potential;
    for g in [0.01, 0.03] {
        let ep = lj.evaluate(&apply_shear(&fcc, ShearPlane::Xy, g).unwrap()).unwrap().energy;
        let em = lj.evaluate(&apply_shear(&fcc, ShearPlane::Xy, -g).unwrap()).unwrap().energy;
        assert!((ep - em).abs() < 1e-6, "E(γ) not even at γ={g}");
    }
}
