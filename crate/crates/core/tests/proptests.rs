//! Property tests: parser round trips and fuzzed mutations, neighbor-list
//! equivalence with brute force, and coordinate wrapping.

use matscreen_core::element::Element;
use matscreen_core::io::{
    read_extxyz, read_poscar, write_extxyz, write_poscar, LabeledFrame, Provenance,
};
use matscreen_core::neighbor::build_neighbor_list;
use matscreen_core::structure::{wrap_frac, Lattice, Structure};
use proptest::prelude::*;

const PALETTE: [&str; 6] = ["H", "O", "Si", "Ca", "Mg", "Fe"];

fn arb_lattice() -> impl Strategy<Value = Lattice> {
    (
        3.0..9.0f64,
        3.0..9.0f64,
        3.0..9.0f64,
        -0.8..0.8f64,
        -0.8..0.8f64,
        -0.8..0.8f64,
    )
        .prop_map(|(a, b, c, xy, xz, yz)| {
            Lattice::new([[a, 0.0, 0.0], [xy, b, 0.0], [xz, yz, c]]).unwrap()
        })
}

fn arb_structure(max_atoms: usize) -> impl Strategy<Value = Structure> {
    (
        arb_lattice(),
        prop::collection::vec(
            ((0usize..PALETTE.len()), [0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64]),
            1..=max_atoms,
        ),
    )
        .prop_map(|(lattice, atoms)| {
            let (species, frac): (Vec<Element>, Vec<[f64; 3]>) = atoms
                .into_iter()
                .map(|(si, f)| (Element::from_symbol(PALETTE[si]).unwrap(), f))
                .unzip();
            Structure::new(species, frac, lattice).unwrap()
        })
}

fn arb_frame() -> impl Strategy<Value = LabeledFrame> {
    (
        arb_structure(6),
        -20.0..20.0f64,
        prop::collection::vec([-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64], 6),
        prop::collection::vec(-0.1..0.1f64, 9),
    )
        .prop_map(|(s, energy, forces, stress)| {
            let n = s.n_atoms();
            let st = [
                [stress[0], stress[1], stress[2]],
                [stress[3], stress[4], stress[5]],
                [stress[6], stress[7], stress[8]],
            ];
            LabeledFrame::new(s, energy, forces[..n].to_vec(), st, Provenance::Oracle)
                .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn poscar_round_trip_identity(s in arb_structure(8)) {
        let text = write_poscar(&s);
        let back = read_poscar(&text).unwrap();
        prop_assert_eq!(back.species(), s.species());
        for (a, b) in back.frac_coords().iter().zip(s.frac_coords()) {
            for x in 0..3 {
                prop_assert!((a[x] - b[x]).abs() < 1e-12);
            }
        }
        for (ra, rb) in back.lattice().rows().iter().zip(s.lattice().rows()) {
            for x in 0..3 {
                prop_assert!((ra[x] - rb[x]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn extxyz_round_trip_identity(f in arb_frame()) {
        let text = write_extxyz(std::slice::from_ref(&f));
        let frames = read_extxyz(&text).unwrap();
        prop_assert_eq!(frames.len(), 1);
        let g = &frames[0];
        prop_assert!((g.energy - f.energy).abs() < 1e-12);
        for (a, b) in g.structure.frac_coords().iter().zip(f.structure.frac_coords()) {
            for x in 0..3 {
                // periodic distance: 0 and 1 are the same coordinate
                let d = (a[x] - b[x]).abs();
                prop_assert!(d.min(1.0 - d) < 1e-12);
            }
        }
        for (fa, fb) in g.forces.iter().zip(&f.forces) {
            for x in 0..3 {
                prop_assert!((fa[x] - fb[x]).abs() < 1e-12);
            }
        }
        // stability: a second trip is byte-identical
        let text2 = write_extxyz(&frames);
        prop_assert_eq!(text, text2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Deleting any single whitespace token from the mandatory region of a
    /// POSCAR must not parse back to the same structure silently.
    #[test]
    fn poscar_token_deletion_rejected(s in arb_structure(5), pick in 0usize..1000) {
        let text = write_poscar(&s);
        let lines: Vec<&str> = text.lines().collect();
        // tokens on lines 2.. are all load-bearing
        let mut slots = Vec::new();
        for (li, line) in lines.iter().enumerate().skip(1) {
            for ti in 0..line.split_whitespace().count() {
                slots.push((li, ti));
            }
        }
        let (li, ti) = slots[pick % slots.len()];
        let mut mutated: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
        let kept: Vec<&str> = mutated[li]
            .split_whitespace()
            .enumerate()
            .filter(|(i, _)| *i != ti)
            .map(|(_, t)| t)
            .collect();
        mutated[li] = kept.join(" ");
        let broken = mutated.join("\n");
        match read_poscar(&broken) {
            Err(_) => {}
            Ok(parsed) => prop_assert_ne!(parsed, s, "silent acceptance of a corrupted file"),
        }
    }

    #[test]
    fn extxyz_token_deletion_rejected(f in arb_frame(), pick in 0usize..1000) {
        let text = write_extxyz(std::slice::from_ref(&f));
        let tokens: Vec<(usize, usize)> = text
            .lines()
            .enumerate()
            .flat_map(|(li, l)| (0..l.split_whitespace().count()).map(move |ti| (li, ti)))
            .collect();
        let (li, ti) = tokens[pick % tokens.len()];
        let mutated: Vec<String> = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                if i != li {
                    return l.to_string();
                }
                l.split_whitespace()
                    .enumerate()
                    .filter(|(j, _)| *j != ti)
                    .map(|(_, t)| t)
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        match read_extxyz(&mutated.join("\n")) {
            Err(_) => {}
            Ok(frames) => {
                prop_assert!(
                    frames.len() != 1 || frames[0] != f,
                    "silent acceptance of a corrupted file"
                );
            }
        }
    }

    #[test]
    fn wrap_idempotent(x in -5.0..5.0f64, y in -5.0..5.0f64, z in -5.0..5.0f64) {
        let w = wrap_frac([x, y, z]);
        prop_assert_eq!(wrap_frac(w), w);
        for k in 0..3 {
            prop_assert!(w[k] >= 0.0 && w[k] < 1.0);
        }
    }

    /// Neighbor list equals an independent brute-force image enumeration.
    #[test]
    fn neighbor_list_matches_brute_force(s in arb_structure(8), cutoff in 1.0..7.0f64) {
        let nl = build_neighbor_list(&s, cutoff).unwrap();
        // independent enumeration over a generous image range
        let rows = s.lattice().rows();
        let cart = s.cart_coords();
        let n = s.n_atoms();
        let spacings = s.lattice().plane_spacings();
        let reach = |d: f64| (cutoff / d).ceil() as i64 + 1;
        let (ra, rb, rc) = (reach(spacings[0]), reach(spacings[1]), reach(spacings[2]));
        let mut brute = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for n0 in -ra..=ra {
                    for n1 in -rb..=rb {
                        for n2 in -rc..=rc {
                            if i == j && (n0, n1, n2) == (0, 0, 0) {
                                continue;
                            }
                            let mut d2 = 0.0;
                            for x in 0..3 {
                                let dx = cart[j][x] - cart[i][x]
                                    + n0 as f64 * rows[0][x]
                                    + n1 as f64 * rows[1][x]
                                    + n2 as f64 * rows[2][x];
                                d2 += dx * dx;
                            }
                            if d2.sqrt() <= cutoff + 1e-9 {
                                brute.push((i, j, [n0, n1, n2]));
                            }
                        }
                    }
                }
            }
        }
        brute.sort();
        let got: Vec<(usize, usize, [i64; 3])> =
            nl.pairs.iter().map(|p| (p.i, p.j, p.offset)).collect();
        prop_assert_eq!(got, brute);
    }
}
