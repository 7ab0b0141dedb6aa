//! VASP-5 POSCAR reading and writing.
//!
//! Layout: comment, scale (negative means target cell volume), three lattice
//! rows, species symbols, per-species counts, optional "Selective dynamics",
//! "Direct" or "Cartesian", then one coordinate line per atom. The writer
//! emits Direct coordinates and run-length species groups in atom order, so
//! parse(write(s)) reproduces the structure exactly.

use super::{fmt_f64, IoError};
use crate::element::Element;
use crate::structure::{Lattice, Structure};

fn parse_floats(line: &str, lineno: usize, n: usize, what: &str) -> Result<Vec<f64>, IoError> {
    let vals: Vec<f64> = line
        .split_whitespace()
        .take(n)
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| IoError::Parse {
            line: lineno,
            msg: format!("{what}: {e}"),
        })?;
    if vals.len() < n {
        return Err(IoError::Parse {
            line: lineno,
            msg: format!("{what}: expected {n} numbers, found {}", vals.len()),
        });
    }
    Ok(vals)
}

pub fn read_poscar(text: &str) -> Result<Structure, IoError> {
    let lines: Vec<&str> = text.lines().collect();
    let get = |idx: usize| -> Result<&str, IoError> {
        lines.get(idx).copied().ok_or(IoError::Parse {
            line: idx + 1,
            msg: "unexpected end of file".into(),
        })
    };

    // line 1: comment (ignored), line 2: scale
    get(0)?;
    let scale: f64 = get(1)?
        .split_whitespace()
        .next()
        .unwrap_or("")
        .parse()
        .map_err(|e| IoError::Parse { line: 2, msg: format!("scale factor: {e}") })?;

    let mut rows = [[0.0; 3]; 3];
    for k in 0..3 {
        let v = parse_floats(get(2 + k)?, 3 + k, 3, "lattice vector")?;
        rows[k] = [v[0], v[1], v[2]];
    }

    // line 6: species symbols (VASP 5). A numeric line here means the
    // species line was omitted (VASP 4 style), which we reject.
    let species_line = get(5)?;
    let symbols: Vec<&str> = species_line.split_whitespace().collect();
    if symbols.is_empty() || symbols[0].parse::<f64>().is_ok() {
        return Err(IoError::Parse {
            line: 6,
            msg: "expected the species symbol line (VASP 5 format)".into(),
        });
    }
    let elements: Vec<Element> = symbols
        .iter()
        .map(|s| {
            Element::from_symbol(s).map_err(|_| IoError::UnknownElement {
                line: 6,
                symbol: s.to_string(),
            })
        })
        .collect::<Result<_, _>>()?;

    let counts: Vec<usize> = get(6)?
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| IoError::Parse { line: 7, msg: format!("species counts: {e}") })?;
    if counts.len() != elements.len() {
        return Err(IoError::Parse {
            line: 7,
            msg: format!(
                "{} counts for {} species symbols",
                counts.len(),
                elements.len()
            ),
        });
    }

    // optional selective dynamics line, then coordinate mode
    let mut idx = 7;
    let mode_line = get(idx)?;
    let first = mode_line.trim().chars().next().unwrap_or(' ');
    if first.eq_ignore_ascii_case(&'s') {
        idx += 1;
    }
    let mode_line = get(idx)?;
    let first = mode_line.trim().chars().next().unwrap_or(' ');
    let direct = if first.eq_ignore_ascii_case(&'d') {
        true
    } else if first.eq_ignore_ascii_case(&'c') || first.eq_ignore_ascii_case(&'k') {
        false
    } else {
        return Err(IoError::Parse {
            line: idx + 1,
            msg: format!("expected Direct or Cartesian, got {mode_line:?}"),
        });
    };
    idx += 1;

    // scale: positive multiplies lengths, negative sets the cell volume
    let factor = if scale >= 0.0 {
        scale
    } else {
        let det = crate::structure::det3(&rows);
        (-scale / det).cbrt()
    };
    for row in &mut rows {
        for x in row.iter_mut() {
            *x *= factor;
        }
    }
    let lattice = Lattice::new(rows)?;

    let n_atoms: usize = counts.iter().sum();
    let mut species = Vec::with_capacity(n_atoms);
    for (e, c) in elements.iter().zip(&counts) {
        species.extend(std::iter::repeat(*e).take(*c));
    }
    let mut frac = Vec::with_capacity(n_atoms);
    for a in 0..n_atoms {
        let v = parse_floats(get(idx + a)?, idx + a + 1, 3, "coordinates")?;
        let pos = [v[0], v[1], v[2]];
        if direct {
            frac.push(pos);
        } else {
            let cart = [pos[0] * factor, pos[1] * factor, pos[2] * factor];
            frac.push(lattice.cart_to_frac(cart));
        }
    }
    Ok(Structure::new(species, frac, lattice)?)
}

pub fn write_poscar(s: &Structure) -> String {
    let mut out = String::new();
    // comment: chemical formula
    for (el, n) in s.composition() {
        out.push_str(&format!("{el}{n} "));
    }
    out.push('\n');
    out.push_str("1.0\n");
    for row in s.lattice().rows() {
        out.push_str(&format!(
            "  {} {} {}\n",
            fmt_f64(row[0]),
            fmt_f64(row[1]),
            fmt_f64(row[2])
        ));
    }
    // run-length species groups preserve the original atom order
    let mut groups: Vec<(Element, usize)> = Vec::new();
    for &e in s.species() {
        match groups.last_mut() {
            Some((last, n)) if *last == e => *n += 1,
            _ => groups.push((e, 1)),
        }
    }
    let syms: Vec<String> = groups.iter().map(|(e, _)| e.symbol().to_string()).collect();
    let counts: Vec<String> = groups.iter().map(|(_, n)| n.to_string()).collect();
    out.push_str(&format!("  {}\n", syms.join(" ")));
    out.push_str(&format!("  {}\n", counts.join(" ")));
    out.push_str("Direct\n");
    for f in s.frac_coords() {
        out.push_str(&format!(
            "  {} {} {}\n",
            fmt_f64(f[0]),
            fmt_f64(f[1]),
            fmt_f64(f[2])
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const MINIMAL: &str = "cubic Ar\n\
        2.0\n\
        1.0 0.0 0.0\n\
        0.0 1.0 0.0\n\
        0.0 0.0 1.0\n\
        Ar\n\
        1\n\
        Direct\n\
        0.0 0.0 0.0\n";

    #[test]
    fn minimal_one_atom_cubic() {
        let s = read_poscar(MINIMAL).unwrap();
        assert_eq!(s.n_atoms(), 1);
        assert_eq!(s.species()[0].symbol(), "Ar");
        assert_relative_eq!(s.volume(), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn cartesian_equals_direct() {
        // the same atom given in Direct vs Cartesian coordinates
        let direct = "t\n1.0\n4.0 0.0 0.0\n1.0 3.0 0.0\n0.0 0.0 5.0\nSi\n1\nDirect\n0.25 0.5 0.1\n";
        let s1 = read_poscar(direct).unwrap();
        let cart_pos = s1.frac_to_cart(0).unwrap();
        let cartesian = format!(
            "t\n1.0\n4.0 0.0 0.0\n1.0 3.0 0.0\n0.0 0.0 5.0\nSi\n1\nCartesian\n{} {} {}\n",
            cart_pos[0], cart_pos[1], cart_pos[2]
        );
        let s2 = read_poscar(&cartesian).unwrap();
        for x in 0..3 {
            assert_relative_eq!(
                s1.frac_coords()[0][x],
                s2.frac_coords()[0][x],
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn missing_species_line_names_line_6() {
        let vasp4 = "t\n1.0\n2.0 0.0 0.0\n0.0 2.0 0.0\n0.0 0.0 2.0\n1\nDirect\n0.0 0.0 0.0\n";
        match read_poscar(vasp4) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected parse error at line 6, got {other:?}"),
        }
    }

    #[test]
    fn unknown_element_rejected() {
        let bad = MINIMAL.replace("Ar", "Qq");
        assert!(matches!(
            read_poscar(&bad),
            Err(IoError::UnknownElement { line: 6, .. })
        ));
    }

    #[test]
    fn negative_scale_sets_volume() {
        let text = "t\n-100.0\n1.0 0.0 0.0\n0.0 1.0 0.0\n0.0 0.0 1.0\nAr\n1\nDirect\n0 0 0\n";
        let s = read_poscar(text).unwrap();
        assert_relative_eq!(s.volume(), 100.0, epsilon = 1e-10);
    }

    #[test]
    fn selective_dynamics_line_skipped() {
        let text = "t\n1.0\n2.0 0.0 0.0\n0.0 2.0 0.0\n0.0 0.0 2.0\nAr\n1\nSelective dynamics\nDirect\n0.1 0.2 0.3 T T F\n";
        let s = read_poscar(text).unwrap();
        assert_relative_eq!(s.frac_coords()[0][0], 0.1, epsilon = 1e-14);
    }

    #[test]
    fn round_trip_is_exact() {
        let s = read_poscar(
            "t\n1.0\n4.1 0.2 0.0\n0.3 3.7 0.1\n0.0 0.4 5.3\nSi O\n1 2\nDirect\n0.1 0.9 0.25\n0.33 0.41 0.95\n0.77 0.12 0.48\n",
        )
        .unwrap();
        let text = write_poscar(&s);
        let s2 = read_poscar(&text).unwrap();
        assert_eq!(s, s2);
        // writer is idempotent byte-for-byte from the first generation
        assert_eq!(text, write_poscar(&s2));
    }

    #[test]
    fn interleaved_species_preserved() {
        let s = read_poscar(
            "t\n1.0\n6.0 0.0 0.0\n0.0 6.0 0.0\n0.0 0.0 6.0\nSi O Si\n1 1 1\nDirect\n0 0 0\n0.5 0 0\n0 0.5 0\n",
        )
        .unwrap();
        let syms: Vec<_> = s.species().iter().map(|e| e.symbol()).collect();
        assert_eq!(syms, ["Si", "O", "Si"]);
        assert_eq!(read_poscar(&write_poscar(&s)).unwrap(), s);
    }
}
