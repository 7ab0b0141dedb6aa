//! Extended-XYZ reading and writing for labeled frames.
//!
//! Comment-line keys: `Lattice="9 floats"` (row-major),
//! `Properties=species:S:1:pos:R:3:forces:R:3`, `energy=float`,
//! `stress="9 floats"`, optional `provenance=oracle|external|predicted`
//! (defaults to external). Multi-frame files are concatenated blocks.
//!
//! Positions are Cartesian in the file. The reader refines the fractional
//! coordinates with two correction iterations so a write→read→write cycle
//! reproduces the previous text byte for byte.

use super::{fmt_f64, IoError, LabeledFrame, Provenance};

/// Positions pass through a frac↔cart conversion on read, which carries a
/// few ulps of lattice-scale noise; fixed-point output at 1e-12 Å leaves
/// that noise far inside the rounding bin, so rewrites are byte-stable for
/// every component regardless of cancellation.
fn fmt_pos(x: f64) -> String {
    format!("{:.12}", x)
}
use crate::element::Element;
use crate::structure::{row_mat_mul, Lattice, Structure};

/// Split a comment line into key=value pairs, honoring double quotes.
fn split_keys(line: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while matches!(chars.peek(), Some(c) if c.is_whitespace()) {
            chars.next();
        }
        if chars.peek().is_none() {
            break;
        }
        let mut key = String::new();
        while let Some(&c) = chars.peek() {
            if c == '=' || c.is_whitespace() {
                break;
            }
            key.push(c);
            chars.next();
        }
        let mut value = String::new();
        if chars.peek() == Some(&'=') {
            chars.next();
            if chars.peek() == Some(&'"') {
                chars.next();
                for c in chars.by_ref() {
                    if c == '"' {
                        break;
                    }
                    value.push(c);
                }
            } else {
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() {
                        break;
                    }
                    value.push(c);
                    chars.next();
                }
            }
        }
        out.push((key, value));
    }
    out
}

struct ColumnLayout {
    species: usize,
    pos: usize,
    forces: Option<usize>,
    total: usize,
}

fn parse_properties(value: &str, lineno: usize) -> Result<ColumnLayout, IoError> {
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() % 3 != 0 || parts.is_empty() {
        return Err(IoError::Parse {
            line: lineno,
            msg: format!("malformed Properties spec {value:?}"),
        });
    }
    let mut col = 0;
    let (mut species, mut pos, mut forces) = (None, None, None);
    for triple in parts.chunks(3) {
        let n: usize = triple[2].parse().map_err(|e| IoError::Parse {
            line: lineno,
            msg: format!("Properties column count: {e}"),
        })?;
        match triple[0] {
            "species" => species = Some(col),
            "pos" => pos = Some(col),
            "forces" => forces = Some(col),
            _ => {}
        }
        col += n;
    }
    let species = species.ok_or_else(|| IoError::MissingKey { key: "species column".into() })?;
    let pos = pos.ok_or_else(|| IoError::MissingKey { key: "pos column".into() })?;
    Ok(ColumnLayout { species, pos, forces, total: col })
}

fn parse_nine(value: &str, what: &str) -> Result<[[f64; 3]; 3], IoError> {
    let vals: Vec<f64> = value
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| IoError::Parse { line: 0, msg: format!("{what}: {e}") })?;
    if vals.len() != 9 {
        return Err(IoError::CountMismatch {
            what: format!("{what} components"),
            expected: 9,
            got: vals.len(),
        });
    }
    Ok([
        [vals[0], vals[1], vals[2]],
        [vals[3], vals[4], vals[5]],
        [vals[6], vals[7], vals[8]],
    ])
}

/// Fractional coordinates from Cartesian, with two refinement sweeps so the
/// product frac·L reproduces the parsed Cartesian value to the last ulp.
/// Values within 1e-12 of an integer snap to it, keeping atoms written at a
/// cell boundary on their original side of the wrap.
fn cart_to_frac_refined(lattice: &Lattice, cart: [f64; 3]) -> [f64; 3] {
    let inv = lattice.inverse();
    let mut f = row_mat_mul(cart, &inv);
    for _ in 0..2 {
        let back = lattice.frac_to_cart(f);
        let resid = [cart[0] - back[0], cart[1] - back[1], cart[2] - back[2]];
        let corr = row_mat_mul(resid, &inv);
        for k in 0..3 {
            f[k] += corr[k];
        }
    }
    for x in f.iter_mut() {
        if (*x - x.round()).abs() < 1e-12 {
            *x = x.round();
        }
    }
    f
}

pub fn read_extxyz(text: &str) -> Result<Vec<LabeledFrame>, IoError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut frames = Vec::new();
    let mut idx = 0;
    while idx < lines.len() {
        if lines[idx].trim().is_empty() {
            idx += 1;
            continue;
        }
        let n: usize = lines[idx].trim().parse().map_err(|e| IoError::Parse {
            line: idx + 1,
            msg: format!("atom count: {e}"),
        })?;
        let comment_line = idx + 1;
        let comment = *lines.get(comment_line).ok_or(IoError::Parse {
            line: comment_line + 1,
            msg: "missing comment line".into(),
        })?;
        let keys = split_keys(comment);
        let find = |k: &str| keys.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str());

        let lattice_val = find("Lattice").ok_or_else(|| IoError::MissingKey { key: "Lattice".into() })?;
        let rows = parse_nine(lattice_val, "Lattice")?;
        let lattice = Lattice::new(rows)?;
        let props = find("Properties").ok_or_else(|| IoError::MissingKey { key: "Properties".into() })?;
        let layout = parse_properties(props, comment_line + 1)?;
        if layout.forces.is_none() {
            return Err(IoError::MissingKey { key: "forces".into() });
        }
        let energy: f64 = find("energy")
            .ok_or_else(|| IoError::MissingKey { key: "energy".into() })?
            .parse()
            .map_err(|e| IoError::Parse { line: comment_line + 1, msg: format!("energy: {e}") })?;
        let stress_val = find("stress").ok_or_else(|| IoError::MissingKey { key: "stress".into() })?;
        let stress = parse_nine(stress_val, "stress")?;
        let provenance = match find("provenance") {
            Some(v) => Provenance::parse(v).ok_or_else(|| IoError::Parse {
                line: comment_line + 1,
                msg: format!("unknown provenance {v:?}"),
            })?,
            None => Provenance::External,
        };

        let mut species = Vec::with_capacity(n);
        let mut frac = Vec::with_capacity(n);
        let mut forces = Vec::with_capacity(n);
        for a in 0..n {
            let lineno = comment_line + 1 + a;
            let line = *lines.get(lineno).ok_or(IoError::CountMismatch {
                what: "atom lines".into(),
                expected: n,
                got: a,
            })?;
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.len() < layout.total {
                return Err(IoError::Parse {
                    line: lineno + 1,
                    msg: format!("expected {} columns, found {}", layout.total, tok.len()),
                });
            }
            let sym = tok[layout.species];
            species.push(Element::from_symbol(sym).map_err(|_| IoError::UnknownElement {
                line: lineno + 1,
                symbol: sym.to_string(),
            })?);
            let get3 = |col: usize| -> Result<[f64; 3], IoError> {
                let mut v = [0.0; 3];
                for k in 0..3 {
                    v[k] = tok[col + k].parse().map_err(|e| IoError::Parse {
                        line: lineno + 1,
                        msg: format!("column {}: {e}", col + k + 1),
                    })?;
                }
                Ok(v)
            };
            let cart = get3(layout.pos)?;
            frac.push(cart_to_frac_refined(&lattice, cart));
            forces.push(get3(layout.forces.unwrap())?);
        }
        let structure = Structure::new(species, frac, lattice)?;
        frames.push(LabeledFrame::new(structure, energy, forces, stress, provenance)?);
        idx = comment_line + 1 + n;
    }
    Ok(frames)
}

pub fn write_extxyz(frames: &[LabeledFrame]) -> String {
    let mut out = String::new();
    for f in frames {
        let n = f.n_atoms();
        out.push_str(&format!("{n}\n"));
        let l: Vec<String> = f
            .structure
            .lattice()
            .rows()
            .iter()
            .flatten()
            .map(|&x| fmt_f64(x))
            .collect();
        let s: Vec<String> = f.stress.iter().flatten().map(|&x| fmt_f64(x)).collect();
        out.push_str(&format!(
            "Lattice=\"{}\" Properties=species:S:1:pos:R:3:forces:R:3 energy={} stress=\"{}\" provenance={}\n",
            l.join(" "),
            fmt_f64(f.energy),
            s.join(" "),
            f.provenance.as_str()
        ));
        let cart = f.structure.cart_coords();
        for a in 0..n {
            out.push_str(&format!(
                "{} {} {} {} {} {} {}\n",
                f.structure.species()[a].symbol(),
                fmt_pos(cart[a][0]),
                fmt_pos(cart[a][1]),
                fmt_pos(cart[a][2]),
                fmt_f64(f.forces[a][0]),
                fmt_f64(f.forces[a][1]),
                fmt_f64(f.forces[a][2]),
            ));
        }
    }
    out
}
