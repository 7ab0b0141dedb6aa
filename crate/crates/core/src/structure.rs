//! Periodic crystal structures: lattice, fractional coordinates, supercells.
//!
//! A structure is an immutable value after construction; every "mutation"
//! builds a new value, so sharing across threads is safe.

use crate::element::Element;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Hard cap on supercell atom counts.
pub const MAX_SUPERCELL_ATOMS: usize = 65_536;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StructureError {
    #[error("structure must contain at least one atom")]
    Empty,
    #[error("species count {species} does not match coordinate count {coords}")]
    LengthMismatch { species: usize, coords: usize },
    #[error("lattice determinant {det} must be positive (right-handed, nonzero volume)")]
    NonPositiveVolume { det: f64 },
    #[error("atom index {index} out of range for {n} atoms")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("supercell repeat {repeat:?} must have every component >= 1")]
    InvalidRepeat { repeat: [usize; 3] },
    #[error("supercell would contain {atoms} atoms, above the maximum {max}")]
    SupercellTooLarge { atoms: usize, max: usize },
    #[error("cutoff must be positive, got {0}")]
    InvalidCutoff(f64),
}

/// Row-vector lattice matrix in Å: rows are the three cell vectors, and a
/// fractional coordinate maps to Cartesian as the row product `f · L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    rows: [[f64; 3]; 3],
}

impl Lattice {
    pub fn new(rows: [[f64; 3]; 3]) -> Result<Self, StructureError> {
        let det = det3(&rows);
        if det <= 0.0 || !det.is_finite() {
            return Err(StructureError::NonPositiveVolume { det });
        }
        Ok(Lattice { rows })
    }

    pub fn cubic(a: f64) -> Result<Self, StructureError> {
        Lattice::new([[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]])
    }

    /// Lattice from cell parameters a, b, c (Å) and angles α, β, γ (degrees),
    /// in the standard orientation (a along x, b in the xy-plane).
    pub fn from_parameters(
        a: f64,
        b: f64,
        c: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
    ) -> Result<Self, StructureError> {
        let (ar, br, gr) = (alpha.to_radians(), beta.to_radians(), gamma.to_radians());
        let cx = c * br.cos();
        let cy = c * (ar.cos() - br.cos() * gr.cos()) / gr.sin();
        let cz2 = c * c - cx * cx - cy * cy;
        if cz2 <= 0.0 {
            return Err(StructureError::NonPositiveVolume { det: 0.0 });
        }
        Lattice::new([
            [a, 0.0, 0.0],
            [b * gr.cos(), b * gr.sin(), 0.0],
            [cx, cy, cz2.sqrt()],
        ])
    }

    pub fn rows(&self) -> &[[f64; 3]; 3] {
        &self.rows
    }

    pub fn volume(&self) -> f64 {
        det3(&self.rows)
    }

    pub fn inverse(&self) -> [[f64; 3]; 3] {
        inv3(&self.rows)
    }

    /// `f · L` for a fractional row vector.
    pub fn frac_to_cart(&self, f: [f64; 3]) -> [f64; 3] {
        row_mat_mul(f, &self.rows)
    }

    pub fn cart_to_frac(&self, r: [f64; 3]) -> [f64; 3] {
        row_mat_mul(r, &self.inverse())
    }

    pub fn lengths(&self) -> [f64; 3] {
        [norm(self.rows[0]), norm(self.rows[1]), norm(self.rows[2])]
    }

    /// Cell angles (α, β, γ) in degrees: α between b and c, etc.
    pub fn angles(&self) -> [f64; 3] {
        let [a, b, c] = self.rows;
        let ang = |u: [f64; 3], v: [f64; 3]| {
            (dot(u, v) / (norm(u) * norm(v))).clamp(-1.0, 1.0).acos().to_degrees()
        };
        [ang(b, c), ang(a, c), ang(a, b)]
    }

    /// Reciprocal lattice rows b_k with a_i · b_k = 2π δ_ik.
    pub fn reciprocal(&self) -> [[f64; 3]; 3] {
        let inv = self.inverse();
        let mut rec = [[0.0; 3]; 3];
        for k in 0..3 {
            for x in 0..3 {
                rec[k][x] = 2.0 * std::f64::consts::PI * inv[x][k];
            }
        }
        rec
    }

    /// Spacing between lattice planes perpendicular to each cell vector.
    pub fn plane_spacings(&self) -> [f64; 3] {
        let inv = self.inverse();
        let mut d = [0.0; 3];
        for k in 0..3 {
            let col = [inv[0][k], inv[1][k], inv[2][k]];
            d[k] = 1.0 / norm(col);
        }
        d
    }

    /// Apply a deformation `L → L · m` (rows transform on the right).
    pub fn deformed(&self, m: &[[f64; 3]; 3]) -> Result<Self, StructureError> {
        let mut rows = [[0.0; 3]; 3];
        for i in 0..3 {
            rows[i] = row_mat_mul(self.rows[i], m);
        }
        Lattice::new(rows)
    }
}

/// Periodic crystal: species, fractional coordinates in [0,1), lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Structure {
    species: Vec<Element>,
    frac_coords: Vec<[f64; 3]>,
    lattice: Lattice,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    tags: BTreeMap<String, String>,
}

impl Structure {
    pub fn new(
        species: Vec<Element>,
        frac_coords: Vec<[f64; 3]>,
        lattice: Lattice,
    ) -> Result<Self, StructureError> {
        if species.is_empty() {
            return Err(StructureError::Empty);
        }
        if species.len() != frac_coords.len() {
            return Err(StructureError::LengthMismatch {
                species: species.len(),
                coords: frac_coords.len(),
            });
        }
        let frac_coords = frac_coords.iter().map(|&f| wrap_frac(f)).collect();
        Ok(Structure {
            species,
            frac_coords,
            lattice,
            tags: BTreeMap::new(),
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self) -> &[Element] {
        &self.species
    }

    pub fn frac_coords(&self) -> &[[f64; 3]] {
        &self.frac_coords
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn volume(&self) -> f64 {
        self.lattice.volume()
    }

    pub fn tags(&self) -> &BTreeMap<String, String> {
        &self.tags
    }

    pub fn with_tag(mut self, key: &str, value: &str) -> Self {
        self.tags.insert(key.to_string(), value.to_string());
        self
    }

    /// Cartesian position of atom `i`: `X_i · L`.
    pub fn frac_to_cart(&self, i: usize) -> Result<[f64; 3], StructureError> {
        let f = self.frac_coords.get(i).ok_or(StructureError::IndexOutOfRange {
            index: i,
            n: self.n_atoms(),
        })?;
        Ok(self.lattice.frac_to_cart(*f))
    }

    pub fn cart_coords(&self) -> Vec<[f64; 3]> {
        self.frac_coords
            .iter()
            .map(|&f| self.lattice.frac_to_cart(f))
            .collect()
    }

    /// New structure with the same species/lattice and the given fractional
    /// coordinates (wrapped into [0,1)).
    pub fn with_frac_coords(&self, frac: Vec<[f64; 3]>) -> Result<Self, StructureError> {
        if frac.len() != self.n_atoms() {
            return Err(StructureError::LengthMismatch {
                species: self.n_atoms(),
                coords: frac.len(),
            });
        }
        let mut s = self.clone();
        s.frac_coords = frac.iter().map(|&f| wrap_frac(f)).collect();
        Ok(s)
    }

    pub fn with_cart_coords(&self, cart: &[[f64; 3]]) -> Result<Self, StructureError> {
        let frac = cart.iter().map(|&r| self.lattice.cart_to_frac(r)).collect();
        self.with_frac_coords(frac)
    }

    pub fn with_lattice(&self, lattice: Lattice) -> Self {
        let mut s = self.clone();
        s.lattice = lattice;
        s
    }

    /// New structure with atom `i` replaced by `species`.
    pub fn with_species_at(&self, i: usize, species: Element) -> Result<Self, StructureError> {
        if i >= self.n_atoms() {
            return Err(StructureError::IndexOutOfRange {
                index: i,
                n: self.n_atoms(),
            });
        }
        let mut s = self.clone();
        s.species[i] = species;
        Ok(s)
    }

    /// Element counts, ordered by atomic number.
    pub fn composition(&self) -> BTreeMap<Element, usize> {
        let mut map = BTreeMap::new();
        for &e in &self.species {
            *map.entry(e).or_insert(0) += 1;
        }
        map
    }

    /// Shortest periodic distance between atoms `i` and `j`.
    ///
    /// Searches the 27 neighbor images around the wrapped fractional
    /// difference; exact whenever the cell is not extremely skewed (guard:
    /// for cells where the Niggli-reduced offset could exceed one cell, the
    /// result is an upper bound). Cells in this code path are small and
    /// near-orthogonal enough that the search is exact.
    pub fn min_image_distance(&self, i: usize, j: usize) -> Result<f64, StructureError> {
        Ok(norm(self.min_image_vector(i, j)?))
    }

    /// Cartesian displacement from atom `i` to the nearest image of atom `j`.
    pub fn min_image_vector(&self, i: usize, j: usize) -> Result<[f64; 3], StructureError> {
        let n = self.n_atoms();
        let check = |k: usize| {
            if k >= n {
                Err(StructureError::IndexOutOfRange { index: k, n })
            } else {
                Ok(())
            }
        };
        check(i)?;
        check(j)?;
        let mut df = [0.0; 3];
        for k in 0..3 {
            let d = self.frac_coords[j][k] - self.frac_coords[i][k];
            df[k] = d - d.round();
        }
        let mut best = [f64::INFINITY; 3];
        let mut best_d2 = f64::INFINITY;
        for n0 in -1..=1 {
            for n1 in -1..=1 {
                for n2 in -1..=1 {
                    let f = [
                        df[0] + n0 as f64,
                        df[1] + n1 as f64,
                        df[2] + n2 as f64,
                    ];
                    let r = self.lattice.frac_to_cart(f);
                    let d2 = dot(r, r);
                    if d2 < best_d2 {
                        best_d2 = d2;
                        best = r;
                    }
                }
            }
        }
        Ok(best)
    }

    /// Stable 64-bit content hash over species, lattice, and coordinates.
    ///
    /// FNV-1a over the exact f64 bit patterns; used for dedup and for
    /// content-addressed artifact storage.
    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        for e in &self.species {
            h.write(e.symbol().as_bytes());
        }
        for row in self.lattice.rows() {
            for &x in row {
                h.write(&x.to_bits().to_le_bytes());
            }
        }
        for f in &self.frac_coords {
            for &x in f {
                h.write(&x.to_bits().to_le_bytes());
            }
        }
        h.finish()
    }
}

/// Supercell of a base structure with a provenance map back to base atoms.
#[derive(Clone, Debug)]
pub struct Supercell {
    structure: Structure,
    base_atoms: usize,
    repeat: [usize; 3],
    /// For each supercell atom: (base atom index, integer cell offset).
    map: Vec<(usize, [i64; 3])>,
}

impl Supercell {
    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn repeat(&self) -> [usize; 3] {
        self.repeat
    }

    pub fn base_atoms(&self) -> usize {
        self.base_atoms
    }

    pub fn map(&self) -> &[(usize, [i64; 3])] {
        &self.map
    }

    pub fn n_cells(&self) -> usize {
        self.repeat[0] * self.repeat[1] * self.repeat[2]
    }

    /// Supercell atom index for (base atom, wrapped cell offset).
    pub fn atom_index(&self, base: usize, cell: [i64; 3]) -> usize {
        let r = self.repeat;
        let c = [
            cell[0].rem_euclid(r[0] as i64) as usize,
            cell[1].rem_euclid(r[1] as i64) as usize,
            cell[2].rem_euclid(r[2] as i64) as usize,
        ];
        base * self.n_cells() + (c[0] * r[1] + c[1]) * r[2] + c[2]
    }
}

/// Tile a structure by integer repeats along each cell vector.
///
/// Atom ordering: base atom major, cell offsets lexicographic within it, so
/// `index = base * (n1·n2·n3) + cell_rank`.
pub fn make_supercell(s: &Structure, repeat: [usize; 3]) -> Result<Supercell, StructureError> {
    if repeat.iter().any(|&r| r == 0) {
        return Err(StructureError::InvalidRepeat { repeat });
    }
    let n_cells = repeat[0] * repeat[1] * repeat[2];
    let n_atoms = s.n_atoms() * n_cells;
    if n_atoms > MAX_SUPERCELL_ATOMS {
        return Err(StructureError::SupercellTooLarge {
            atoms: n_atoms,
            max: MAX_SUPERCELL_ATOMS,
        });
    }
    let mut rows = *s.lattice().rows();
    for k in 0..3 {
        for x in 0..3 {
            rows[k][x] *= repeat[k] as f64;
        }
    }
    let lattice = Lattice::new(rows)?;
    let mut species = Vec::with_capacity(n_atoms);
    let mut frac = Vec::with_capacity(n_atoms);
    let mut map = Vec::with_capacity(n_atoms);
    for (b, (&e, f)) in s.species().iter().zip(s.frac_coords()).enumerate() {
        for c0 in 0..repeat[0] {
            for c1 in 0..repeat[1] {
                for c2 in 0..repeat[2] {
                    species.push(e);
                    frac.push([
                        (f[0] + c0 as f64) / repeat[0] as f64,
                        (f[1] + c1 as f64) / repeat[1] as f64,
                        (f[2] + c2 as f64) / repeat[2] as f64,
                    ]);
                    map.push((b, [c0 as i64, c1 as i64, c2 as i64]));
                }
            }
        }
    }
    let structure = Structure::new(species, frac, lattice)?;
    Ok(Supercell {
        structure,
        base_atoms: s.n_atoms(),
        repeat,
        map,
    })
}

/// Wrap a fractional coordinate into [0, 1) componentwise.
pub fn wrap_frac(f: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let w = f[k] - f[k].floor();
        out[k] = if w >= 1.0 { 0.0 } else { w };
    }
    out
}

pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(v: [f64; 3]) -> f64 {
    dot(v, v).sqrt()
}

pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Row vector times 3×3 matrix: `(v · M)_j = Σ_i v_i M_ij`.
pub fn row_mat_mul(v: [f64; 3], m: &[[f64; 3]; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for j in 0..3 {
        out[j] = v[0] * m[0][j] + v[1] * m[1][j] + v[2] * m[2][j];
    }
    out
}

pub fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        out[i] = row_mat_mul(a[i], b);
    }
    out
}

pub fn det3(m: &[[f64; 3]; 3]) -> f64 {
    dot(m[0], cross(m[1], m[2]))
}

pub fn inv3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = det3(m);
    let c0 = cross(m[1], m[2]);
    let c1 = cross(m[2], m[0]);
    let c2 = cross(m[0], m[1]);
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        inv[i][0] = c0[i] / det;
        inv[i][1] = c1[i] / det;
        inv[i][2] = c2[i] / det;
    }
    inv
}

/// FNV-1a 64-bit: stable across runs and platforms, unlike std's hasher.
pub struct Fnv1a(u64);

impl Fnv1a {
    pub fn new() -> Self {
        Fnv1a(0xcbf29ce484222325)
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn el(s: &str) -> Element {
        Element::from_symbol(s).unwrap()
    }

    #[test]
    fn frac_to_cart_cubic_center() {
        let s = Structure::new(
            vec![el("Ar")],
            vec![[0.5, 0.5, 0.5]],
            Lattice::cubic(2.0).unwrap(),
        )
        .unwrap();
        assert_eq!(s.frac_to_cart(0).unwrap(), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn frac_to_cart_origin_any_lattice() {
        let l = Lattice::new([[2.0, 0.3, 0.0], [1.0, 2.0, 0.1], [0.2, 0.0, 3.0]]).unwrap();
        let s = Structure::new(vec![el("Si")], vec![[0.0, 0.0, 0.0]], l).unwrap();
        assert_eq!(s.frac_to_cart(0).unwrap(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn frac_to_cart_triclinic_hand_value() {
        // [[2,0,0],[1,2,0],[0,0,3]], frac (0.5,0.5,0) -> 0.5*(2,0,0)+0.5*(1,2,0) = (1.5,1,0)
        let l = Lattice::new([[2.0, 0.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 3.0]]).unwrap();
        let s = Structure::new(vec![el("Si")], vec![[0.5, 0.5, 0.0]], l).unwrap();
        let r = s.frac_to_cart(0).unwrap();
        assert_relative_eq!(r[0], 1.5, epsilon = 1e-14);
        assert_relative_eq!(r[1], 1.0, epsilon = 1e-14);
        assert_relative_eq!(r[2], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn frac_to_cart_index_error() {
        let s = Structure::new(vec![el("Si")], vec![[0.0; 3]], Lattice::cubic(1.0).unwrap())
            .unwrap();
        assert_eq!(
            s.frac_to_cart(1),
            Err(StructureError::IndexOutOfRange { index: 1, n: 1 })
        );
    }

    #[test]
    fn min_image_wraps_across_boundary() {
        let s = Structure::new(
            vec![el("Ar"), el("Ar")],
            vec![[0.1, 0.0, 0.0], [0.9, 0.0, 0.0]],
            Lattice::cubic(10.0).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(s.min_image_distance(0, 1).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(s.min_image_distance(0, 0).unwrap(), 0.0);
    }

    #[test]
    fn min_image_body_center() {
        let s = Structure::new(
            vec![el("Ar"), el("Ar")],
            vec![[0.0, 0.0, 0.0], [0.5, 0.5, 0.5]],
            Lattice::cubic(4.0).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(
            s.min_image_distance(0, 1).unwrap(),
            2.0 * 3.0f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn min_image_symmetric_and_translation_invariant() {
        let l = Lattice::new([[3.0, 0.2, 0.0], [0.0, 4.0, 0.3], [0.1, 0.0, 5.0]]).unwrap();
        let s = Structure::new(
            vec![el("Si"), el("O")],
            vec![[0.12, 0.77, 0.31], [0.85, 0.02, 0.64]],
            l,
        )
        .unwrap();
        let d = s.min_image_distance(0, 1).unwrap();
        assert_relative_eq!(d, s.min_image_distance(1, 0).unwrap(), epsilon = 1e-12);
        let t = [0.37, 0.91, 0.55];
        let shifted: Vec<[f64; 3]> = s
            .frac_coords()
            .iter()
            .map(|f| [f[0] + t[0], f[1] + t[1], f[2] + t[2]])
            .collect();
        let s2 = s.with_frac_coords(shifted).unwrap();
        assert_relative_eq!(d, s2.min_image_distance(0, 1).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn wrap_is_idempotent_and_half_open() {
        for x in [-2.3, -1.0, -1e-17, 0.0, 0.4, 1.0, 1.7, 2.0] {
            let w = wrap_frac([x, x, x]);
            assert!(w[0] >= 0.0 && w[0] < 1.0, "wrap({x}) = {}", w[0]);
            assert_eq!(wrap_frac(w), w);
        }
    }

    #[test]
    fn supercell_identity() {
        let s = Structure::new(
            vec![el("Si"), el("O")],
            vec![[0.0, 0.0, 0.0], [0.25, 0.25, 0.25]],
            Lattice::cubic(3.0).unwrap(),
        )
        .unwrap();
        let sc = make_supercell(&s, [1, 1, 1]).unwrap();
        assert_eq!(sc.structure(), &s);
    }

    #[test]
    fn supercell_counts_and_map() {
        let s = Structure::new(
            vec![el("Si"), el("O")],
            vec![[0.0, 0.0, 0.0], [0.25, 0.25, 0.25]],
            Lattice::cubic(3.0).unwrap(),
        )
        .unwrap();
        let sc = make_supercell(&s, [2, 2, 2]).unwrap();
        assert_eq!(sc.structure().n_atoms(), 16);
        assert_eq!(sc.map().len(), 16);
        for (idx, &(b, cell)) in sc.map().iter().enumerate() {
            assert_eq!(sc.atom_index(b, cell), idx);
            assert_eq!(sc.structure().species()[idx], s.species()[b]);
        }
        let rows = sc.structure().lattice().rows();
        assert_eq!(rows[0][0], 6.0);
    }

    #[test]
    fn supercell_rejects_zero_repeat() {
        let s = Structure::new(vec![el("Si")], vec![[0.0; 3]], Lattice::cubic(3.0).unwrap())
            .unwrap();
        assert!(matches!(
            make_supercell(&s, [0, 1, 1]),
            Err(StructureError::InvalidRepeat { .. })
        ));
    }

    #[test]
    fn lattice_rejects_left_handed() {
        assert!(Lattice::new([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
    }

    #[test]
    fn lattice_parameter_round_trip() {
        let l = Lattice::from_parameters(3.0, 4.0, 5.0, 80.0, 95.0, 110.0).unwrap();
        let len = l.lengths();
        let ang = l.angles();
        assert_relative_eq!(len[0], 3.0, epsilon = 1e-10);
        assert_relative_eq!(len[1], 4.0, epsilon = 1e-10);
        assert_relative_eq!(len[2], 5.0, epsilon = 1e-10);
        assert_relative_eq!(ang[0], 80.0, epsilon = 1e-8);
        assert_relative_eq!(ang[1], 95.0, epsilon = 1e-8);
        assert_relative_eq!(ang[2], 110.0, epsilon = 1e-8);
    }

    #[test]
    fn inverse_is_inverse() {
        let l = Lattice::new([[2.0, 0.3, 0.0], [1.0, 2.0, 0.1], [0.2, 0.0, 3.0]]).unwrap();
        let id = mat_mul(l.rows(), &l.inverse());
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(id[i][j], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn content_hash_distinguishes_structures() {
        let a = Structure::new(vec![el("Si")], vec![[0.0; 3]], Lattice::cubic(3.0).unwrap())
            .unwrap();
        let b = Structure::new(vec![el("Si")], vec![[0.0, 0.0, 0.1]], Lattice::cubic(3.0).unwrap())
            .unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), a.clone().content_hash());
    }
}
