//! Periodic neighbor lists.
//!
//! Directed pair convention: for every physical bond the list carries both
//! (i, j, offset) and (j, i, -offset). Self-image pairs (i == j, offset != 0)
//! are included, so a 1-atom cell still sees its periodic neighbors.

use crate::structure::{dot, Structure, StructureError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborPair {
    pub i: usize,
    pub j: usize,
    /// Integer lattice offset of the j image.
    pub offset: [i64; 3],
    pub distance: f64,
    /// Cartesian displacement from atom i to the j image.
    pub displacement: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct NeighborList {
    pub cutoff: f64,
    pub pairs: Vec<NeighborPair>,
}

impl NeighborList {
    /// Pairs grouped by first atom index; pairs are sorted so each group is
    /// a contiguous slice.
    pub fn pairs_of(&self, i: usize) -> impl Iterator<Item = &NeighborPair> {
        let start = self.pairs.partition_point(|p| p.i < i);
        self.pairs[start..].iter().take_while(move |p| p.i == i)
    }
}

/// All periodic pairs within `cutoff`.
///
/// Uses an O(n) cell-list sweep when every lattice plane spacing exceeds
/// 2·cutoff; otherwise falls back to exact enumeration over the image range
/// required by the cell geometry (correct for arbitrarily small cells).
pub fn build_neighbor_list(s: &Structure, cutoff: f64) -> Result<NeighborList, StructureError> {
    if !(cutoff > 0.0) {
        return Err(StructureError::InvalidCutoff(cutoff));
    }
    let spacings = s.lattice().plane_spacings();
    let mut pairs = if spacings.iter().all(|&d| d >= 2.0 * cutoff) {
        cell_list_pairs(s, cutoff)
    } else {
        image_sweep_pairs(s, cutoff)
    };
    pairs.sort_by(|a, b| {
        (a.i, a.j, a.offset)
            .partial_cmp(&(b.i, b.j, b.offset))
            .unwrap()
    });
    Ok(NeighborList { cutoff, pairs })
}

/// Exact enumeration over all image offsets that can reach within cutoff.
fn image_sweep_pairs(s: &Structure, cutoff: f64) -> Vec<NeighborPair> {
    let spacings = s.lattice().plane_spacings();
    let reach = |d: f64| (cutoff / d).ceil() as i64 + 1;
    let (ra, rb, rc) = (reach(spacings[0]), reach(spacings[1]), reach(spacings[2]));
    let cart = s.cart_coords();
    let n = s.n_atoms();
    let rows = s.lattice().rows();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for n0 in -ra..=ra {
                for n1 in -rb..=rb {
                    for n2 in -rc..=rc {
                        if i == j && n0 == 0 && n1 == 0 && n2 == 0 {
                            continue;
                        }
                        let mut disp = [0.0; 3];
                        for x in 0..3 {
                            disp[x] = cart[j][x] - cart[i][x]
                                + n0 as f64 * rows[0][x]
                                + n1 as f64 * rows[1][x]
                                + n2 as f64 * rows[2][x];
                        }
                        let d2 = dot(disp, disp);
                        if d2 <= cutoff * cutoff + 1e-12 {
                            pairs.push(NeighborPair {
                                i,
                                j,
                                offset: [n0, n1, n2],
                                distance: d2.sqrt(),
                                displacement: disp,
                            });
                        }
                    }
                }
            }
        }
    }
    pairs
}

/// Cell-list sweep; requires every plane spacing >= 2·cutoff so only the
/// offsets {-1,0,1} can contribute and each bin pair is visited once.
fn cell_list_pairs(s: &Structure, cutoff: f64) -> Vec<NeighborPair> {
    let spacings = s.lattice().plane_spacings();
    let n = s.n_atoms();
    let rows = s.lattice().rows();
    let frac = s.frac_coords();
    let cart = s.cart_coords();

    let bins: [usize; 3] = std::array::from_fn(|k| ((spacings[k] / cutoff).floor() as usize).max(1));
    let bin_of = |f: [f64; 3]| -> [usize; 3] {
        std::array::from_fn(|k| ((f[k] * bins[k] as f64) as usize).min(bins[k] - 1))
    };
    let mut grid: Vec<Vec<usize>> = vec![Vec::new(); bins[0] * bins[1] * bins[2]];
    let flat = |b: [usize; 3]| (b[0] * bins[1] + b[1]) * bins[2] + b[2];
    for (a, &f) in frac.iter().enumerate() {
        grid[flat(bin_of(f))].push(a);
    }

    let mut pairs = Vec::new();
    let c2 = cutoff * cutoff + 1e-12;
    for i in 0..n {
        let bi = bin_of(frac[i]);
        for d0 in -1i64..=1 {
            for d1 in -1i64..=1 {
                for d2 in -1i64..=1 {
                    let raw = [bi[0] as i64 + d0, bi[1] as i64 + d1, bi[2] as i64 + d2];
                    let mut cell_off = [0i64; 3];
                    let mut bj = [0usize; 3];
                    for k in 0..3 {
                        let m = bins[k] as i64;
                        cell_off[k] = raw[k].div_euclid(m);
                        bj[k] = raw[k].rem_euclid(m) as usize;
                    }
                    for &j in &grid[flat(bj)] {
                        if j == i && cell_off == [0, 0, 0] {
                            continue;
                        }
                        let mut disp = [0.0; 3];
                        for x in 0..3 {
                            disp[x] = cart[j][x] - cart[i][x]
                                + cell_off[0] as f64 * rows[0][x]
                                + cell_off[1] as f64 * rows[1][x]
                                + cell_off[2] as f64 * rows[2][x];
                        }
                        let d2v = dot(disp, disp);
                        if d2v <= c2 {
                            pairs.push(NeighborPair {
                                i,
                                j,
                                offset: cell_off,
                                distance: d2v.sqrt(),
                                displacement: disp,
                            });
                        }
                    }
                }
            }
        }
    }
    pairs
}
