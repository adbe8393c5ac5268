//! Geometry and homology of the periodic `L x L` lattice.
//!
//! Plaquettes are indexed row-major, `p = r * L + c`. Edges are split into
//! two sublattices of `L^2` edges each:
//!
//! * horizontal edges `h(r, c) = r * L + c` are crossed by a horizontal move,
//!   i.e. they separate plaquette `(r, c)` from `(r, c + 1)`;
//! * vertical edges `v(r, c) = L^2 + r * L + c` separate `(r, c)` from
//!   `(r + 1, c)`.
//!
//! With this convention an error string that hops an anyon around a row of
//! plaquettes flips a full row of horizontal edges, and the homology cuts are
//! primal cycles: `cut_1 = { h(r, 0) }` and `cut_2 = { v(0, c) }`.

use crate::error::{Error, Result};

pub type PlaquetteId = usize;
pub type EdgeId = usize;

/// Neighbor slot order used by every adjacency table: right, left, down, up.
pub const DIRECTIONS: [(isize, isize); 4] = [(0, 1), (0, -1), (1, 0), (-1, 0)];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusGeometry {
    size: usize,
    neighbors: Vec<[u32; 4]>,
    boundary: Vec<[u32; 4]>,
    edge_plaquettes: Vec<[u32; 2]>,
    cuts: [Vec<EdgeId>; 2],
    on_cut: Vec<u8>,
}

impl TorusGeometry {
    /// Builds the lattice tables. Sizes below 3 are rejected because the four
    /// neighbors of a plaquette stop being distinct.
    pub fn new(size: usize) -> Result<Self> {
        if size < 3 {
            return Err(Error::InvalidSize(size));
        }
        let l = size;
        let n = l * l;
        let mut neighbors = Vec::with_capacity(n);
        let mut boundary = Vec::with_capacity(n);
        for r in 0..l {
            for c in 0..l {
                let mut nb = [0u32; 4];
                for (slot, &(dr, dc)) in DIRECTIONS.iter().enumerate() {
                    nb[slot] = wrap_index(l, r as isize + dr, c as isize + dc) as u32;
                }
                neighbors.push(nb);
                let left = (c + l - 1) % l;
                let up = (r + l - 1) % l;
                boundary.push([
                    (r * l + c) as u32,
                    (r * l + left) as u32,
                    (n + r * l + c) as u32,
                    (n + up * l + c) as u32,
                ]);
            }
        }
        let mut edge_plaquettes = Vec::with_capacity(2 * n);
        for r in 0..l {
            for c in 0..l {
                edge_plaquettes.push([(r * l + c) as u32, (r * l + (c + 1) % l) as u32]);
            }
        }
        for r in 0..l {
            for c in 0..l {
                edge_plaquettes.push([(r * l + c) as u32, (((r + 1) % l) * l + c) as u32]);
            }
        }
        let cut_h: Vec<EdgeId> = (0..l).map(|r| r * l).collect();
        let cut_v: Vec<EdgeId> = (0..l).map(|c| n + c).collect();
        let mut on_cut = vec![0u8; 2 * n];
        for &e in &cut_h {
            on_cut[e] |= 0b01;
        }
        for &e in &cut_v {
            on_cut[e] |= 0b10;
        }
        Ok(Self {
            size,
            neighbors,
            boundary,
            edge_plaquettes,
            cuts: [cut_h, cut_v],
            on_cut,
        })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn plaquette_count(&self) -> usize {
        self.size * self.size
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        2 * self.size * self.size
    }

    #[inline]
    pub fn plaquette(&self, row: isize, col: isize) -> PlaquetteId {
        wrap_index(self.size, row, col)
    }

    #[inline]
    pub fn coords(&self, p: PlaquetteId) -> (usize, usize) {
        (p / self.size, p % self.size)
    }

    /// Neighbors in slot order right, left, down, up.
    #[inline]
    pub fn neighbors(&self, p: PlaquetteId) -> [PlaquetteId; 4] {
        self.neighbors[p].map(|q| q as usize)
    }

    #[inline]
    pub(crate) fn neighbor_table(&self) -> &[[u32; 4]] {
        &self.neighbors
    }

    /// Boundary edges of `p`; slot `i` is the edge shared with `neighbors(p)[i]`.
    #[inline]
    pub fn boundary(&self, p: PlaquetteId) -> [EdgeId; 4] {
        self.boundary[p].map(|e| e as usize)
    }

    #[inline]
    pub fn plaquettes_of_edge(&self, e: EdgeId) -> (PlaquetteId, PlaquetteId) {
        let [a, b] = self.edge_plaquettes[e];
        (a as usize, b as usize)
    }

    pub fn edge_between(&self, p: PlaquetteId, q: PlaquetteId) -> Result<EdgeId> {
        let slot = self.neighbors[p]
            .iter()
            .position(|&x| x as usize == q)
            .ok_or(Error::NotAdjacent(p, q))?;
        Ok(self.boundary[p][slot] as usize)
    }

    /// Edge between `p` and the neighbor in `slot` (see [`DIRECTIONS`]).
    #[inline]
    pub fn edge_towards(&self, p: PlaquetteId, slot: usize) -> EdgeId {
        self.boundary[p][slot] as usize
    }

    /// The `L` edges crossed by homology cut `k` (0 or 1).
    pub fn cut(&self, k: usize) -> &[EdgeId] {
        &self.cuts[k]
    }

    /// Bitmask of the cuts containing `e`: bit 0 for cut 1, bit 1 for cut 2.
    #[inline]
    pub fn cut_mask(&self, e: EdgeId) -> u8 {
        self.on_cut[e]
    }

    pub fn winding_parities<I>(&self, flips: I) -> (bool, bool)
    where
        I: IntoIterator<Item = EdgeId>,
    {
        let mask = flips.into_iter().fold(0u8, |acc, e| acc ^ self.on_cut[e]);
        (mask & 1 == 1, mask & 2 == 2)
    }

    /// Shortest periodic taxicab distance between two plaquettes.
    pub fn distance(&self, p: PlaquetteId, q: PlaquetteId) -> usize {
        let (r1, c1) = self.coords(p);
        let (r2, c2) = self.coords(q);
        axis_distance(self.size, r1, r2) + axis_distance(self.size, c1, c2)
    }

    /// The four edges meeting at the lattice vertex below-right of plaquette
    /// `(r, c)`. Flipping them leaves every syndrome unchanged: this is the
    /// elementary contractible error loop.
    pub fn vertex_loop(&self, row: isize, col: isize) -> [EdgeId; 4] {
        let l = self.size;
        let n = l * l;
        let p = self.plaquette(row, col);
        let below = self.plaquette(row + 1, col);
        let right = self.plaquette(row, col + 1);
        [p, below, n + p, n + right]
    }

    /// A full row of horizontal edges; winds once around the torus.
    pub fn row_cycle(&self, row: usize) -> Vec<EdgeId> {
        let l = self.size;
        (0..l).map(|c| (row % l) * l + c).collect()
    }

    /// A full column of vertical edges; winds once around the torus.
    pub fn column_cycle(&self, col: usize) -> Vec<EdgeId> {
        let l = self.size;
        (0..l).map(|r| l * l + r * l + col % l).collect()
    }
}

#[inline]
fn wrap_index(l: usize, row: isize, col: isize) -> usize {
    let li = l as isize;
    (row.rem_euclid(li) as usize) * l + col.rem_euclid(li) as usize
}

#[inline]
pub(crate) fn axis_distance(l: usize, a: usize, b: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(l - d)
}
