//! Clustering decoder used as the operational topological-order diagnostic.
//!
//! Every anyon seeds a cluster. In each synchronous round all clusters with
//! an odd number of anyons grow by one taxicab step; clusters whose regions
//! overlap merge. The number of rounds until every cluster is even is the
//! circuit depth `d`. Anyons are then paired greedily inside each cluster and
//! joined along deterministic shortest paths.

use crate::frame::PauliFrame;
use crate::lattice::{axis_distance, EdgeId, PlaquetteId, TorusGeometry};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeResult {
    /// Edges whose flips annihilate every syndrome.
    pub correction: Vec<EdgeId>,
    /// Number of growth rounds.
    pub depth: usize,
    /// Number of clusters after each round.
    pub cluster_trace: Vec<usize>,
}

struct Clusters {
    parent: Vec<u32>,
    parity: Vec<bool>,
    cells: Vec<Vec<u32>>,
}

impl Clusters {
    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let gp = self.parent[self.parent[i as usize] as usize];
            self.parent[i as usize] = gp;
            i = gp;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let (big, small) = if self.cells[ra as usize].len() >= self.cells[rb as usize].len() {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        self.parity[big as usize] ^= self.parity[small as usize];
        let moved = std::mem::take(&mut self.cells[small as usize]);
        self.cells[big as usize].extend(moved);
        big
    }
}

pub fn decode(frame: &PauliFrame, geo: &TorusGeometry) -> DecodeResult {
    let seeds = frame.sorted_anyons();
    if seeds.is_empty() {
        return DecodeResult {
            correction: Vec::new(),
            depth: 0,
            cluster_trace: Vec::new(),
        };
    }
    let k = seeds.len();
    let mut owner = vec![NONE; geo.plaquette_count()];
    let mut cl = Clusters {
        parent: (0..k as u32).collect(),
        parity: vec![true; k],
        cells: seeds.iter().map(|&p| vec![p as u32]).collect(),
    };
    for (i, &p) in seeds.iter().enumerate() {
        owner[p] = i as u32;
    }

    let mut depth = 0;
    let mut cluster_trace = Vec::new();
    let mut claims: Vec<(u32, u32)> = Vec::new();
    loop {
        let odd_roots: Vec<u32> = (0..k as u32)
            .filter(|&i| cl.parent[i as usize] == i && cl.parity[i as usize])
            .collect();
        if odd_roots.is_empty() {
            break;
        }
        depth += 1;
        claims.clear();
        for &root in &odd_roots {
            for &cell in &cl.cells[root as usize] {
                for q in geo.neighbors(cell as usize) {
                    if owner[q] != root {
                        claims.push((q as u32, root));
                    }
                }
            }
        }
        for &(q, root) in &claims {
            let o = owner[q as usize];
            if o == NONE {
                let r = cl.find(root);
                owner[q as usize] = r;
                cl.cells[r as usize].push(q);
            } else {
                cl.union(o, root);
            }
        }
        // owners must name roots for the membership test above
        for o in owner.iter_mut().filter(|o| **o != NONE) {
            *o = cl.find(*o);
        }
        let clusters = (0..k as u32)
            .filter(|&i| cl.parent[i as usize] == i)
            .count();
        cluster_trace.push(clusters);
    }

    let mut members: Vec<Vec<PlaquetteId>> = vec![Vec::new(); k];
    for (i, &p) in seeds.iter().enumerate() {
        let r = cl.find(i as u32);
        members[r as usize].push(p);
    }
    let mut correction = Vec::new();
    for group in members.iter().filter(|g| !g.is_empty()) {
        for (a, b) in greedy_pairs(group, geo) {
            correction.extend(shortest_path(a, b, geo));
        }
    }
    DecodeResult {
        correction,
        depth,
        cluster_trace,
    }
}

/// Pairs anyons by repeatedly taking the closest remaining pair; ties go to
/// the lexicographically smallest index pair.
fn greedy_pairs(group: &[PlaquetteId], geo: &TorusGeometry) -> Vec<(PlaquetteId, PlaquetteId)> {
    let n = group.len();
    let mut candidates = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            candidates.push((geo.distance(group[i], group[j]), i, j));
        }
    }
    candidates.sort_unstable();
    let mut used = vec![false; n];
    let mut pairs = Vec::with_capacity(n / 2);
    for (_, i, j) in candidates {
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            pairs.push((group[i], group[j]));
        }
    }
    pairs
}

/// Edges of the path from `a` to `b` that first moves along the row, then
/// along the column, each axis taking the shorter way around (positive
/// direction on ties).
pub fn shortest_path(a: PlaquetteId, b: PlaquetteId, geo: &TorusGeometry) -> Vec<EdgeId> {
    let l = geo.size();
    let (ra, ca) = geo.coords(a);
    let (rb, cb) = geo.coords(b);
    let mut path = Vec::with_capacity(geo.distance(a, b));
    let (dc, sc) = step_along(l, ca, cb);
    let (dr, sr) = step_along(l, ra, rb);
    let (mut r, mut c) = (ra as isize, ca as isize);
    for _ in 0..dc {
        let here = geo.plaquette(r, c);
        let slot = if sc > 0 { 0 } else { 1 };
        path.push(geo.edge_towards(here, slot));
        c += sc;
    }
    for _ in 0..dr {
        let here = geo.plaquette(r, c);
        let slot = if sr > 0 { 2 } else { 3 };
        path.push(geo.edge_towards(here, slot));
        r += sr;
    }
    path
}

fn step_along(l: usize, from: usize, to: usize) -> (usize, isize) {
    let forward = (to + l - from) % l;
    let backward = (l - forward) % l;
    debug_assert_eq!(forward.min(backward), axis_distance(l, from, to));
    if forward <= backward {
        (forward, 1)
    } else {
        (backward, -1)
    }
}

/// Winding parities of the accumulated flips completed by the decoder's
/// correction. Either bit set means a logical error relative to the ground
/// state the trajectory started from.
pub fn logical_error(frame: &PauliFrame, geo: &TorusGeometry) -> (bool, bool) {
    let result = decode(frame, geo);
    logical_bits(frame, &result, geo)
}

pub fn logical_bits(
    frame: &PauliFrame,
    result: &DecodeResult,
    geo: &TorusGeometry,
) -> (bool, bool) {
    let (w1, w2) = frame.winding();
    let (c1, c2) = geo.winding_parities(result.correction.iter().copied());
    (w1 ^ c1, w2 ^ c2)
}
