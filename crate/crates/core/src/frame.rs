//! Pauli frame of a single trajectory: which edges carry a `sigma^x` flip,
//! the plaquette syndromes they induce, and a registry of live anyons.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{EdgeId, PlaquetteId, TorusGeometry};

const NONE: u32 = u32::MAX;

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"DTCF";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Initial state of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// Toric code ground state: no flips.
    Ground,
    /// Every edge flipped independently with probability 1/2.
    Mixed,
}

#[derive(Debug, Clone)]
pub struct PauliFrame {
    size: usize,
    flips: Vec<u64>,
    syndrome: Vec<u64>,
    anyons: Vec<u32>,
    slot: Vec<u32>,
    winding: u8,
}

impl PauliFrame {
    pub fn ground(geo: &TorusGeometry) -> Self {
        let edges = geo.edge_count();
        let plaquettes = geo.plaquette_count();
        Self {
            size: geo.size(),
            flips: vec![0; words(edges)],
            syndrome: vec![0; words(plaquettes)],
            anyons: Vec::new(),
            slot: vec![NONE; plaquettes],
            winding: 0,
        }
    }

    pub fn uniform_random<R: Rng + ?Sized>(geo: &TorusGeometry, rng: &mut R) -> Self {
        let mut frame = Self::ground(geo);
        for e in 0..geo.edge_count() {
            if rng.gen::<bool>() {
                frame.apply_flip(geo, e);
            }
        }
        frame
    }

    pub fn new<R: Rng + ?Sized>(geo: &TorusGeometry, mode: InitMode, rng: &mut R) -> Self {
        match mode {
            InitMode::Ground => Self::ground(geo),
            InitMode::Mixed => Self::uniform_random(geo, rng),
        }
    }

    /// Builds a frame from a set of flipped edges.
    pub fn from_flips<I>(geo: &TorusGeometry, flips: I) -> Self
    where
        I: IntoIterator<Item = EdgeId>,
    {
        let mut frame = Self::ground(geo);
        for e in flips {
            frame.apply_flip(geo, e);
        }
        frame
    }

    /// Applies `sigma^x` on edge `e`, toggling the two adjacent syndromes.
    #[inline]
    pub fn apply_flip(&mut self, geo: &TorusGeometry, e: EdgeId) {
        toggle(&mut self.flips, e);
        let (a, b) = geo.plaquettes_of_edge(e);
        self.toggle_anyon(a);
        self.toggle_anyon(b);
        self.winding ^= geo.cut_mask(e);
    }

    #[inline]
    fn toggle_anyon(&mut self, p: PlaquetteId) {
        toggle(&mut self.syndrome, p);
        let s = self.slot[p];
        if s == NONE {
            self.slot[p] = self.anyons.len() as u32;
            self.anyons.push(p as u32);
        } else {
            let last = self.anyons.pop().expect("registry is nonempty");
            if last as usize != p {
                self.anyons[s as usize] = last;
                self.slot[last as usize] = s;
            }
            self.slot[p] = NONE;
        }
    }

    /// Rebuilds syndromes, registry and winding from the flip bits alone.
    pub fn recompute_from_scratch(&self, geo: &TorusGeometry) -> Self {
        Self::from_flips(geo, self.flipped_edges())
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn is_flipped(&self, e: EdgeId) -> bool {
        bit(&self.flips, e)
    }

    #[inline]
    pub fn has_anyon(&self, p: PlaquetteId) -> bool {
        self.slot[p] != NONE
    }

    #[inline]
    pub fn syndrome(&self, p: PlaquetteId) -> bool {
        bit(&self.syndrome, p)
    }

    #[inline]
    pub fn anyon_count(&self) -> usize {
        self.anyons.len()
    }

    /// The `i`-th registered anyon; registry order is unspecified but
    /// deterministic for a given history.
    #[inline]
    pub fn anyon_at(&self, i: usize) -> PlaquetteId {
        self.anyons[i] as usize
    }

    pub fn anyons(&self) -> impl Iterator<Item = PlaquetteId> + '_ {
        self.anyons.iter().map(|&p| p as usize)
    }

    /// Occupied plaquettes in ascending order.
    pub fn sorted_anyons(&self) -> Vec<PlaquetteId> {
        let mut v: Vec<_> = self.anyons().collect();
        v.sort_unstable();
        v
    }

    #[inline]
    pub fn winding(&self) -> (bool, bool) {
        (self.winding & 1 == 1, self.winding & 2 == 2)
    }

    pub fn flipped_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        let edges = 2 * self.size * self.size;
        set_bits(&self.flips).take_while(move |&e| e < edges)
    }

    pub fn flip_count(&self) -> usize {
        self.flips.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Occupancy as `0.0`/`1.0` per plaquette.
    pub fn occupancy(&self, out: &mut [f64]) {
        for (p, o) in out.iter_mut().enumerate() {
            *o = if self.slot[p] != NONE { 1.0 } else { 0.0 };
        }
    }

    /// Snapshot layout: 16-byte header (`DTCF`, version u32, L u32, reserved
    /// u32), the time as f64, then `ceil(2L^2 / 8)` bytes of edge flips with
    /// edge `e` at bit `e % 8` of byte `e / 8`. All fields little-endian.
    pub fn write_snapshot<W: Write>(&self, time: f64, mut out: W) -> Result<()> {
        out.write_all(&SNAPSHOT_MAGIC)?;
        out.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        out.write_all(&(self.size as u32).to_le_bytes())?;
        out.write_all(&0u32.to_le_bytes())?;
        out.write_all(&time.to_le_bytes())?;
        let edges = 2 * self.size * self.size;
        let bytes: Vec<u8> = self
            .flips
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .take(edges.div_ceil(8))
            .collect();
        out.write_all(&bytes)?;
        Ok(())
    }

    /// Reads a snapshot written by [`PauliFrame::write_snapshot`].
    pub fn read_snapshot<R: Read>(mut input: R) -> Result<(TorusGeometry, PauliFrame, f64)> {
        let mut header = [0u8; 24];
        input
            .read_exact(&mut header)
            .map_err(|_| Error::Snapshot("truncated header".into()))?;
        if header[0..4] != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let size = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let time = f64::from_le_bytes(header[16..24].try_into().unwrap());
        let geo = TorusGeometry::new(size)?;
        let edges = geo.edge_count();
        let mut bytes = vec![0u8; edges.div_ceil(8)];
        input
            .read_exact(&mut bytes)
            .map_err(|_| Error::Snapshot("truncated edge array".into()))?;
        let flips = (0..edges).filter(|&e| bytes[e / 8] >> (e % 8) & 1 == 1);
        let frame = PauliFrame::from_flips(&geo, flips);
        Ok((geo, frame, time))
    }
}

/// Frames compare by state, not by registry order.
impl PartialEq for PauliFrame {
    fn eq(&self, other: &Self) -> bool {
        self.size == other.size
            && self.flips == other.flips
            && self.syndrome == other.syndrome
            && self.winding == other.winding
            && self
                .slot
                .iter()
                .zip(&other.slot)
                .all(|(a, b)| (*a == NONE) == (*b == NONE))
            && self.sorted_anyons() == other.sorted_anyons()
    }
}

impl Eq for PauliFrame {}

#[inline]
fn words(bits: usize) -> usize {
    bits.div_ceil(64)
}

#[inline]
fn toggle(v: &mut [u64], i: usize) {
    v[i >> 6] ^= 1u64 << (i & 63);
}

#[inline]
fn bit(v: &[u64], i: usize) -> bool {
    v[i >> 6] >> (i & 63) & 1 == 1
}

fn set_bits(v: &[u64]) -> impl Iterator<Item = usize> + '_ {
    v.iter().enumerate().flat_map(|(w, &word)| {
        let mut rest = word;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let b = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(w * 64 + b)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_consistent(frame: &PauliFrame, geo: &TorusGeometry) {
        let fresh = frame.recompute_from_scratch(geo);
        assert_eq!(frame, &fresh);
        assert_eq!(frame.anyon_count() % 2, 0);
        for p in 0..geo.plaquette_count() {
            let parity = geo
                .boundary(p)
                .iter()
                .filter(|&&e| frame.is_flipped(e))
                .count()
                % 2;
            assert_eq!(frame.syndrome(p), parity == 1);
            assert_eq!(frame.has_anyon(p), frame.syndrome(p));
        }
        assert_eq!(frame.winding(), geo.winding_parities(frame.flipped_edges()));
    }

    #[test]
    fn ground_state_is_empty() {
        for l in [3, 4, 9] {
            let geo = TorusGeometry::new(l).unwrap();
            let f = PauliFrame::ground(&geo);
            assert_eq!(f.anyon_count(), 0);
            assert_eq!(f.winding(), (false, false));
            assert_eq!(f.recompute_from_scratch(&geo), f);
        }
    }

    #[test]
    fn single_flip_creates_pair_on_adjacent_plaquettes() {
        let geo = TorusGeometry::new(5).unwrap();
        for e in 0..geo.edge_count() {
            let mut f = PauliFrame::ground(&geo);
            f.apply_flip(&geo, e);
            assert_eq!(f.anyon_count(), 2);
            let (a, b) = geo.plaquettes_of_edge(e);
            let mut want = vec![a, b];
            want.sort_unstable();
            assert_eq!(f.sorted_anyons(), want);
            let ground = PauliFrame::ground(&geo);
            let differing = (0..geo.plaquette_count())
                .filter(|&p| f.syndrome(p) != ground.syndrome(p))
                .count();
            assert_eq!(differing, 2);
        }
    }

    #[test]
    fn flip_is_an_involution() {
        let geo = TorusGeometry::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut f = PauliFrame::uniform_random(&geo, &mut rng);
        let before = f.clone();
        for e in 0..geo.edge_count() {
            f.apply_flip(&geo, e);
            f.apply_flip(&geo, e);
            assert_eq!(f, before);
        }
    }

    #[test]
    fn loops_and_cycles() {
        let geo = TorusGeometry::new(4).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let f = PauliFrame::from_flips(&geo, geo.vertex_loop(r, c));
                assert_eq!(f.anyon_count(), 0);
                assert_eq!(f.winding(), (false, false));
            }
        }
        let f = PauliFrame::from_flips(&geo, geo.row_cycle(2));
        assert_eq!(f.anyon_count(), 0);
        assert_eq!(f.winding(), (true, false));
        let f = PauliFrame::from_flips(&geo, geo.column_cycle(1));
        assert_eq!(f.anyon_count(), 0);
        assert_eq!(f.winding(), (false, true));
    }

    #[test]
    fn incremental_matches_recomputation_after_many_flips() {
        let geo = TorusGeometry::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut f = PauliFrame::ground(&geo);
        for i in 0..100_000 {
            f.apply_flip(&geo, rng.gen_range(0..geo.edge_count()));
            if i % 10_000 == 0 {
                check_consistent(&f, &geo);
            }
        }
        check_consistent(&f, &geo);
    }

    #[test]
    fn uniform_random_parity_is_even() {
        let geo = TorusGeometry::new(7).unwrap();
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = PauliFrame::uniform_random(&geo, &mut rng);
            check_consistent(&f, &geo);
        }
    }

    #[test]
    fn uniform_random_density_is_one_half() {
        // each syndrome bit is an XOR of four fair coins
        let geo = TorusGeometry::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<f64> = (0..1000)
            .map(|_| PauliFrame::uniform_random(&geo, &mut rng).anyon_count() as f64 / 256.0)
            .collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        // per-sample variance of the density is at most 1/(4 L^2)
        let sigma = (0.25 / 256.0 / 1000.0f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn snapshot_round_trip_and_rejections() {
        let geo = TorusGeometry::new(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = PauliFrame::uniform_random(&geo, &mut rng);
        let mut buf = Vec::new();
        f.write_snapshot(12.5, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 8 + 50usize.div_ceil(8));
        assert_eq!(&buf[0..4], b"DTCF");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 5);
        let (g2, f2, t) = PauliFrame::read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(g2, geo);
        assert_eq!(f2, f);
        assert_eq!(t, 12.5);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(PauliFrame::read_snapshot(bad.as_slice()).is_err());
        assert!(PauliFrame::read_snapshot(&buf[..20]).is_err());
        assert!(PauliFrame::read_snapshot(&buf[..buf.len() - 1]).is_err());
    }
}
