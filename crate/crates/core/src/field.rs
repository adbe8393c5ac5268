//! The classical cellular-automaton field that steers anyon motion.
//!
//! A single-site update of plaquette `p` reads
//!
//! ```text
//! phi'_p = avg_p + occ_p - phi_p / L^2
//! ```
//!
//! where `avg_p` is the mean of the four neighboring field values and
//! `occ_p` is 1 when `p` holds an anyon.
//!
//! The synchronous sweep takes the penalty on the neighbor average instead,
//! `phi'_p = avg_p + occ_p - avg_p / L^2`. Applied to every site at once,
//! `phi_p / L^2` gives the checkerboard mode the eigenvalue `-(1 + 1/L^2)` on
//! even lattices and the sweep diverges. With the average every mode
//! contracts by at least `1 - 1/L^2` and `|phi| <= L^2` whenever the field
//! starts inside that bound. Both forms share the uniform fixed point `L^2`.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::frame::PauliFrame;
use crate::lattice::{PlaquetteId, TorusGeometry};

/// How a field-update event acts on the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FieldUpdate {
    /// One event updates every plaquette from the pre-sweep field.
    #[default]
    Sync,
    /// One event updates a single uniformly chosen plaquette.
    Async,
}

/// Sweep batches at least this long go through the spectral path.
const SPECTRAL_THRESHOLD: u64 = 24;

#[derive(Debug, Clone)]
pub struct CaField {
    size: usize,
    contraction: f64,
    phi: Vec<f64>,
    scratch: Vec<f64>,
    occupancy: Vec<f64>,
    spectral: Option<Arc<Spectral>>,
    zero: bool,
}

impl CaField {
    pub fn new(geo: &TorusGeometry) -> Self {
        let n = geo.plaquette_count();
        let l2 = n as f64;
        Self {
            size: geo.size(),
            contraction: 1.0 - 1.0 / l2,
            phi: vec![0.0; n],
            scratch: vec![0.0; n],
            occupancy: vec![0.0; n],
            spectral: None,
            zero: true,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.phi
    }

    #[inline]
    pub fn value(&self, p: PlaquetteId) -> f64 {
        self.phi[p]
    }

    /// Overwrites the field; used by tests and tooling.
    pub fn set_values(&mut self, values: &[f64]) {
        self.phi.copy_from_slice(values);
        self.zero = self.phi.iter().all(|&x| x == 0.0);
    }

    pub fn is_identically_zero(&self) -> bool {
        self.zero && self.phi.iter().all(|&x| x == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.phi.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    /// One synchronous sweep: every plaquette reads the old field.
    pub fn sweep_update(&mut self, frame: &PauliFrame, geo: &TorusGeometry) {
        if self.zero && frame.anyon_count() == 0 {
            return;
        }
        frame.occupancy(&mut self.occupancy);
        self.sweep_with_source(geo);
        self.zero = false;
    }

    fn sweep_with_source(&mut self, geo: &TorusGeometry) {
        let k = 0.25 * self.contraction;
        let phi = &self.phi;
        for ((out, nb), occ) in self
            .scratch
            .iter_mut()
            .zip(geo.neighbor_table())
            .zip(&self.occupancy)
        {
            let s = phi[nb[0] as usize]
                + phi[nb[1] as usize]
                + phi[nb[2] as usize]
                + phi[nb[3] as usize];
            *out = k * s + occ;
        }
        std::mem::swap(&mut self.phi, &mut self.scratch);
    }

    /// Applies `count` synchronous sweeps with the anyon configuration of
    /// `frame` held fixed. Long batches are evaluated in closed form in the
    /// Fourier basis, where each sweep is diagonal.
    pub fn sweep_many(&mut self, count: u64, frame: &PauliFrame, geo: &TorusGeometry) {
        if count == 0 || (self.zero && frame.anyon_count() == 0) {
            return;
        }
        frame.occupancy(&mut self.occupancy);
        if count < SPECTRAL_THRESHOLD {
            for _ in 0..count {
                self.sweep_with_source(geo);
            }
        } else {
            let spectral = self
                .spectral
                .get_or_insert_with(|| Arc::new(Spectral::new(self.size)))
                .clone();
            spectral.advance(&mut self.phi, &self.occupancy, count);
        }
        self.zero = false;
    }

    /// Asynchronous update of a single plaquette.
    pub fn update_site(&mut self, p: PlaquetteId, frame: &PauliFrame, geo: &TorusGeometry) {
        let nb = geo.neighbors(p);
        let s: f64 = nb.iter().map(|&q| self.phi[q]).sum();
        let occ = if frame.has_anyon(p) { 1.0 } else { 0.0 };
        self.phi[p] = 0.25 * s + occ - self.phi[p] / (self.size * self.size) as f64;
        if occ != 0.0 {
            self.zero = false;
        }
    }

    /// Neighbor slot with the largest field value, ties broken uniformly.
    pub fn target_slot<R: Rng + ?Sized>(
        &self,
        p: PlaquetteId,
        geo: &TorusGeometry,
        rng: &mut R,
    ) -> usize {
        let nb = &geo.neighbor_table()[p];
        let mut best = 0usize;
        let mut best_val = self.phi[nb[0] as usize];
        let mut ties = 1u32;
        for (slot, &q) in nb.iter().enumerate().skip(1) {
            let v = self.phi[q as usize];
            if v > best_val {
                best = slot;
                best_val = v;
                ties = 1;
            } else if v == best_val {
                ties += 1;
                if rng.gen_range(0..ties) == 0 {
                    best = slot;
                }
            }
        }
        best
    }

    pub fn target_neighbor<R: Rng + ?Sized>(
        &self,
        p: PlaquetteId,
        geo: &TorusGeometry,
        rng: &mut R,
    ) -> PlaquetteId {
        geo.neighbors(p)[self.target_slot(p, geo, rng)]
    }

    /// Plaquette-major little-endian f64 dump.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for v in &self.phi {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Diagonalization of the sweep map on the torus.
struct Spectral {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    eigen: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("size", &self.size)
            .finish()
    }
}

impl Spectral {
    fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        let l2 = (size * size) as f64;
        let contraction = 1.0 - 1.0 / l2;
        let mut eigen = Vec::with_capacity(size * size);
        for u in 0..size {
            for v in 0..size {
                let a = std::f64::consts::TAU * u as f64 / size as f64;
                let b = std::f64::consts::TAU * v as f64 / size as f64;
                eigen.push(0.5 * (a.cos() + b.cos()) * contraction);
            }
        }
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
            eigen,
        }
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        fft.process(data);
        transpose(data, self.size);
        fft.process(data);
        transpose(data, self.size);
    }

    /// `phi <- M^k phi + (1 - M^k) (1 - M)^-1 s` for the sweep matrix `M`.
    fn advance(&self, phi: &mut [f64], source: &[f64], count: u64) {
        let n = self.size * self.size;
        let mut f: Vec<Complex64> = phi.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut s: Vec<Complex64> = source.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut f, &self.forward);
        self.transform(&mut s, &self.forward);
        let k = count.min(i32::MAX as u64) as i32;
        for i in 0..n {
            let lam = self.eigen[i];
            let pow = lam.powi(k);
            f[i] = f[i] * pow + s[i] * ((1.0 - pow) / (1.0 - lam));
        }
        self.transform(&mut f, &self.inverse);
        let norm = 1.0 / n as f64;
        for (out, z) in phi.iter_mut().zip(&f) {
            *out = z.re * norm;
        }
    }
}

fn transpose(data: &mut [Complex64], size: usize) {
    for r in 0..size {
        for c in (r + 1)..size {
            data.swap(r * size + c, c * size + r);
        }
    }
}
