//! Event-driven kinetic Monte Carlo for the dissipative toric code.
//!
//! Three event classes realize the jump unraveling: pair creation (rate
//! `gamma1` per edge), anyon hops towards the field maximum (rate `gamma2` per
//! anyon) and field updates (rate `gamma3` per sweep, or per plaquette in
//! asynchronous mode). Rates are uniform within a class, so an event is drawn
//! by picking the class proportional to its total rate and then a uniform
//! member.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CaField, FieldUpdate};
use crate::frame::{InitMode, PauliFrame};
use crate::lattice::{EdgeId, PlaquetteId, TorusGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatesConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

impl RatesConfig {
    pub fn new(gamma1: f64, gamma2: f64, gamma3: f64) -> Result<Self> {
        for (key, v) in [("gamma1", gamma1), ("gamma2", gamma2), ("gamma3", gamma3)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(
                    key,
                    format!("rate must be finite and >= 0, got {v}"),
                ));
            }
        }
        Ok(Self {
            gamma1,
            gamma2,
            gamma3,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    PairCreation {
        edge: EdgeId,
    },
    Hop {
        from: PlaquetteId,
        to: PlaquetteId,
        edge: EdgeId,
    },
    /// `count` synchronous sweeps executed back to back.
    FieldSweep {
        count: u64,
    },
    SiteUpdate {
        plaquette: PlaquetteId,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::PairCreation { .. } => "pair_creation",
            Event::Hop { .. } => "hop",
            Event::FieldSweep { .. } => "field_sweep",
            Event::SiteUpdate { .. } => "site_update",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub pair_creations: u64,
    pub hops: u64,
    pub field_sweeps: u64,
    pub site_updates: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub event: Event,
}

/// Independent random stream for trajectory `index` under `master_seed`.
pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    geo: Arc<TorusGeometry>,
    pub frame: PauliFrame,
    pub field: CaField,
    time: f64,
    rng: ChaCha8Rng,
    rates: RatesConfig,
    mode: FieldUpdate,
    counts: EventCounts,
    trace: Option<Vec<TraceRecord>>,
}

impl Trajectory {
    pub fn new(
        geo: Arc<TorusGeometry>,
        rates: RatesConfig,
        mode: FieldUpdate,
        init: InitMode,
        mut rng: ChaCha8Rng,
    ) -> Self {
        let frame = PauliFrame::new(&geo, init, &mut rng);
        let field = CaField::new(&geo);
        Self {
            geo,
            frame,
            field,
            time: 0.0,
            rng,
            rates,
            mode,
            counts: EventCounts::default(),
            trace: None,
        }
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geo
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn rates(&self) -> RatesConfig {
        self.rates
    }

    pub fn counts(&self) -> EventCounts {
        self.counts
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<TraceRecord> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    #[inline]
    fn creation_rate(&self) -> f64 {
        self.rates.gamma1 * self.geo.edge_count() as f64
    }

    #[inline]
    fn hop_rate(&self) -> f64 {
        self.rates.gamma2 * self.frame.anyon_count() as f64
    }

    #[inline]
    fn field_rate(&self) -> f64 {
        match self.mode {
            FieldUpdate::Sync => self.rates.gamma3,
            FieldUpdate::Async => self.rates.gamma3 * self.geo.plaquette_count() as f64,
        }
    }

    pub fn total_rate(&self) -> f64 {
        self.creation_rate() + self.hop_rate() + self.field_rate()
    }

    /// Executes a single event and advances the clock by an exponential
    /// waiting time.
    pub fn step(&mut self) -> Result<Event> {
        let a1 = self.creation_rate();
        let a2 = self.hop_rate();
        let total = a1 + a2 + self.field_rate();
        if total <= 0.0 {
            return Err(Error::Frozen);
        }
        let wait: f64 = Exp1.sample(&mut self.rng);
        self.time += wait / total;
        let u = self.rng.gen::<f64>() * total;
        let event = if u < a1 {
            self.create_pair()
        } else if u < a1 + a2 {
            self.hop()
        } else {
            match self.mode {
                FieldUpdate::Sync => {
                    self.field.sweep_update(&self.frame, &self.geo);
                    self.counts.field_sweeps += 1;
                    Event::FieldSweep { count: 1 }
                }
                FieldUpdate::Async => self.update_site(),
            }
        };
        self.record(event);
        Ok(event)
    }

    fn create_pair(&mut self) -> Event {
        let edge = self.rng.gen_range(0..self.geo.edge_count());
        self.frame.apply_flip(&self.geo, edge);
        self.counts.pair_creations += 1;
        Event::PairCreation { edge }
    }

    fn hop(&mut self) -> Event {
        let i = self.rng.gen_range(0..self.frame.anyon_count());
        let from = self.frame.anyon_at(i);
        let slot = self.field.target_slot(from, &self.geo, &mut self.rng);
        let edge = self.geo.edge_towards(from, slot);
        let to = self.geo.neighbors(from)[slot];
        self.frame.apply_flip(&self.geo, edge);
        self.counts.hops += 1;
        Event::Hop { from, to, edge }
    }

    fn update_site(&mut self) -> Event {
        let plaquette = self.rng.gen_range(0..self.geo.plaquette_count());
        self.field.update_site(plaquette, &self.frame, &self.geo);
        self.counts.site_updates += 1;
        Event::SiteUpdate { plaquette }
    }

    #[inline]
    fn record(&mut self, event: Event) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceRecord {
                time: self.time,
                event,
            });
        }
    }

    /// Runs the dynamics to `t_max`, calling `observer` at every grid time
    /// (ascending, within `(t, t_max]`). The clock ends exactly at `t_max`.
    pub fn run_until<F>(&mut self, t_max: f64, grid: &[f64], mut observer: F)
    where
        F: FnMut(f64, &Trajectory),
    {
        for &t_obs in grid {
            if t_obs <= self.time || t_obs > t_max {
                continue;
            }
            self.advance_to(t_obs);
            observer(t_obs, self);
        }
        if self.time < t_max {
            self.advance_to(t_max);
        }
    }

    /// Advances the clock to exactly `t_stop`.
    ///
    /// In synchronous mode the sweeps between two non-sweep events are drawn
    /// as a Poisson count and applied as a batch, since the occupancy is
    /// constant in between. Statistically this is the same process as
    /// repeated [`Trajectory::step`].
    pub fn advance_to(&mut self, t_stop: f64) {
        match self.mode {
            FieldUpdate::Sync => self.advance_sync(t_stop),
            FieldUpdate::Async => self.advance_async(t_stop),
        }
    }

    fn advance_sync(&mut self, t_stop: f64) {
        let g3 = self.rates.gamma3;
        loop {
            let a1 = self.creation_rate();
            let a2 = self.hop_rate();
            let other = a1 + a2;
            let wait = if other > 0.0 {
                let e: f64 = Exp1.sample(&mut self.rng);
                e / other
            } else {
                f64::INFINITY
            };
            let reached = self.time + wait >= t_stop;
            let span = if reached { t_stop - self.time } else { wait };
            let sweeps = self.poisson(g3 * span);
            if sweeps > 0 {
                self.field.sweep_many(sweeps, &self.frame, &self.geo);
                self.counts.field_sweeps += sweeps;
                let stamp = if reached { t_stop } else { self.time + wait };
                if let Some(trace) = self.trace.as_mut() {
                    trace.push(TraceRecord {
                        time: stamp,
                        event: Event::FieldSweep { count: sweeps },
                    });
                }
            }
            if reached {
                self.time = t_stop;
                return;
            }
            self.time += wait;
            let event = if self.rng.gen::<f64>() * other < a1 {
                self.create_pair()
            } else {
                self.hop()
            };
            self.record(event);
        }
    }

    fn advance_async(&mut self, t_stop: f64) {
        loop {
            let total = self.total_rate();
            if total <= 0.0 {
                self.time = t_stop;
                return;
            }
            if self.frame.anyon_count() == 0 && self.field.is_identically_zero() {
                // site updates are no-ops here; only creations matter
                let a1 = self.creation_rate();
                let wait = if a1 > 0.0 {
                    let e: f64 = Exp1.sample(&mut self.rng);
                    e / a1
                } else {
                    f64::INFINITY
                };
                let reached = self.time + wait >= t_stop;
                let span = if reached { t_stop - self.time } else { wait };
                self.counts.site_updates += self.poisson(self.field_rate() * span);
                if reached {
                    self.time = t_stop;
                    return;
                }
                self.time += wait;
                let event = self.create_pair();
                self.record(event);
                continue;
            }
            let e: f64 = Exp1.sample(&mut self.rng);
            let wait = e / total;
            if self.time + wait >= t_stop {
                self.time = t_stop;
                return;
            }
            // the clock moves before the event, as in `step`
            self.time += wait;
            let a1 = self.creation_rate();
            let a2 = self.hop_rate();
            let u = self.rng.gen::<f64>() * total;
            let event = if u < a1 {
                self.create_pair()
            } else if u < a1 + a2 {
                self.hop()
            } else {
                self.update_site()
            };
            self.record(event);
        }
    }

    fn poisson(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        let d = Poisson::new(mean).expect("finite positive mean");
        let k: f64 = d.sample(&mut self.rng);
        k as u64
    }
}
