//! Continuous-time simulation of the dissipative toric code with a
//! cellular-automaton decoder field.
//!
//! A trajectory holds a Pauli frame of `sigma^x` flips on the edges of an
//! `L x L` torus and a real field on its plaquettes. Errors appear in pairs,
//! anyons hop towards the largest neighboring field value, and the field is
//! relaxed by a local averaging rule. Observables are the logical error
//! probability, the anyon density and the depth of a clustering decoder.

pub mod config;
pub mod decoder;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod frame;
pub mod harness;
pub mod lattice;
pub mod observables;
pub mod output;

pub use decoder::{decode, logical_error, DecodeResult};
pub use dynamics::{trajectory_rng, Event, RatesConfig, Trajectory};
pub use error::{Error, Result};
pub use field::{CaField, FieldUpdate};
pub use frame::{InitMode, PauliFrame};
pub use harness::{run_ensemble, steady_state_time, ExperimentPlan, SweepPoint};
pub use lattice::TorusGeometry;
pub use observables::{aggregate, measure, EnsembleStats, Measurement};
