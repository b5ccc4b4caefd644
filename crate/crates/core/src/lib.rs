//! Gross–Pitaevskii dynamics on a periodic 1D box with a norm-conserving
//! (metriplectic) dissipation, together with the conservative and
//! Pitaevskii-damped variants it is compared against.
//!
//! Units are box units: ħ = m = 1, lengths in L, time in mL²/ħ. Fields are
//! normalized to unit norm and the coupling carries the particle number.

pub mod bogoliubov;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod model;
pub mod states;

pub use dynamics::{
    evolve, ground_state_ite, ground_state_ite_observed, rhs, step_rk4, DynamicsKind,
    EvolutionConfig, EvolutionSink, IteStep,
    GroundState, LambdaSchedule, Recorder, Stage, Stepper,
};
pub use error::{GpeError, Result};
pub use grid::{ComplexField, Grid1D};
pub use model::{
    current, density, free_energy, gp_operator, observables, project_q, stationarity_residual,
    ModelParams, ObservableRecord,
};
pub use num_complex::Complex64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
