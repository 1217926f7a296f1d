//! Spectral simulation of linear stochastic wave, Schrödinger and Maxwell
//! equations on the unit sphere driven by Lévy noise, together with exact
//! oracles for the expected energy and mass of each time integrator.
//!
//! Every state is a vector of spherical-harmonic coefficients indexed by mode
//! rank (see [`sphere_modes`]). A run draws initial data ([`field_synth`]),
//! steps it with one of the integrators ([`integrators`]) using keyed Lévy
//! increments ([`levy_noise`]), and averages a quadratic quantity over many
//! samples ([`montecarlo`]). The reference curves come from [`quantities`].

pub mod error;
pub mod field_synth;
pub mod integrators;
pub mod levy_noise;
pub mod montecarlo;
pub mod quantities;
pub mod sphere_modes;

pub use error::{Error, Result};
pub use field_synth::{InitialKind, InitialSpec};
pub use integrators::{Equation, EquationState, SchemeId};
pub use levy_noise::{LevyConfig, LevyKind};
pub use montecarlo::{run_experiment, run_experiment_with_threads, ExperimentConfig, QuantitySeries};
pub use quantities::QuantityId;
pub use sphere_modes::{AngularSpectrum, ModeIndex, ModeLattice};
