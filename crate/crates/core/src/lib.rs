//! Numerical analysis of standing waves for the coupled cubic system
//!
//! ```text
//! i u_t + Lap u - u + (|u|^2/9 + 2|v|^2) u + conj(u)^2 v / 3 = 0
//! i s v_t + Lap v - mu v + (9|v|^2 + 2|u|^2) v + u^3 / 9 = 0
//! ```
//!
//! in one to three space dimensions: ground-state construction, linearized
//! spectra, stability verdicts and blow-up experiments.

pub mod dynamics;
pub mod error;
pub mod grid;
pub mod io;
pub mod linop;
pub mod model;
pub mod solver;
pub mod stability;

pub use dynamics::{EvolutionTrace, FieldState, Recipe};
pub use error::{Error, Result};
pub use grid::{ComplexField, Field, Grid, GridKind, GridSpec, Sector};
pub use model::ModelParams;
pub use solver::{Provenance, WaveProfile};
