//! Harmonic and subharmonic solutions of planar impulsive Duffing-type
//! equations
//!
//! ```text
//! x'' + g(x) = p(t, x, x'),          t ≠ t_j
//! x(t_j+) = (1 + a)·x(t_j−),  x'(t_j+) = (1 + a)·x'(t_j−)
//! ```
//!
//! with a 2π-periodic impulse schedule. The crate integrates the impulsive
//! flow, tracks the continuous polar angle along trajectories, certifies the
//! boundary rotation condition that forces a 2π-periodic solution and
//! locates it, and runs the annulus twist construction that produces
//! 2πn-periodic solutions around it.

pub mod dynamics;
pub mod error;
pub mod fixed_point;
pub mod harmonic;
pub mod integrator;
pub mod oracle;
pub mod quadrature;
pub mod report;
pub mod rotation;
pub mod subharmonic;

pub use dynamics::{
    CartesianState, Forcing, ImpulseSchedule, ImpulsiveSystem, RestoringForce, Side, SpecDocument,
    SystemSpec,
};
pub use error::{Error, Result};
pub use integrator::{flow, poincare, IntegratorConfig, Trajectory};
