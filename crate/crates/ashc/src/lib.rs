//! Abstraction-based hierarchical control of input-affine nonlinear systems.
//!
//! The crate builds and numerically certifies abstraction/interface pairs for
//! a concrete plant: a quadratic stabilisability certificate checked by a
//! polytopic LMI, a simulation function `W(xi, x) = V(p(xi), x)` with its
//! pointwise dissipation inequality, output-error bounds, and an m-relation
//! (a map `m` with input links `b`, `c` that lets the abstraction reproduce
//! every output trajectory of the plant on a region). Two interconnection
//! simulations exercise the guarantees end to end.
//!
//! Modules:
//! - [`linalg`]: self-contained dense symmetric linear algebra (Jacobi
//!   eigensolver, weighted norms, matrix square roots).
//! - [`system`]: concrete/abstract system data model, trajectories, grids.
//! - [`certificates`]: quadratic certificates and their LMI verification.
//! - [`engine`]: simulation function, interface gains, residual checks,
//!   error bounds, m-relation links.
//! - [`integrator`]: fixed-step RK4, input signals, the two interconnection
//!   simulations.
//! - [`cuk`]: the bundled DC-to-DC converter instance with closed-form maps.

pub mod certificates;
pub mod cuk;
pub mod engine;
pub mod integrator;
pub mod linalg;
pub mod system;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
