//! Numerical laboratory for the spectral stability and nonlinear decay of
//! periodic roll solutions of the real and modified Ginzburg-Landau
//! equations under bounded, not necessarily localized, perturbations.
//!
//! The crate is organized around five pieces:
//!
//! - [`symbol`]: the 3x3 Fourier symbol of the linearization about a roll,
//!   Routh-Hurwitz stability, eigenvalue branch continuation, splitting
//!   curvatures and spectral projections;
//! - [`semigroup`]: mode-filter decomposition of the semigroup, numerical
//!   Green's kernels, induced operator norms, and decay-rate certificates
//!   for the diffusive, refined and exponential estimates;
//! - [`dynamics`]: pseudo-spectral time integration (ETDRK4 / IMEX-BDF2) of
//!   the perturbation system, the full amplitude system and a scalar toy
//!   equation, with deterministic initial-data generators;
//! - [`decay`]: norm tracking, power-law rate fits, template functions and
//!   the integral-inequality oracles behind the iteration scheme;
//! - [`verify`]: the acceptance experiments wired together, one runner per
//!   criterion, shared by the test suite and the CLI.

pub mod decay;
pub mod dynamics;
pub mod grid;
pub mod linalg;
pub mod params;
pub mod quad;
pub mod report;
pub mod semigroup;
pub mod symbol;
pub mod verify;

pub use params::RollParams;
