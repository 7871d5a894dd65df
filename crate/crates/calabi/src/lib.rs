//! Numerical laboratory for the Calabi flow on flat complex tori.
//!
//! The crate evolves a Kähler potential φ on T^n (n = 1 or 2 complex
//! dimensions) under ∂φ/∂t = R(ω_φ) − μ, where ω_φ = ω + i∂∂̄φ and R is the
//! scalar curvature. Everything is discretized pseudospectrally on a uniform
//! periodic grid: derivatives act as Fourier multipliers, nonlinear terms are
//! evaluated pointwise in physical space.
//!
//! Module layout:
//! - [`grid`]: torus domains, grid indexing, FFT plans.
//! - [`spectral`]: multi-axis FFT sweeps and Fourier multipliers.
//! - [`fields`]: scalar potentials and pointwise Hermitian matrix fields.
//! - [`geometry`]: metrics from potentials, curvature, integration.
//! - [`functionals`]: Calabi energy, Ricci deviation, energy decomposition.
//! - [`cohomology`]: class-level pairings, mean curvature μ, correction Ψ.
//! - [`flow`]: time steppers, adaptive driver, curvature trap monitor.
//! - [`estimates`]: residual checks for the elliptic identities the flow
//!   analysis relies on (Green's representation, Laplacian exchange, AM-GM).
//! - [`config`], [`checkpoint`], [`report`], [`runner`]: run configuration,
//!   binary snapshots, CSV/JSON outputs, and the orchestration used by the
//!   `calabi` binary.

pub mod checkpoint;
pub mod cohomology;
pub mod config;
pub mod error;
pub mod estimates;
pub mod fields;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod grid;
pub(crate) mod reduce;
pub mod report;
pub mod runner;
pub mod spectral;

pub use error::Error;
pub use grid::TorusDomain;

/// Smallest admissible eigenvalue of a metric: below this the associated
/// (1,1)-form is treated as degenerate and rejected.
pub const POSITIVITY_FLOOR: f64 = 1e-10;

/// Convenience alias used throughout.
pub type Result<T> = std::result::Result<T, Error>;
