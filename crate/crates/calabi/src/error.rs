use thiserror::Error;

/// Errors surfaced by domain construction, field algebra, and the flow
/// driver. Numerical outcomes that are expected results of an experiment
/// (monitor exits, time-limit stops) are *not* errors; see
/// [`crate::flow::Outcome`].
#[derive(Debug, Error)]
pub enum Error {
    /// Domain parameters outside the supported range.
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    /// A requested wavevector cannot be represented on the grid.
    #[error("aliased wavevector {k:?}: every component must satisfy |k| < N/2 = {nyquist}")]
    AliasedMode { k: Vec<i64>, nyquist: i64 },

    /// Wavevector or matrix data with the wrong number of entries.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The candidate metric fails positivity: ω + i∂∂̄φ must stay a Kähler
    /// form, i.e. its smallest eigenvalue must stay above the floor.
    #[error("not a Kähler metric: min eigenvalue {min_eigenvalue:.3e} below floor {floor:.1e}")]
    NotKahler { min_eigenvalue: f64, floor: f64 },

    /// An operation that is only defined against the flat background metric
    /// received a curved one.
    #[error("operation requires the flat background metric (sup deviation {deviation:.3e})")]
    NotFlat { deviation: f64 },

    /// A field developed NaN or infinite entries.
    #[error("non-finite values in {0}")]
    NonFinite(String),

    /// The adaptive driver halved dt below the configured minimum without
    /// finding an acceptable step.
    #[error("no progress: dt {dt:.3e} fell below dt_min {dt_min:.3e} at t = {t:.6e}")]
    NoProgress { dt: f64, dt_min: f64, t: f64 },

    /// Configuration file rejected (syntax, unknown keys, or bad values).
    #[error("config error: {0}")]
    Config(String),

    /// Checkpoint file rejected (format, version, or incompatible domain).
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
