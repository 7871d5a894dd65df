//! C ABI over the torus laboratory. Opaque handles own the Rust objects,
//! every fallible entry point returns a [`CalabiStatus`], and the message
//! of the most recent failure is kept per thread for [`calabi_last_error`].
//! Panics are caught at the boundary and surfaced as `Internal`.
//!
//! Pointer contract, for every function below: null handles and null output
//! pointers are reported as `NullArgument`; any other invalid pointer is
//! undefined behavior, as in any C API. Handles come from this library's
//! constructors and must be released exactly once with the matching `_free`.
//! Array lengths count elements, not bytes.

// Every entry point shares the single pointer contract stated above; a
// per-function `# Safety` section would restate it verbatim each time.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use calabi::cohomology::CohomologyData;
use calabi::estimates::{
    check_amgm, check_dual_laplace_f, check_greens, check_jensen, check_laplace_f,
    check_ricci_difference, IdentityReport, MetricPair,
};
use calabi::fields::{CosineMode, PotentialField};
use calabi::flow::{linearized_rate, FlowConfig, FlowDriver, FlowOutcome};
use calabi::functionals::decomposition_check_with;
use calabi::geometry::{CurvatureBundle, MetricField};
use calabi::{Error, TorusDomain};

/// Status code returned by every fallible entry point.
#[repr(i32)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CalabiStatus {
    /// Success; output parameters are filled.
    Ok = 0,
    /// A required pointer was null.
    NullArgument = 1,
    /// Arguments outside the supported range (domain size, wavevectors,
    /// configuration values).
    InvalidArgument = 2,
    /// The potential leaves the space of admissible metrics.
    NotKahler = 3,
    /// The computation broke down numerically (non-finite values, step
    /// size underflow).
    Numerical = 4,
    /// A panic or an unexpected internal failure; see the error message.
    Internal = 5,
}

/// How a flow run ended.
#[repr(i32)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CalabiFlowOutcome {
    /// Energy dropped below the configured stop threshold.
    Converged = 0,
    /// The curvature monitor latched an exit.
    MonitorExit = 2,
    /// The time horizon was reached first.
    TMaxReached = 3,
}

/// Identity and inequality checks, in the order `calabi_run_checks`
/// reports them.
#[repr(i32)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CalabiCheckKind {
    LaplaceOfVolumeRatio = 0,
    DualLaplaceOfVolumeRatio = 1,
    RicciDifference = 2,
    GreensRepresentation = 3,
    ArithmeticGeometricMeans = 4,
    JensenMean = 5,
    EnergyDecomposition = 6,
}

/// Number of entries `calabi_run_checks` writes.
pub const CALABI_CHECK_COUNT: usize = 7;

/// Opaque: a validated torus grid (dimension, resolution, periods, FFT
/// plans). Thread-safe to share behind const pointers.
pub struct CalabiDomain(Arc<TorusDomain>);

/// Opaque: a Kähler potential on its domain.
pub struct CalabiPotential(PotentialField);

/// One identity-check verdict.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct CalabiCheckResult {
    /// Which check this row reports (a `CalabiCheckKind` value).
    pub kind: i32,
    /// Supremum of the pointwise residual (for inequalities: the worst
    /// violation, zero when the inequality holds everywhere).
    pub residual_sup: f64,
    /// L2 average of the residual.
    pub residual_l2: f64,
    /// Threshold the supremum was compared against.
    pub tolerance: f64,
    /// Whether the check passed.
    pub pass: bool,
}

/// The energy decomposition of one metric: total Calabi energy, the Ricci
/// deviation term, and the class-level correction (zero on tori).
#[repr(C)]
#[derive(Clone, Copy)]
pub struct CalabiEnergyReport {
    pub calabi: f64,
    pub ricci_deviation: f64,
    pub psi: f64,
    /// calabi - ricci_deviation - psi; zero up to quadrature.
    pub decomposition_residual: f64,
    pub mu: f64,
    /// Threshold on |decomposition_residual| behind `pass`.
    pub tolerance: f64,
    pub pass: bool,
}

/// Adaptive flow parameters; obtain defaults from
/// `calabi_flow_config_default` and override selectively.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct CalabiFlowConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub dt_growth: f64,
    pub t_max: f64,
    pub stop_ca: f64,
    pub ca_slack: f64,
    pub warmup_steps: u32,
    pub monitor_factor: f64,
}

/// What a finished flow run reports.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct CalabiFlowSummary {
    /// A `CalabiFlowOutcome` value.
    pub outcome: i32,
    pub initial_calabi: f64,
    pub final_calabi: f64,
    pub t_final: f64,
    pub steps_accepted: u64,
    pub steps_rejected: u64,
    /// Supremum of the final potential.
    pub sup_phi: f64,
    /// Largest relative drift of the total volume along the run.
    pub volume_drift: f64,
    /// Final average of scalar curvature against the evolving volume form.
    pub mean_scalar: f64,
    /// Monitor state: 0 warmup, 1 inside, 2 exited above, 3 exited below.
    pub monitor_status: i32,
    /// Reference bounds fixed by the warmup window; NaN while warming up.
    pub monitor_k3: f64,
    pub monitor_k4: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn store_error(message: String) {
    LAST_ERROR.with(|slot| {
        let mut bytes = message.into_bytes();
        bytes.retain(|&b| b != 0);
        *slot.borrow_mut() = bytes;
    });
}

fn clear_error() {
    LAST_ERROR.with(|slot| slot.borrow_mut().clear());
}

fn status_for(error: &Error) -> CalabiStatus {
    match error {
        Error::InvalidDomain(_)
        | Error::AliasedMode { .. }
        | Error::DimensionMismatch(_)
        | Error::Config(_)
        | Error::Checkpoint(_) => CalabiStatus::InvalidArgument,
        Error::NotKahler { .. } => CalabiStatus::NotKahler,
        Error::NonFinite(_) | Error::NoProgress { .. } => CalabiStatus::Numerical,
        Error::NotFlat { .. } | Error::Io(_) => CalabiStatus::Internal,
    }
}

type Failure = (CalabiStatus, String);

fn lift(error: Error) -> Failure {
    (status_for(&error), error.to_string())
}

/// Runs a body with panic isolation; successful calls clear the stored
/// error so stale messages never outlive the failure they describe.
fn guarded(body: impl FnOnce() -> Result<(), Failure>) -> CalabiStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            clear_error();
            CalabiStatus::Ok
        }
        Ok(Err((status, message))) => {
            store_error(message);
            status
        }
        Err(payload) => {
            let text = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unidentified panic".into());
            store_error(format!("internal panic: {text}"));
            CalabiStatus::Internal
        }
    }
}

fn null_arg(name: &str) -> Failure {
    (CalabiStatus::NullArgument, format!("{name} is null"))
}

unsafe fn want<'a, T>(pointer: *const T, name: &str) -> Result<&'a T, Failure> {
    pointer.as_ref().ok_or_else(|| null_arg(name))
}

unsafe fn want_mut<'a, T>(pointer: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    pointer.as_mut().ok_or_else(|| null_arg(name))
}

/// Copies the message of the most recent failure on this thread into
/// `buffer` (NUL-terminated, truncated to `capacity`). Returns the number
/// of bytes the full message needs including the terminator, or 0 when the
/// last call on this thread succeeded. `buffer` may be null to query the
/// required capacity.
#[no_mangle]
pub unsafe extern "C" fn calabi_last_error(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        if !buffer.is_null() && capacity > 0 {
            let n = message.len().min(capacity - 1);
            std::ptr::copy_nonoverlapping(message.as_ptr(), buffer as *mut u8, n);
            *buffer.add(n) = 0;
        }
        if message.is_empty() {
            0
        } else {
            message.len() + 1
        }
    })
}

/// Static version string of this library; never null.
#[no_mangle]
pub extern "C" fn calabi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds a torus: `n` complex dimensions (1 or 2), `2n` real axes of
/// `size` grid points each, axis lengths in `periods` (length `2n`).
#[no_mangle]
pub unsafe extern "C" fn calabi_domain_new(
    n: u32,
    size: u32,
    periods: *const f64,
    periods_len: usize,
    out: *mut *mut CalabiDomain,
) -> CalabiStatus {
    guarded(|| {
        let out = want_mut(out, "out")?;
        if periods.is_null() {
            return Err(null_arg("periods"));
        }
        let periods = std::slice::from_raw_parts(periods, periods_len);
        let domain = TorusDomain::new(n as usize, size as usize, periods).map_err(lift)?;
        *out = Box::into_raw(Box::new(CalabiDomain(domain)));
        Ok(())
    })
}

/// Releases a domain handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn calabi_domain_free(domain: *mut CalabiDomain) {
    if !domain.is_null() {
        drop(Box::from_raw(domain));
    }
}

/// Number of real axes (twice the complex dimension).
#[no_mangle]
pub unsafe extern "C" fn calabi_domain_axes(
    domain: *const CalabiDomain,
    out: *mut usize,
) -> CalabiStatus {
    guarded(|| {
        let domain = want(domain, "domain")?;
        *want_mut(out, "out")? = domain.0.axes();
        Ok(())
    })
}

/// Total number of grid points.
#[no_mangle]
pub unsafe extern "C" fn calabi_domain_points(
    domain: *const CalabiDomain,
    out: *mut usize,
) -> CalabiStatus {
    guarded(|| {
        let domain = want(domain, "domain")?;
        *want_mut(out, "out")? = domain.0.points();
        Ok(())
    })
}

/// Decay rate of one linearized mode; `wavevector` has one entry per axis.
#[no_mangle]
pub unsafe extern "C" fn calabi_linearized_rate(
    domain: *const CalabiDomain,
    wavevector: *const i64,
    wavevector_len: usize,
    out: *mut f64,
) -> CalabiStatus {
    guarded(|| {
        let domain = want(domain, "domain")?;
        if wavevector.is_null() {
            return Err(null_arg("wavevector"));
        }
        let k = std::slice::from_raw_parts(wavevector, wavevector_len);
        *want_mut(out, "out")? = linearized_rate(&domain.0, k).map_err(lift)?;
        Ok(())
    })
}

/// Synthesizes a potential from cosine modes. `wavevectors` holds
/// `mode_count` rows of one entry per axis (row-major); `amplitudes` holds
/// `mode_count` values. The result is mean-free.
#[no_mangle]
pub unsafe extern "C" fn calabi_potential_from_modes(
    domain: *const CalabiDomain,
    wavevectors: *const i64,
    amplitudes: *const f64,
    mode_count: usize,
    out: *mut *mut CalabiPotential,
) -> CalabiStatus {
    guarded(|| {
        let domain = want(domain, "domain")?;
        let out = want_mut(out, "out")?;
        if mode_count > 0 && (wavevectors.is_null() || amplitudes.is_null()) {
            return Err(null_arg("wavevectors/amplitudes"));
        }
        let axes = domain.0.axes();
        let flat = std::slice::from_raw_parts(wavevectors, mode_count * axes);
        let amplitudes = std::slice::from_raw_parts(amplitudes, mode_count);
        let modes: Vec<CosineMode> = flat
            .chunks_exact(axes)
            .zip(amplitudes)
            .map(|(k, &amplitude)| CosineMode {
                wavevector: k.to_vec(),
                amplitude,
            })
            .collect();
        let field = PotentialField::from_modes(domain.0.clone(), &modes).map_err(lift)?;
        *out = Box::into_raw(Box::new(CalabiPotential(field)));
        Ok(())
    })
}

/// Wraps raw grid values (length = `calabi_domain_points`) as a potential.
#[no_mangle]
pub unsafe extern "C" fn calabi_potential_from_values(
    domain: *const CalabiDomain,
    values: *const f64,
    values_len: usize,
    out: *mut *mut CalabiPotential,
) -> CalabiStatus {
    guarded(|| {
        let domain = want(domain, "domain")?;
        let out = want_mut(out, "out")?;
        if values.is_null() {
            return Err(null_arg("values"));
        }
        let values = std::slice::from_raw_parts(values, values_len).to_vec();
        let field = PotentialField::from_values(domain.0.clone(), values).map_err(lift)?;
        *out = Box::into_raw(Box::new(CalabiPotential(field)));
        Ok(())
    })
}

/// Releases a potential handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn calabi_potential_free(potential: *mut CalabiPotential) {
    if !potential.is_null() {
        drop(Box::from_raw(potential));
    }
}

/// Supremum norm of the potential's grid values.
#[no_mangle]
pub unsafe extern "C" fn calabi_potential_sup_norm(
    potential: *const CalabiPotential,
    out: *mut f64,
) -> CalabiStatus {
    guarded(|| {
        let potential = want(potential, "potential")?;
        *want_mut(out, "out")? = potential.0.sup_norm();
        Ok(())
    })
}

/// Evaluates the energy decomposition of the metric induced by
/// `potential` against its torus class (so `mu` and `psi` are zero).
#[no_mangle]
pub unsafe extern "C" fn calabi_energy_report(
    potential: *const CalabiPotential,
    out: *mut CalabiEnergyReport,
) -> CalabiStatus {
    guarded(|| {
        let potential = want(potential, "potential")?;
        let out = want_mut(out, "out")?;
        let domain = potential.0.domain().clone();
        let cohomology =
            CohomologyData::flat_torus(domain.n(), domain.background_volume()).map_err(lift)?;
        let metric = MetricField::from_potential(&potential.0).map_err(lift)?;
        let curvature = CurvatureBundle::of(&metric);
        let energy = decomposition_check_with(&metric, &curvature, &cohomology);
        *out = CalabiEnergyReport {
            calabi: energy.calabi,
            ricci_deviation: energy.ricci_deviation,
            psi: energy.psi,
            decomposition_residual: energy.decomposition_residual,
            mu: energy.mu,
            tolerance: energy.residual_tolerance,
            pass: energy.passes(),
        };
        Ok(())
    })
}

fn check_row(kind: CalabiCheckKind, report: &IdentityReport) -> CalabiCheckResult {
    CalabiCheckResult {
        kind: kind as i32,
        residual_sup: report.residual_sup,
        residual_l2: report.residual_l2,
        tolerance: report.tolerance,
        pass: report.pass,
    }
}

/// Runs every identity and inequality check of the metric induced by
/// `potential` against the flat metric, writing `CALABI_CHECK_COUNT`
/// entries to `results` in `CalabiCheckKind` order. The call succeeds even
/// when individual checks fail; inspect the `pass` flags.
#[no_mangle]
pub unsafe extern "C" fn calabi_run_checks(
    potential: *const CalabiPotential,
    residual_tolerance: f64,
    margin_tolerance: f64,
    results: *mut CalabiCheckResult,
) -> CalabiStatus {
    guarded(|| {
        let potential = want(potential, "potential")?;
        if results.is_null() {
            return Err(null_arg("results"));
        }
        if !(residual_tolerance.is_finite() && residual_tolerance >= 0.0) {
            return Err((
                CalabiStatus::InvalidArgument,
                format!("residual tolerance {residual_tolerance} must be finite and nonnegative"),
            ));
        }
        if !(margin_tolerance.is_finite() && margin_tolerance >= 0.0) {
            return Err((
                CalabiStatus::InvalidArgument,
                format!("margin tolerance {margin_tolerance} must be finite and nonnegative"),
            ));
        }
        let results = std::slice::from_raw_parts_mut(results, CALABI_CHECK_COUNT);
        let domain = potential.0.domain().clone();
        let cohomology =
            CohomologyData::flat_torus(domain.n(), domain.background_volume()).map_err(lift)?;
        let metric = MetricField::from_potential(&potential.0).map_err(lift)?;
        let base = MetricField::flat(domain);
        let pair = MetricPair::new(&metric, &base).map_err(lift)?;
        results[0] = check_row(
            CalabiCheckKind::LaplaceOfVolumeRatio,
            &check_laplace_f(&pair, residual_tolerance),
        );
        results[1] = check_row(
            CalabiCheckKind::DualLaplaceOfVolumeRatio,
            &check_dual_laplace_f(&pair, residual_tolerance),
        );
        results[2] = check_row(
            CalabiCheckKind::RicciDifference,
            &check_ricci_difference(&pair, residual_tolerance),
        );
        let f = pair.f_potential();
        results[3] = check_row(
            CalabiCheckKind::GreensRepresentation,
            &check_greens(&base, &f, residual_tolerance).map_err(lift)?,
        );
        results[4] = check_row(
            CalabiCheckKind::ArithmeticGeometricMeans,
            &check_amgm(&pair, margin_tolerance),
        );
        results[5] = check_row(
            CalabiCheckKind::JensenMean,
            &check_jensen(&pair, margin_tolerance),
        );
        let curvature = CurvatureBundle::of(&metric);
        let energy = decomposition_check_with(&metric, &curvature, &cohomology);
        results[6] = CalabiCheckResult {
            kind: CalabiCheckKind::EnergyDecomposition as i32,
            residual_sup: energy.decomposition_residual.abs(),
            residual_l2: energy.decomposition_residual.abs(),
            tolerance: energy.residual_tolerance,
            pass: energy.passes(),
        };
        Ok(())
    })
}

/// Fills `out` with the default adaptive-flow parameters.
#[no_mangle]
pub unsafe extern "C" fn calabi_flow_config_default(
    out: *mut CalabiFlowConfig,
) -> CalabiStatus {
    guarded(|| {
        let out = want_mut(out, "out")?;
        let d = FlowConfig::default();
        *out = CalabiFlowConfig {
            dt_init: d.dt_init,
            dt_min: d.dt_min,
            dt_max: d.dt_max,
            dt_growth: d.dt_growth,
            t_max: d.t_max,
            stop_ca: d.stop_ca,
            ca_slack: d.ca_slack,
            warmup_steps: d.warmup_steps,
            monitor_factor: d.monitor_factor,
        };
        Ok(())
    })
}

/// Evolves the potential under the flow with mean curvature
/// `mean_curvature` until convergence, a monitor exit, or the horizon.
/// The potential handle itself is not modified.
#[no_mangle]
pub unsafe extern "C" fn calabi_flow_run(
    potential: *const CalabiPotential,
    mean_curvature: f64,
    config: *const CalabiFlowConfig,
    out: *mut CalabiFlowSummary,
) -> CalabiStatus {
    guarded(|| {
        let potential = want(potential, "potential")?;
        let config = want(config, "config")?;
        let out = want_mut(out, "out")?;
        let flow = FlowConfig {
            dt_init: config.dt_init,
            dt_min: config.dt_min,
            dt_max: config.dt_max,
            dt_growth: config.dt_growth,
            t_max: config.t_max,
            stop_ca: config.stop_ca,
            ca_slack: config.ca_slack,
            warmup_steps: config.warmup_steps,
            monitor_factor: config.monitor_factor,
            record_every: 1,
        };
        let run = FlowDriver::new(potential.0.clone(), mean_curvature, flow)
            .and_then(|driver| driver.run())
            .map_err(lift)?;
        let snapshot = run.monitor.snapshot();
        let (k3, k4) = run.monitor.bounds().unwrap_or((f64::NAN, f64::NAN));
        *out = CalabiFlowSummary {
            outcome: match run.outcome {
                FlowOutcome::Converged => CalabiFlowOutcome::Converged as i32,
                FlowOutcome::MonitorExit { .. } => CalabiFlowOutcome::MonitorExit as i32,
                FlowOutcome::TMaxReached => CalabiFlowOutcome::TMaxReached as i32,
            },
            initial_calabi: run.initial_calabi,
            final_calabi: run.state.calabi,
            t_final: run.state.t,
            steps_accepted: run.accepted,
            steps_rejected: run.rejected,
            sup_phi: run.state.phi.sup_norm(),
            volume_drift: run.volume_drift,
            mean_scalar: run.mean_scalar,
            monitor_status: i32::from(snapshot.status_code),
            monitor_k3: k3,
            monitor_k4: k4,
        };
        Ok(())
    })
}

/// Class-level quantities from intersection pairings: the mean scalar
/// curvature `mu` and the energy-decomposition correction `psi`.
#[no_mangle]
pub unsafe extern "C" fn calabi_class_quantities(
    n: u32,
    c1_pairing: f64,
    c1_squared_pairing: f64,
    volume: f64,
    mu_out: *mut f64,
    psi_out: *mut f64,
) -> CalabiStatus {
    guarded(|| {
        let data =
            CohomologyData::new(n as usize, c1_pairing, c1_squared_pairing, volume).map_err(lift)?;
        *want_mut(mu_out, "mu_out")? = data.mu();
        *want_mut(psi_out, "psi_out")? = data.psi();
        Ok(())
    })
}
