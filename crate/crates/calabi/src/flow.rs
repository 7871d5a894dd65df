//! Time integration of the potential flow φ_t = R(ω_φ) − μ.
//!
//! The equation is fourth order and stiff: the highest resolved mode decays
//! at rate (π²Σ(N/2L)²)², which for a 64-point axis is ~10⁸. The workhorse
//! stepper therefore splits off the flat-metric linearization L = −Δ₀² and
//! absorbs it implicitly in coefficient space; only the O(φ²) remainder is
//! explicit. A classical four-stage explicit stepper doubles as an accuracy
//! cross-check at small dt. The driver adapts dt by rejection: a step that
//! raises the energy beyond slack or leaves the Kähler cone is discarded and
//! retried at half the size.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fields::PotentialField;
use crate::functionals::calabi_energy_from_scalar;
use crate::geometry::{integrate, volume, CurvatureBundle, MetricField};
use crate::grid::TorusDomain;
use crate::spectral::{self, symbols};
use crate::Result;

/// Real-axis stability limit of the classical four-stage scheme.
const RK_STABILITY: f64 = 2.785;

/// Energy scale below which the acceptance slack stops shrinking.
const CALABI_FLOOR: f64 = 1e-14;

/// Keeps the monitor's reference bounds positive even when the warmup window
/// is exactly flat, so the exit test stays meaningful.
const MONITOR_FLOOR: f64 = 1e-12;

/// Adaptive stepping parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    /// Size of the first attempted step.
    pub dt_init: f64,
    /// Halving below this aborts the run with `NoProgress`.
    pub dt_min: f64,
    /// Cap on the step size after growth.
    pub dt_max: f64,
    /// Factor applied to dt after every accepted step.
    pub dt_growth: f64,
    /// The run stops at the first accepted step with t ≥ t_max.
    pub t_max: f64,
    /// The run stops once the energy drops strictly below this.
    pub stop_ca: f64,
    /// Relative energy increase tolerated on an accepted step.
    pub ca_slack: f64,
    /// Accepted steps over which the monitor fixes its reference bounds.
    pub warmup_steps: u32,
    /// Allowed growth of the Ricci range past the warmup bounds.
    pub monitor_factor: f64,
    /// Reporting stride for trajectory output (the flow itself records every
    /// accepted step; writers subsample).
    pub record_every: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-5,
            dt_min: 1e-12,
            dt_max: 1e-2,
            dt_growth: 1.2,
            t_max: 1.0,
            stop_ca: 1e-12,
            ca_slack: 1e-10,
            warmup_steps: 10,
            monitor_factor: 2.0,
            record_every: 1,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("dt_init", self.dt_init),
            ("dt_min", self.dt_min),
            ("dt_max", self.dt_max),
            ("t_max", self.t_max),
        ];
        for (name, v) in positives {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.dt_growth.is_finite() && self.dt_growth >= 1.0) {
            return Err(Error::Config(format!(
                "dt_growth must be at least 1, got {}",
                self.dt_growth
            )));
        }
        if !(self.monitor_factor.is_finite() && self.monitor_factor >= 1.0) {
            return Err(Error::Config(format!(
                "monitor_factor must be at least 1, got {}",
                self.monitor_factor
            )));
        }
        if !(self.ca_slack.is_finite() && self.ca_slack >= 0.0) {
            return Err(Error::Config(format!(
                "ca_slack must be nonnegative, got {}",
                self.ca_slack
            )));
        }
        if !(self.stop_ca.is_finite() && self.stop_ca >= 0.0) {
            return Err(Error::Config(format!(
                "stop_ca must be nonnegative, got {}",
                self.stop_ca
            )));
        }
        if self.warmup_steps == 0 {
            return Err(Error::Config("warmup_steps must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which of the two Ricci bounds a trajectory escaped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundSide {
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MonitorStatus {
    /// Still collecting the reference window.
    Warmup,
    /// Bounds fixed, trajectory inside them so far.
    Inside,
    /// First violation, latched.
    Exited { time: f64, bound: BoundSide },
}

impl MonitorStatus {
    pub fn label(&self) -> &'static str {
        match self {
            MonitorStatus::Warmup => "warmup",
            MonitorStatus::Inside => "inside",
            MonitorStatus::Exited { bound: BoundSide::Upper, .. } => "exited_upper",
            MonitorStatus::Exited { bound: BoundSide::Lower, .. } => "exited_lower",
        }
    }
}

/// Watches the Ricci eigenvalue range along a run.
///
/// The first `warmup_steps` accepted steps fix reference bounds: K₃ is the
/// worst negative eigenvalue seen (sign flipped), K₄ the largest positive.
/// Afterwards the trajectory must stay inside [−factor·K₃, factor·K₄]; the
/// first violation latches, upper bound checked first.
#[derive(Clone, Debug, PartialEq)]
pub struct TrapMonitor {
    factor: f64,
    warmup_steps: u32,
    seen: u32,
    neg_seen: f64,
    pos_seen: f64,
    k3: f64,
    k4: f64,
    status: MonitorStatus,
}

/// Flat serializable image of a monitor, for checkpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonitorSnapshot {
    pub factor: f64,
    pub warmup_steps: u32,
    pub seen: u32,
    pub neg_seen: f64,
    pub pos_seen: f64,
    pub k3: f64,
    pub k4: f64,
    /// 0 warmup, 1 inside, 2 exited upper, 3 exited lower.
    pub status_code: u8,
    pub exit_time: f64,
}

impl TrapMonitor {
    pub fn new(factor: f64, warmup_steps: u32) -> Self {
        Self {
            factor,
            warmup_steps,
            seen: 0,
            neg_seen: 0.0,
            pos_seen: 0.0,
            k3: 0.0,
            k4: 0.0,
            status: MonitorStatus::Warmup,
        }
    }

    /// Feed the Ricci eigenvalue extremes of one accepted step at time `t`.
    pub fn observe(&mut self, t: f64, eig_min: f64, eig_max: f64) {
        if matches!(self.status, MonitorStatus::Exited { .. }) {
            return;
        }
        if self.seen < self.warmup_steps {
            self.neg_seen = self.neg_seen.max(-eig_min);
            self.pos_seen = self.pos_seen.max(eig_max);
            self.seen += 1;
            if self.seen == self.warmup_steps {
                self.k3 = self.neg_seen.max(MONITOR_FLOOR);
                self.k4 = self.pos_seen.max(MONITOR_FLOOR);
                self.status = MonitorStatus::Inside;
            }
            return;
        }
        if eig_max > self.factor * self.k4 {
            self.status = MonitorStatus::Exited { time: t, bound: BoundSide::Upper };
        } else if eig_min < -self.factor * self.k3 {
            self.status = MonitorStatus::Exited { time: t, bound: BoundSide::Lower };
        }
    }

    pub fn status(&self) -> MonitorStatus {
        self.status
    }

    /// (K₃, K₄) once the warmup window has closed.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        if self.seen >= self.warmup_steps {
            Some((self.k3, self.k4))
        } else {
            None
        }
    }

    pub fn snapshot(&self) -> MonitorSnapshot {
        let (status_code, exit_time) = match self.status {
            MonitorStatus::Warmup => (0, 0.0),
            MonitorStatus::Inside => (1, 0.0),
            MonitorStatus::Exited { time, bound: BoundSide::Upper } => (2, time),
            MonitorStatus::Exited { time, bound: BoundSide::Lower } => (3, time),
        };
        MonitorSnapshot {
            factor: self.factor,
            warmup_steps: self.warmup_steps,
            seen: self.seen,
            neg_seen: self.neg_seen,
            pos_seen: self.pos_seen,
            k3: self.k3,
            k4: self.k4,
            status_code,
            exit_time,
        }
    }

    pub fn restore(snap: &MonitorSnapshot) -> Result<Self> {
        let status = match snap.status_code {
            0 => MonitorStatus::Warmup,
            1 => MonitorStatus::Inside,
            2 => MonitorStatus::Exited { time: snap.exit_time, bound: BoundSide::Upper },
            3 => MonitorStatus::Exited { time: snap.exit_time, bound: BoundSide::Lower },
            c => {
                return Err(Error::Checkpoint(format!("unknown monitor status code {c}")));
            }
        };
        Ok(Self {
            factor: snap.factor,
            warmup_steps: snap.warmup_steps,
            seen: snap.seen,
            neg_seen: snap.neg_seen,
            pos_seen: snap.pos_seen,
            k3: snap.k3,
            k4: snap.k4,
            status,
        })
    }
}

/// Per-step observables. Every numeric field is finite on an accepted step;
/// the driver stamps `monitor_status`, bare stepper calls leave it at the
/// warmup label.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub t: f64,
    pub dt_used: f64,
    pub calabi: f64,
    pub ricci_eig_min: f64,
    pub ricci_eig_max: f64,
    pub scalar_min: f64,
    pub sup_phi: f64,
    pub spectral_tail: f64,
    pub monitor_status: &'static str,
}

fn record_is_finite(r: &DiagnosticsRecord) -> bool {
    [
        r.t,
        r.dt_used,
        r.calabi,
        r.ricci_eig_min,
        r.ricci_eig_max,
        r.scalar_min,
        r.sup_phi,
        r.spectral_tail,
    ]
    .iter()
    .all(|v| v.is_finite())
}

/// A point on the trajectory carrying every cache the steppers and the
/// observers need: the potential (mean zero against the background volume
/// form), its metric, and the metric's curvatures.
pub struct FlowState {
    pub t: f64,
    pub step: u64,
    pub phi: PotentialField,
    pub metric: MetricField,
    pub curvature: Arc<CurvatureBundle>,
    pub calabi: f64,
    pub diagnostics: DiagnosticsRecord,
}

impl FlowState {
    /// State at time zero. The potential's mean is normalized away.
    pub fn initial(phi: PotentialField, mu: f64) -> Result<Self> {
        Self::at(phi, mu, 0.0, 0)
    }

    /// State at a given (t, step), for resumed runs.
    pub fn at(mut phi: PotentialField, mu: f64, t: f64, step: u64) -> Result<Self> {
        let mean = phi.mean();
        if mean != 0.0 {
            phi.shift_constant(-mean);
        }
        Self::assemble(phi, mu, t, step, 0.0)
    }

    fn assemble(phi: PotentialField, mu: f64, t: f64, step: u64, dt_used: f64) -> Result<Self> {
        let metric = MetricField::from_potential(&phi)?;
        let curvature = Arc::new(CurvatureBundle::of(&metric));
        let calabi = calabi_energy_from_scalar(&metric, &curvature.scalar, mu);
        let diagnostics = DiagnosticsRecord {
            step,
            t,
            dt_used,
            calabi,
            ricci_eig_min: curvature.ricci_eigen_min,
            ricci_eig_max: curvature.ricci_eigen_max,
            scalar_min: curvature.scalar_min,
            sup_phi: phi.sup_norm(),
            spectral_tail: phi.tail_energy_fraction(),
            monitor_status: "warmup",
        };
        if !record_is_finite(&diagnostics) {
            return Err(Error::NonFinite(format!(
                "flow diagnostics at t = {t}, step {step}"
            )));
        }
        Ok(Self { t, step, phi, metric, curvature, calabi, diagnostics })
    }
}

/// R(ω_φ) − μ on the grid. Its mean against ω_φⁿ vanishes to quadrature
/// accuracy: ∫R ω_φⁿ is fixed by the class at μ·V.
pub fn rhs(state: &FlowState, mu: f64) -> Vec<f64> {
    state.curvature.scalar.iter().map(|r| r - mu).collect()
}

/// One step of the first-order split scheme: the flat bi-Laplacian is
/// implicit, the remainder explicit. In coefficients the textbook update
/// (φ̂ + dt(r̂ + Λφ̂)) / (1 + dtΛ) collapses to φ̂ + dt·r̂/(1 + dtΛ), which is
/// what gets evaluated. The DC entry is pinned to zero.
pub fn step_imex(state: &FlowState, mu: f64, dt: f64) -> Result<FlowState> {
    assert!(dt > 0.0 && dt.is_finite(), "step size must be positive");
    let domain = state.phi.domain().clone();
    let r = rhs(state, mu);
    let r_hat = spectral::forward_coeffs(&domain, &r);
    let gain = spectral::map_spectrum(&domain, &r_hat, |m| {
        Complex64::new(dt / (1.0 + dt * symbols::biharmonic(m)), 0.0)
    });
    let mut phi_hat = state.phi.dense_coeffs();
    phi_hat
        .par_iter_mut()
        .zip(gain.par_iter())
        .for_each(|(p, g)| *p += *g);
    phi_hat[0] = Complex64::new(0.0, 0.0);
    let phi = PotentialField::from_dense_coeffs(domain, phi_hat);
    FlowState::assemble(phi, mu, state.t + dt, state.step + 1, dt)
}

/// One classical four-stage explicit step on the full right-hand side.
/// Conditionally stable: above `rk_stability_limit` the highest modes
/// amplify. Serves as the small-dt cross-check for `step_imex`.
pub fn step_explicit_rk(state: &FlowState, mu: f64, dt: f64) -> Result<FlowState> {
    assert!(dt > 0.0 && dt.is_finite(), "step size must be positive");
    let domain = state.phi.domain().clone();
    let base = state.phi.values();
    let k1 = rhs(state, mu);
    let k2 = stage_slope(&domain, base, &k1, 0.5 * dt, mu)?;
    let k3 = stage_slope(&domain, base, &k2, 0.5 * dt, mu)?;
    let k4 = stage_slope(&domain, base, &k3, dt, mu)?;
    let w = dt / 6.0;
    let values: Vec<f64> = (0..base.len())
        .into_par_iter()
        .map(|i| base[i] + w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    let mut phi = PotentialField::from_values(domain, values)?;
    let mean = phi.mean();
    phi.shift_constant(-mean);
    FlowState::assemble(phi, mu, state.t + dt, state.step + 1, dt)
}

fn stage_slope(
    domain: &Arc<TorusDomain>,
    base: &[f64],
    slope: &[f64],
    h: f64,
    mu: f64,
) -> Result<Vec<f64>> {
    let values: Vec<f64> = base
        .par_iter()
        .zip(slope.par_iter())
        .map(|(v, s)| v + h * s)
        .collect();
    let phi = PotentialField::from_values(domain.clone(), values)?;
    let metric = MetricField::from_potential(&phi)?;
    let bundle = CurvatureBundle::of(&metric);
    Ok(bundle.scalar.iter().map(|r| r - mu).collect())
}

/// Exact decay rate Λ_k of mode k under the linearized flow φ_t = −Δ₀²φ.
/// The energy of a single-mode state decays at 2Λ_k in the linear regime.
pub fn linearized_rate(domain: &TorusDomain, wavevector: &[i64]) -> Result<f64> {
    let eig = domain.laplace_eigenvalue(wavevector)?;
    Ok(eig * eig)
}

/// Largest dt at which the four-stage stepper is linearly stable on this
/// grid: the stability interval divided by the top resolved decay rate.
pub fn rk_stability_limit(domain: &TorusDomain) -> f64 {
    let half = (domain.size() / 2) as f64;
    let s: f64 = domain
        .periods()
        .iter()
        .map(|p| {
            let w = half / p;
            w * w
        })
        .sum();
    let lambda = std::f64::consts::PI.powi(2) * s;
    RK_STABILITY / (lambda * lambda)
}

/// Why a run stopped. Step-size underflow is an error, not an outcome.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FlowOutcome {
    /// Energy dropped below `stop_ca`.
    Converged,
    /// The monitor latched an exit; reported, not a crash.
    MonitorExit { time: f64, bound: BoundSide },
    /// First accepted step with t ≥ t_max.
    TMaxReached,
}

impl FlowOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            FlowOutcome::Converged => "converged",
            FlowOutcome::MonitorExit { .. } => "monitor_exit",
            FlowOutcome::TMaxReached => "t_max",
        }
    }
}

/// Everything a finished run hands back.
pub struct FlowRun {
    pub outcome: FlowOutcome,
    pub state: FlowState,
    pub records: Vec<DiagnosticsRecord>,
    pub monitor: TrapMonitor,
    /// Step size the next step would have attempted (resume starts here).
    pub dt_next: f64,
    pub accepted: u64,
    pub rejected: u64,
    pub initial_calabi: f64,
    /// Largest relative deviation of ∫ω_φⁿ from its value at the start of
    /// this run segment.
    pub volume_drift: f64,
    /// Final-state average of R against ω_φⁿ; the class pins it to μ.
    pub mean_scalar: f64,
}

/// What a step sink sees after each accepted step.
pub struct StepEvent<'a> {
    pub state: &'a FlowState,
    pub monitor: &'a TrapMonitor,
    /// Step size the next attempt will use.
    pub dt_next: f64,
    /// Rejected attempts so far in this run segment.
    pub rejected: u64,
    /// Largest relative volume deviation seen so far in this segment.
    pub volume_drift: f64,
}

/// Owns a trajectory in progress: state, monitor, and the adaptive step.
pub struct FlowDriver {
    state: FlowState,
    monitor: TrapMonitor,
    dt_next: f64,
    mu: f64,
    config: FlowConfig,
    emit_initial: bool,
}

impl FlowDriver {
    pub fn new(initial: PotentialField, mu: f64, config: FlowConfig) -> Result<Self> {
        let state = FlowState::initial(initial, mu)?;
        Self::from_state(state, mu, config)
    }

    /// Fresh-run semantics around an already-built state: new monitor, the
    /// configured initial step, and an emitted record for the start point.
    pub fn from_state(state: FlowState, mu: f64, config: FlowConfig) -> Result<Self> {
        config.validate()?;
        let monitor = TrapMonitor::new(config.monitor_factor, config.warmup_steps);
        let dt_next = config.dt_init;
        Ok(Self { state, monitor, dt_next, mu, config, emit_initial: true })
    }

    /// Continue a checkpointed trajectory. The restored state's step counter
    /// keeps growing from where it was; no record is emitted for the restart
    /// point itself.
    pub fn resume(
        mut state: FlowState,
        monitor: TrapMonitor,
        dt_next: f64,
        mu: f64,
        config: FlowConfig,
    ) -> Result<Self> {
        config.validate()?;
        if !(dt_next.is_finite() && dt_next > 0.0) {
            return Err(Error::Config(format!(
                "resumed step size must be positive, got {dt_next}"
            )));
        }
        state.diagnostics.monitor_status = monitor.status().label();
        Ok(Self { state, monitor, dt_next, mu, config, emit_initial: false })
    }

    pub fn run(self) -> Result<FlowRun> {
        self.run_with(|_| Ok(()))
    }

    /// Drive to a stop condition. `sink` sees every accepted state together
    /// with the monitor and the dt the next step would use; checkpoint
    /// writers hang off it. Sink errors abort the run.
    pub fn run_with(mut self, mut sink: impl FnMut(&StepEvent) -> Result<()>) -> Result<FlowRun> {
        let mut records = Vec::new();
        if self.emit_initial {
            records.push(self.state.diagnostics);
        }
        let initial_calabi = self.state.calabi;
        let volume_start = volume(&self.state.metric);
        let mut volume_drift: f64 = 0.0;
        let mut accepted: u64 = 0;
        let mut rejected: u64 = 0;
        let mut calabi = self.state.calabi;

        let mut outcome = self.stop_reason(calabi);
        while outcome.is_none() {
            let dt = self.dt_next;
            if dt < self.config.dt_min {
                return Err(Error::NoProgress {
                    dt,
                    dt_min: self.config.dt_min,
                    t: self.state.t,
                });
            }
            let candidate = match step_imex(&self.state, self.mu, dt) {
                Ok(c) => c,
                Err(Error::NotKahler { .. }) | Err(Error::NonFinite(_)) => {
                    rejected += 1;
                    self.dt_next = 0.5 * dt;
                    continue;
                }
                Err(e) => return Err(e),
            };
            if candidate.calabi > calabi + self.config.ca_slack * calabi.max(CALABI_FLOOR) {
                rejected += 1;
                self.dt_next = 0.5 * dt;
                continue;
            }

            accepted += 1;
            self.dt_next = (dt * self.config.dt_growth).min(self.config.dt_max);
            self.state = candidate;
            calabi = self.state.calabi;
            self.monitor.observe(
                self.state.t,
                self.state.diagnostics.ricci_eig_min,
                self.state.diagnostics.ricci_eig_max,
            );
            self.state.diagnostics.monitor_status = self.monitor.status().label();
            records.push(self.state.diagnostics);
            let v = volume(&self.state.metric);
            volume_drift = volume_drift.max(((v - volume_start) / volume_start).abs());
            sink(&StepEvent {
                state: &self.state,
                monitor: &self.monitor,
                dt_next: self.dt_next,
                rejected,
                volume_drift,
            })?;
            outcome = self.stop_reason(calabi);
        }

        let mean_scalar =
            integrate(&self.state.metric, &self.state.curvature.scalar) / volume(&self.state.metric);
        Ok(FlowRun {
            outcome: outcome.expect("loop exits only with an outcome"),
            state: self.state,
            records,
            monitor: self.monitor,
            dt_next: self.dt_next,
            accepted,
            rejected,
            initial_calabi,
            volume_drift,
            mean_scalar,
        })
    }

    /// Monitor exit outranks convergence: a trajectory that left the trap set
    /// is reported as such even if its energy crossed the stop threshold on
    /// the same step.
    fn stop_reason(&self, calabi: f64) -> Option<FlowOutcome> {
        if let MonitorStatus::Exited { time, bound } = self.monitor.status() {
            return Some(FlowOutcome::MonitorExit { time, bound });
        }
        if calabi < self.config.stop_ca {
            return Some(FlowOutcome::Converged);
        }
        if self.state.t >= self.config.t_max {
            return Some(FlowOutcome::TMaxReached);
        }
        None
    }
}
