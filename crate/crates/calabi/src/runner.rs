//! Orchestration behind the `calabi` binary: configured runs, parameter
//! sweeps, the randomized identity checker, and the class-data report.
//!
//! Everything here returns artifacts plus a process exit code instead of
//! exiting, so the same entry points drive both the CLI and tests. Artifact
//! bytes are deterministic for a fixed config and seed; wall-clock time
//! appears only in the summary JSON.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::checkpoint::{trajectory_hash, Checkpoint, CumulativeSummary};
use crate::cohomology::CohomologyData;
use crate::config::{CheckConfig, RunConfig, SuiteConfig, SweepConfig};
use crate::error::Error;
use crate::estimates::{
    check_amgm, check_dual_laplace_f, check_greens, check_greens_sign_flipped, check_jensen,
    check_laplace_f, check_ricci_difference, IdentityReport, MetricPair,
};
use crate::fields::{CosineMode, PotentialField};
use crate::flow::{
    DiagnosticsRecord, FlowConfig, FlowDriver, FlowOutcome, FlowState, TrapMonitor,
};
use crate::functionals::decomposition_check_with;
use crate::geometry::{CurvatureBundle, MetricField};
use crate::grid::TorusDomain;
use crate::report::{check_table, checks_json, sweep_csv, trajectory_csv, RunSummary, SweepRow};
use crate::Result;

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_MONITOR_EXIT: i32 = 2;
pub const EXIT_T_MAX: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_NUMERICAL: i32 = 5;

/// Exit code for an error that escaped an execute function.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::NoProgress { .. }
        | Error::NotKahler { .. }
        | Error::NonFinite(_)
        | Error::NotFlat { .. }
        | Error::Io(_) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Everything a configured run leaves behind.
pub struct RunArtifacts {
    pub summary: RunSummary,
    pub records: Vec<DiagnosticsRecord>,
    pub exit_code: i32,
    pub trajectory_path: PathBuf,
    pub summary_path: PathBuf,
    pub checkpoint_path: Option<PathBuf>,
}

/// Run one configured trajectory: fresh from a mode list or resumed from a
/// checkpoint. Writes the trajectory CSV and summary JSON, plus a rolling
/// checkpoint when enabled. Step-size underflow is reported as the
/// `no_progress` outcome with artifacts intact, not as an error.
pub fn execute_run(config: &RunConfig) -> Result<RunArtifacts> {
    let started = Instant::now();
    config.validate()?;
    let domain = config.domain.build()?;
    let cohomology = config.cohomology_data(&domain)?;
    let mu = cohomology.mu();

    let dir = config.output.resolved_directory();
    std::fs::create_dir_all(&dir)?;
    let trajectory_path = dir.join(&config.output.trajectory_csv);
    let summary_path = dir.join(&config.output.summary_json);
    let checkpoint_path =
        (config.output.checkpoint_every > 0).then(|| dir.join(&config.output.checkpoint_file));

    // Fresh runs start their cumulative totals here; resumed runs carry the
    // checkpoint's. In both cases the global step counter equals the total
    // number of accepted steps, which keeps the bookkeeping below honest
    // across any number of resume boundaries.
    let (driver, carried, start_record, start_bounds, start_label, fresh) =
        match &config.initial.checkpoint {
            Some(path) => {
                let ck = Checkpoint::read_from(path)?;
                ck.verify_trajectory(&domain, &cohomology)?;
                let phi = PotentialField::from_dense_coeffs(domain.clone(), ck.coeffs.clone());
                let state = FlowState::at(phi, mu, ck.t, ck.step)?;
                let monitor = TrapMonitor::restore(&ck.monitor)?;
                let record = state.diagnostics;
                let bounds = monitor.bounds();
                let label = monitor.status().label();
                let driver =
                    FlowDriver::resume(state, monitor, ck.dt_next, mu, config.flow.clone())?;
                (driver, ck.summary, record, bounds, label, false)
            }
            None => {
                let modes: Vec<CosineMode> =
                    config.initial.modes.iter().map(|m| m.to_mode()).collect();
                let phi = PotentialField::from_modes(domain.clone(), &modes)?;
                let state = FlowState::initial(phi, mu)?;
                let carried = CumulativeSummary {
                    initial_calabi: state.calabi,
                    last_calabi: state.calabi,
                    accepted: 0,
                    rejected: 0,
                    volume_drift: 0.0,
                };
                let record = state.diagnostics;
                let driver = FlowDriver::from_state(state, mu, config.flow.clone())?;
                (driver, carried, record, None, "warmup", true)
            }
        };

    let hash = trajectory_hash(&domain, &cohomology);
    let mut rows: Vec<DiagnosticsRecord> = Vec::new();
    if fresh {
        rows.push(start_record);
    }
    let mut latest = start_record;
    let mut monitor_label = start_label;
    let mut monitor_bounds = start_bounds;
    let mut segment_rejected: u64 = 0;
    let mut segment_drift: f64 = 0.0;

    let result = driver.run_with(|ev| {
        latest = ev.state.diagnostics;
        monitor_label = ev.monitor.status().label();
        monitor_bounds = ev.monitor.bounds();
        segment_rejected = ev.rejected;
        segment_drift = ev.volume_drift;
        rows.push(ev.state.diagnostics);
        if let Some(path) = &checkpoint_path {
            if ev.state.step % config.output.checkpoint_every == 0 {
                Checkpoint {
                    config_hash: hash,
                    domain: domain.clone(),
                    cohomology,
                    t: ev.state.t,
                    step: ev.state.step,
                    dt_next: ev.dt_next,
                    summary: CumulativeSummary {
                        initial_calabi: carried.initial_calabi,
                        last_calabi: ev.state.calabi,
                        accepted: ev.state.step,
                        rejected: carried.rejected + ev.rejected,
                        volume_drift: carried.volume_drift.max(ev.volume_drift),
                    },
                    monitor: ev.monitor.snapshot(),
                    coeffs: ev.state.phi.dense_coeffs(),
                }
                .write_to(path)?;
            }
        }
        Ok(())
    });

    let (summary, exit_code, final_checkpoint) = match result {
        Ok(run) => {
            let accepted = carried.accepted + run.accepted;
            let rejected = carried.rejected + run.rejected;
            let drift = carried.volume_drift.max(run.volume_drift);
            let final_calabi = run.state.calabi;
            let summary = RunSummary {
                outcome: run.outcome.label().to_string(),
                initial_calabi: carried.initial_calabi,
                final_calabi,
                calabi_ratio: ratio(final_calabi, carried.initial_calabi),
                t_final: run.state.t,
                steps_accepted: accepted,
                steps_rejected: rejected,
                sup_phi: run.state.diagnostics.sup_phi,
                spectral_tail: run.state.diagnostics.spectral_tail,
                volume_drift: drift,
                mu,
                mean_scalar: run.mean_scalar,
                monitor_status: run.monitor.status().label().to_string(),
                monitor_k3: run.monitor.bounds().map(|b| b.0),
                monitor_k4: run.monitor.bounds().map(|b| b.1),
                wall_time_seconds: started.elapsed().as_secs_f64(),
            };
            let exit_code = match run.outcome {
                FlowOutcome::Converged => EXIT_CONVERGED,
                FlowOutcome::MonitorExit { .. } => EXIT_MONITOR_EXIT,
                FlowOutcome::TMaxReached => EXIT_T_MAX,
            };
            // End-state checkpoint so a resume can extend the run exactly
            // from where it stopped.
            let final_checkpoint = checkpoint_path.is_some().then(|| Checkpoint {
                config_hash: hash,
                domain: domain.clone(),
                cohomology,
                t: run.state.t,
                step: run.state.step,
                dt_next: run.dt_next,
                summary: CumulativeSummary {
                    initial_calabi: carried.initial_calabi,
                    last_calabi: final_calabi,
                    accepted,
                    rejected,
                    volume_drift: drift,
                },
                monitor: run.monitor.snapshot(),
                coeffs: run.state.phi.dense_coeffs(),
            });
            (summary, exit_code, final_checkpoint)
        }
        Err(Error::NoProgress { .. }) => {
            // Halvings after the last accepted step are not observable here,
            // so the rejected total reflects the trajectory up to that step.
            let summary = RunSummary {
                outcome: "no_progress".to_string(),
                initial_calabi: carried.initial_calabi,
                final_calabi: latest.calabi,
                calabi_ratio: ratio(latest.calabi, carried.initial_calabi),
                t_final: latest.t,
                steps_accepted: latest.step,
                steps_rejected: carried.rejected + segment_rejected,
                sup_phi: latest.sup_phi,
                spectral_tail: latest.spectral_tail,
                volume_drift: carried.volume_drift.max(segment_drift),
                mu,
                mean_scalar: f64::NAN,
                monitor_status: monitor_label.to_string(),
                monitor_k3: monitor_bounds.map(|b| b.0),
                monitor_k4: monitor_bounds.map(|b| b.1),
                wall_time_seconds: started.elapsed().as_secs_f64(),
            };
            (summary, EXIT_NUMERICAL, None)
        }
        Err(e) => return Err(e),
    };

    if let (Some(path), Some(ck)) = (&checkpoint_path, &final_checkpoint) {
        ck.write_to(path)?;
    }
    std::fs::write(&trajectory_path, trajectory_csv(&rows, config.flow.record_every))?;
    std::fs::write(&summary_path, summary.to_json())?;
    Ok(RunArtifacts {
        summary,
        records: rows,
        exit_code,
        trajectory_path,
        summary_path,
        checkpoint_path,
    })
}

pub struct SweepArtifacts {
    pub rows: Vec<SweepRow>,
    pub csv_path: PathBuf,
    pub exit_code: i32,
}

/// Run every (wavevector, amplitude) grid point as an independent flow and
/// tabulate one row per run. Point failures become rows, not errors, so the
/// sweep always completes. Rows keep grid order regardless of scheduling.
pub fn execute_sweep(config: &SweepConfig) -> Result<SweepArtifacts> {
    config.validate()?;
    let domain = config.domain.build()?;
    let cohomology = config.cohomology_data(&domain)?;
    let mu = cohomology.mu();
    let dir = config.output.resolved_directory();
    std::fs::create_dir_all(&dir)?;
    let csv_path = dir.join(&config.output.sweep_csv);

    let grid: Vec<(&Vec<i64>, f64)> = config
        .sweep
        .wavevectors
        .iter()
        .flat_map(|k| config.sweep.amplitudes.iter().map(move |&a| (k, a)))
        .collect();

    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|(k, a)| sweep_point(&domain, mu, &config.flow, k, *a))
        .collect();

    std::fs::write(&csv_path, sweep_csv(&rows))?;
    Ok(SweepArtifacts {
        rows,
        csv_path,
        exit_code: EXIT_CONVERGED,
    })
}

fn sweep_point(
    domain: &Arc<TorusDomain>,
    mu: f64,
    flow: &FlowConfig,
    wavevector: &[i64],
    amplitude: f64,
) -> SweepRow {
    let failure = |outcome: &str, ca: f64| SweepRow {
        wavevector: wavevector.to_vec(),
        amplitude,
        initial_calabi: ca,
        outcome: outcome.to_string(),
        t_half: None,
        steps: 0,
        final_calabi: ca,
    };
    let mode = CosineMode {
        wavevector: wavevector.to_vec(),
        amplitude,
    };
    let phi = match PotentialField::from_modes(domain.clone(), std::slice::from_ref(&mode)) {
        Ok(p) => p,
        Err(_) => return failure("invalid_mode", f64::NAN),
    };
    let state = match FlowState::initial(phi, mu) {
        Ok(s) => s,
        Err(Error::NotKahler { .. }) => return failure("not_kahler", f64::NAN),
        Err(_) => return failure("invalid_start", f64::NAN),
    };
    let initial_calabi = state.calabi;
    let driver = match FlowDriver::from_state(state, mu, flow.clone()) {
        Ok(d) => d,
        Err(_) => return failure("config_error", initial_calabi),
    };
    match driver.run() {
        Ok(run) => {
            let t_half = run
                .records
                .iter()
                .find(|r| r.calabi <= 0.5 * initial_calabi)
                .map(|r| r.t);
            SweepRow {
                wavevector: wavevector.to_vec(),
                amplitude,
                initial_calabi,
                outcome: run.outcome.label().to_string(),
                t_half,
                steps: run.accepted,
                final_calabi: run.state.calabi,
            }
        }
        Err(Error::NoProgress { .. }) => failure("no_progress", initial_calabi),
        Err(_) => failure("failed", initial_calabi),
    }
}

/// Registered checks in reporting order. The residual checks compare to
/// `residual_tolerance`; the two inequalities to `margin_tolerance`; the
/// energy decomposition carries its own per-case relative tolerance.
const CHECK_ORDER: [&str; 7] = [
    "laplace_of_volume_ratio",
    "dual_laplace_of_volume_ratio",
    "ricci_difference",
    "greens_representation",
    "arithmetic_geometric_means",
    "jensen_mean",
    "energy_decomposition",
];

pub struct CheckArtifacts {
    /// Worst case per registered check, in `CHECK_ORDER`.
    pub reports: Vec<IdentityReport>,
    pub table: String,
    pub json_path: PathBuf,
    pub exit_code: i32,
}

fn absorb(worst: &mut [Option<IdentityReport>], report: IdentityReport) {
    let slot = CHECK_ORDER
        .iter()
        .position(|n| *n == report.name)
        .expect("report name is registered");
    let severity = report.residual_sup / report.tolerance;
    let keep = match &worst[slot] {
        Some(cur) => severity > cur.residual_sup / cur.tolerance,
        None => true,
    };
    if keep {
        worst[slot] = Some(report);
    }
}

/// Hessian budget for random draws. The complex Hessian of a·cos(2πΣwx)
/// has operator norm at most π²(Σ|w|)²a; capping the summed bound keeps the
/// metric safely inside the Kähler cone and, just as importantly, keeps the
/// harmonic content of its curvature decaying fast enough that the grid
/// resolves the identities being checked.
const MODE_BUDGET: f64 = 0.25;

/// Random mode set, rescaled when the summed Hessian bound exceeds the
/// budget.
fn draw_modes(rng: &mut ChaCha8Rng, domain: &TorusDomain, suite: &SuiteConfig) -> Vec<CosineMode> {
    let axes = domain.axes();
    let mut modes = Vec::with_capacity(suite.modes_per_case as usize);
    let mut budget = 0.0;
    for _ in 0..suite.modes_per_case {
        let wavevector: Vec<i64> = loop {
            let k: Vec<i64> = (0..axes)
                .map(|_| rng.gen_range(-suite.max_wave..=suite.max_wave))
                .collect();
            if k.iter().any(|&v| v != 0) {
                break k;
            }
        };
        let amplitude = rng.gen_range(0.0..suite.max_amplitude);
        let s1: f64 = wavevector
            .iter()
            .enumerate()
            .map(|(a, &k)| k.abs() as f64 / domain.period(a))
            .sum();
        budget += PI * PI * s1 * s1 * amplitude;
        modes.push(CosineMode {
            wavevector,
            amplitude,
        });
    }
    if budget > MODE_BUDGET {
        let scale = MODE_BUDGET / budget;
        for m in &mut modes {
            m.amplitude *= scale;
        }
    }
    modes
}

/// Run every identity and inequality check over seeded random suites and
/// keep the worst case of each. Exit is clean only if all pass.
pub fn execute_check(config: &CheckConfig) -> Result<CheckArtifacts> {
    config.validate()?;
    let dir = config.output.resolved_directory();
    std::fs::create_dir_all(&dir)?;
    let json_path = dir.join(&config.output.checks_json);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut worst: Vec<Option<IdentityReport>> = vec![None; CHECK_ORDER.len()];

    for suite in &config.suites {
        let domain = suite.build_domain()?;
        let base = MetricField::flat(domain.clone());
        let base_curv = Arc::new(CurvatureBundle::of(&base));
        let cohomology = CohomologyData::flat_torus(domain.n(), domain.background_volume())?;
        for _ in 0..suite.cases {
            let modes = draw_modes(&mut rng, &domain, suite);
            let phi = PotentialField::from_modes(domain.clone(), &modes)?;
            let metric = MetricField::from_potential(&phi)?;
            drop(phi);
            let curv = Arc::new(CurvatureBundle::of(&metric));
            let pair =
                MetricPair::with_curvatures(&metric, curv.clone(), &base, base_curv.clone())?;
            absorb(&mut worst, check_laplace_f(&pair, config.residual_tolerance));
            absorb(
                &mut worst,
                check_dual_laplace_f(&pair, config.residual_tolerance),
            );
            absorb(
                &mut worst,
                check_ricci_difference(&pair, config.residual_tolerance),
            );
            let f = pair.f_potential();
            let greens = if config.inject_greens_sign_flip {
                check_greens_sign_flipped(&base, &f, config.residual_tolerance)?
            } else {
                check_greens(&base, &f, config.residual_tolerance)?
            };
            absorb(&mut worst, greens);
            absorb(&mut worst, check_amgm(&pair, config.margin_tolerance));
            absorb(&mut worst, check_jensen(&pair, config.margin_tolerance));
            let energy = decomposition_check_with(&metric, &curv, &cohomology);
            absorb(
                &mut worst,
                IdentityReport {
                    name: "energy_decomposition".to_string(),
                    residual_sup: energy.decomposition_residual.abs(),
                    residual_l2: energy.decomposition_residual.abs(),
                    tolerance: energy.residual_tolerance,
                    pass: energy.passes(),
                },
            );
        }
    }

    let reports: Vec<IdentityReport> = worst.into_iter().flatten().collect();
    let exit_code = if reports.iter().all(|r| r.pass) {
        EXIT_CONVERGED
    } else {
        EXIT_CHECKS_FAILED
    };
    let table = check_table(&reports);
    std::fs::write(&json_path, checks_json(&reports))?;
    Ok(CheckArtifacts {
        reports,
        table,
        json_path,
        exit_code,
    })
}

/// Class-level report behind the `cohomology` subcommand.
#[derive(Clone, Debug)]
pub struct CohomologyReport {
    pub data: CohomologyData,
    pub mu: f64,
    pub psi: f64,
    /// The first Chern class is a multiple of the Kähler class, which forces
    /// the class-level energy term to vanish.
    pub proportional: bool,
    /// Threshold below which a negative Ψ is flagged.
    pub epsilon: f64,
}

pub fn cohomology_report(
    n: usize,
    c1_w_nm1: f64,
    c1sq_w_nm2: f64,
    w_n: f64,
    epsilon: f64,
) -> Result<CohomologyReport> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::Config(format!(
            "epsilon must be nonnegative, got {epsilon}"
        )));
    }
    let data = CohomologyData::new(n, c1_w_nm1, c1sq_w_nm2, w_n)?;
    let gap = c1sq_w_nm2 - c1_w_nm1 * c1_w_nm1 / w_n;
    let scale = c1sq_w_nm2
        .abs()
        .max(c1_w_nm1 * c1_w_nm1 / w_n)
        .max(f64::MIN_POSITIVE);
    Ok(CohomologyReport {
        data,
        mu: data.mu(),
        psi: data.psi(),
        proportional: n == 1 || gap.abs() <= 1e-14 * scale,
        epsilon,
    })
}

impl CohomologyReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "n = {}\nmu = {}\npsi = {}\n",
            self.data.n, self.mu, self.psi
        );
        if self.proportional {
            out.push_str("note: classes are proportional, psi vanishes identically\n");
        }
        if self.psi > 0.0 {
            out.push_str(
                "note: psi > 0, the energy decomposition carries a positive class-level term\n",
            );
        }
        if self.psi <= -self.epsilon {
            out.push_str(&format!(
                "warning: psi <= -{:e}, below the admissible threshold\n",
                self.epsilon
            ));
        }
        out
    }
}
