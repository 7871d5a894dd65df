//! The acceptance gate. Eight criteria run in a fixed order inside one
//! test so that wall-clock budgets are measured without scheduler
//! interference and the volume criterion can audit every trajectory the
//! other criteria produce. Each criterion prints exactly one PASS/FAIL
//! line (visible with --nocapture); the test fails if any criterion does.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use calabi::cohomology::CohomologyData;
use calabi::config::CheckConfig;
use calabi::estimates::{
    check_amgm, check_dual_laplace_f, check_greens, check_jensen, check_laplace_f,
    check_ricci_difference, MetricPair,
};
use calabi::fields::{CosineMode, PotentialField};
use calabi::flow::{
    linearized_rate, rk_stability_limit, step_explicit_rk, step_imex, FlowConfig, FlowDriver,
    FlowOutcome, FlowState, MonitorStatus, TrapMonitor,
};
use calabi::functionals::decomposition_check_with;
use calabi::geometry::{CurvatureBundle, MetricField};
use calabi::runner::{cohomology_report, execute_check};
use calabi::TorusDomain;

/// Ok carries the measured numbers behind a PASS; Err the first failure.
type Verdict = Result<String, String>;

#[test]
fn acceptance() {
    let mut drifts: Vec<(&'static str, f64)> = Vec::new();
    let (c1, c2) = energy_decomposition_and_identities();
    let c3 = desk_convergence(&mut drifts);
    let c4 = linearized_decay_rate(&mut drifts);
    let c5 = volume_invariance(&drifts);
    let c6 = class_level_quantities();
    let c7 = integrator_cross_validation();
    let c8 = fault_detection();

    let outcomes = [
        (1, "energy decomposition", c1),
        (2, "elliptic identities", c2),
        (3, "desk convergence", c3),
        (4, "linearized decay rate", c4),
        (5, "volume invariance", c5),
        (6, "class-level quantities", c6),
        (7, "integrator cross-validation", c7),
        (8, "fault detection", c8),
    ];
    let mut failed = Vec::new();
    for (index, name, verdict) in outcomes {
        match verdict {
            Ok(detail) => println!("criterion {index} ({name}): PASS [{detail}]"),
            Err(detail) => {
                println!("criterion {index} ({name}): FAIL [{detail}]");
                failed.push(index);
            }
        }
    }
    assert!(failed.is_empty(), "acceptance criteria failed: {failed:?}");
}

fn set(slot: &mut Option<String>, message: String) {
    if slot.is_none() {
        *slot = Some(message);
    }
}

fn verdict(error: Option<String>, pass_detail: String) -> Verdict {
    match error {
        None => Ok(pass_detail),
        Some(e) => Err(e),
    }
}

/// Nonzero wavevectors with amplitudes below `max_amplitude`, rescaled so
/// the summed Hessian operator-norm bound stays under a fixed cap: every
/// drawn potential is then safely Kahler and resolved by the grid.
fn draw_admissible_modes(
    rng: &mut ChaCha8Rng,
    domain: &TorusDomain,
    per_case: usize,
    max_wave: i64,
    max_amplitude: f64,
) -> Vec<CosineMode> {
    const BUDGET_CAP: f64 = 0.25;
    let axes = domain.axes();
    let mut modes = Vec::with_capacity(per_case);
    let mut budget = 0.0;
    for _ in 0..per_case {
        let mut wavevector = vec![0_i64; axes];
        loop {
            for c in wavevector.iter_mut() {
                *c = rng.gen_range(-max_wave..=max_wave);
            }
            if wavevector.iter().any(|&c| c != 0) {
                break;
            }
        }
        let amplitude = rng.gen_range(0.0..max_amplitude);
        let s1: f64 = wavevector
            .iter()
            .enumerate()
            .map(|(a, &c)| c.abs() as f64 / domain.period(a))
            .sum();
        budget += PI * PI * s1 * s1 * amplitude;
        modes.push(CosineMode {
            wavevector,
            amplitude,
        });
    }
    if budget > BUDGET_CAP {
        let scale = BUDGET_CAP / budget;
        for m in &mut modes {
            m.amplitude *= scale;
        }
    }
    modes
}

/// Criteria 1 and 2 share one suite: 20 random potentials per dimension at
/// N = 64. Construction and the decomposition residual are charged to the
/// first criterion's clock, the elliptic identity checks to the second's.
fn energy_decomposition_and_identities() -> (Verdict, Verdict) {
    const RESIDUAL_TOL: f64 = 1e-9;
    const MARGIN_TOL: f64 = 1e-12;
    const BUDGET_SECONDS: f64 = 30.0;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut t_energy = Duration::ZERO;
    let mut t_checks = Duration::ZERO;
    let mut worst_decomposition = 0.0_f64; // residual as a fraction of its tolerance
    let mut worst_identity = 0.0_f64; // residual_sup over the four identities
    let mut worst_margin = 0.0_f64; // worst inequality violation seen
    let mut e1: Option<String> = None;
    let mut e2: Option<String> = None;

    for n in [1_usize, 2] {
        let axes = 2 * n;
        let domain = match TorusDomain::new(n, 64, &vec![1.0; axes]) {
            Ok(d) => d,
            Err(e) => {
                let msg = format!("dim {n}: domain construction failed: {e}");
                set(&mut e1, msg.clone());
                set(&mut e2, msg);
                continue;
            }
        };
        let cohomology = CohomologyData::flat_torus(n, domain.background_volume()).unwrap();
        let clock = Instant::now();
        let base = MetricField::flat(domain.clone());
        let base_curvature = Arc::new(CurvatureBundle::of(&base));
        t_checks += clock.elapsed();

        for case in 0..20 {
            let clock = Instant::now();
            let modes = draw_admissible_modes(&mut rng, &domain, 3, 3, 1e-2);
            let metric = {
                let phi = PotentialField::from_modes(domain.clone(), &modes).unwrap();
                MetricField::from_potential(&phi).unwrap()
            };
            let curvature = Arc::new(CurvatureBundle::of(&metric));
            let energy = decomposition_check_with(&metric, &curvature, &cohomology);
            t_energy += clock.elapsed();

            if energy.psi != 0.0 {
                set(&mut e1, format!("dim {n} case {case}: psi = {} on a torus", energy.psi));
            }
            let tolerance = 1e-8 * energy.calabi.max(1e-12);
            let residual = energy.decomposition_residual.abs();
            worst_decomposition = worst_decomposition.max(residual / tolerance);
            if residual > tolerance {
                set(
                    &mut e1,
                    format!("dim {n} case {case}: |Ca - dev - psi| = {residual:e} > {tolerance:e}"),
                );
            }

            let clock = Instant::now();
            let f = {
                let pair = MetricPair::with_curvatures(
                    &metric,
                    curvature.clone(),
                    &base,
                    base_curvature.clone(),
                )
                .unwrap();
                for report in [
                    check_laplace_f(&pair, RESIDUAL_TOL),
                    check_dual_laplace_f(&pair, RESIDUAL_TOL),
                    check_ricci_difference(&pair, RESIDUAL_TOL),
                ] {
                    worst_identity = worst_identity.max(report.residual_sup);
                    if !report.pass {
                        set(
                            &mut e2,
                            format!(
                                "dim {n} case {case}: {} residual {:e}",
                                report.name, report.residual_sup
                            ),
                        );
                    }
                }
                for report in [check_amgm(&pair, MARGIN_TOL), check_jensen(&pair, MARGIN_TOL)] {
                    worst_margin = worst_margin.max(report.residual_sup);
                    if !report.pass {
                        set(
                            &mut e2,
                            format!(
                                "dim {n} case {case}: {} margin -{:e}",
                                report.name, report.residual_sup
                            ),
                        );
                    }
                }
                pair.f_potential()
            };
            // The Green's check needs only the base; release the case fields
            // first so peak memory stays bounded on the 16.7M-point grids.
            drop(curvature);
            drop(metric);
            let report = check_greens(&base, &f, RESIDUAL_TOL).unwrap();
            worst_identity = worst_identity.max(report.residual_sup);
            if !report.pass {
                set(
                    &mut e2,
                    format!(
                        "dim {n} case {case}: {} residual {:e}",
                        report.name, report.residual_sup
                    ),
                );
            }
            t_checks += clock.elapsed();
        }
    }

    let s1 = t_energy.as_secs_f64();
    let s2 = t_checks.as_secs_f64();
    if s1 >= BUDGET_SECONDS {
        set(
            &mut e1,
            format!(
                "runtime {s1:.1}s exceeds the 30s budget (all residuals passed; worst at {worst_decomposition:.1e} of tolerance)"
            ),
        );
    }
    if s2 >= BUDGET_SECONDS {
        set(
            &mut e2,
            format!(
                "runtime {s2:.1}s exceeds the 30s budget (all residuals passed; worst identity {worst_identity:.1e}, worst margin -{worst_margin:.1e})"
            ),
        );
    }
    (
        verdict(
            e1,
            format!(
                "40 cases, worst residual at {worst_decomposition:.1e} of tolerance, psi = 0 throughout, {s1:.1}s"
            ),
        ),
        verdict(
            e2,
            format!(
                "worst identity residual {worst_identity:.1e}, worst margin -{worst_margin:.1e}, {s2:.1}s"
            ),
        ),
    )
}

/// One desk-scale convergence run; pushes its volume drift for criterion 5.
fn converge(
    label: &'static str,
    phi: PotentialField,
    budget_seconds: f64,
    drifts: &mut Vec<(&'static str, f64)>,
) -> Result<String, String> {
    let clock = Instant::now();
    let state = FlowState::initial(phi, 0.0).map_err(|e| format!("{label}: {e}"))?;
    let ca0 = state.calabi;
    let config = FlowConfig {
        stop_ca: 1e-9 * ca0,
        t_max: 10.0,
        ..FlowConfig::default()
    };
    let slack = config.ca_slack;
    let run = FlowDriver::from_state(state, 0.0, config)
        .and_then(|d| d.run())
        .map_err(|e| format!("{label}: {e}"))?;
    let elapsed = clock.elapsed().as_secs_f64();
    drifts.push((label, run.volume_drift));

    if !matches!(run.outcome, FlowOutcome::Converged) {
        return Err(format!("{label}: stopped as {}", run.outcome.label()));
    }
    let ratio = run.state.calabi / ca0;
    if ratio > 1e-6 {
        return Err(format!("{label}: Ca(T)/Ca(0) = {ratio:e} > 1e-6"));
    }
    let sup_phi = run.state.phi.sup_norm();
    if sup_phi > 1e-6 {
        return Err(format!("{label}: sup|phi_T| = {sup_phi:e} > 1e-6"));
    }
    if run.accepted > 10_000 {
        return Err(format!("{label}: {} accepted steps > 10^4", run.accepted));
    }
    if matches!(run.monitor.status(), MonitorStatus::Exited { .. }) {
        return Err(format!("{label}: monitor exited"));
    }
    for w in run.records.windows(2) {
        let allowed = w[0].calabi + slack * w[0].calabi.max(1e-14);
        if w[1].calabi > allowed {
            return Err(format!(
                "{label}: Ca rose {:e} -> {:e} at step {}",
                w[0].calabi, w[1].calabi, w[1].step
            ));
        }
    }
    if elapsed >= budget_seconds {
        return Err(format!(
            "{label}: runtime {elapsed:.1}s exceeds the {budget_seconds:.0}s budget (converged to {ratio:e})"
        ));
    }
    Ok(format!(
        "{label}: ratio {ratio:.1e}, sup|phi| {sup_phi:.1e}, {} steps, {elapsed:.1}s",
        run.accepted
    ))
}

fn desk_convergence(drifts: &mut Vec<(&'static str, f64)>) -> Verdict {
    let domain = TorusDomain::new(1, 64, &[1.0, 1.0]).map_err(|e| e.to_string())?;
    let phi = PotentialField::from_modes(
        domain,
        &[CosineMode {
            wavevector: vec![1, 0],
            amplitude: 0.01,
        }],
    )
    .map_err(|e| e.to_string())?;
    let one = converge("dim 1", phi, 60.0, drifts)?;

    let domain = TorusDomain::new(2, 32, &[1.0; 4]).map_err(|e| e.to_string())?;
    let phi = PotentialField::from_modes(
        domain,
        &[
            CosineMode {
                wavevector: vec![1, 0, 0, 0],
                amplitude: 5e-3,
            },
            CosineMode {
                wavevector: vec![0, 0, 1, 0],
                amplitude: 5e-3,
            },
        ],
    )
    .map_err(|e| e.to_string())?;
    let two = converge("dim 2", phi, 300.0, drifts)?;
    Ok(format!("{one}; {two}"))
}

/// Least-squares slope of y against t.
fn fitted_slope(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / m;
    let cov: f64 = points.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum();
    let var: f64 = points.iter().map(|p| (p.0 - mean_t) * (p.0 - mean_t)).sum();
    cov / var
}

fn linearized_decay_rate(drifts: &mut Vec<(&'static str, f64)>) -> Verdict {
    let domain = TorusDomain::new(1, 64, &[1.0, 1.0]).map_err(|e| e.to_string())?;
    let rate = linearized_rate(&domain, &[1, 0]).map_err(|e| e.to_string())?;
    let phi = PotentialField::from_modes(
        domain,
        &[CosineMode {
            wavevector: vec![1, 0],
            amplitude: 1e-4,
        }],
    )
    .map_err(|e| e.to_string())?;
    // A fixed small step keeps the implicit update's rate distortion
    // (about dt*rate/2, here 1.6%) inside the fit tolerances.
    let dt = 2e-5;
    let config = FlowConfig {
        dt_init: dt,
        dt_max: dt,
        stop_ca: 0.0,
        t_max: 3e-3,
        ..FlowConfig::default()
    };
    let run = FlowDriver::new(phi, 0.0, config)
        .and_then(|d| d.run())
        .map_err(|e| e.to_string())?;
    drifts.push(("rate fit", run.volume_drift));

    let amp: Vec<(f64, f64)> = run.records.iter().map(|r| (r.t, r.sup_phi.ln())).collect();
    let ca: Vec<(f64, f64)> = run.records.iter().map(|r| (r.t, r.calabi.ln())).collect();
    if amp.len() < 20 {
        return Err(format!("only {} records to fit", amp.len()));
    }
    let amp_rate = -fitted_slope(&amp);
    let ca_rate = -fitted_slope(&ca);
    if (amp_rate - rate).abs() > 0.05 * rate {
        return Err(format!(
            "amplitude rate {amp_rate:.2} vs linearized {rate:.2}: off by {:.1}%",
            100.0 * (amp_rate - rate).abs() / rate
        ));
    }
    if (ca_rate - 2.0 * rate).abs() > 0.10 * 2.0 * rate {
        return Err(format!(
            "energy rate {ca_rate:.2} vs expected {:.2}: off by {:.1}%",
            2.0 * rate,
            100.0 * (ca_rate - 2.0 * rate).abs() / (2.0 * rate)
        ));
    }
    Ok(format!(
        "amplitude rate {amp_rate:.1} vs {rate:.1} ({:+.2}%), energy rate {ca_rate:.1} vs {:.1} ({:+.2}%)",
        100.0 * (amp_rate - rate) / rate,
        2.0 * rate,
        100.0 * (ca_rate - 2.0 * rate) / (2.0 * rate)
    ))
}

fn volume_invariance(drifts: &[(&'static str, f64)]) -> Verdict {
    if drifts.is_empty() {
        return Err("no trajectories ran".into());
    }
    let mut worst = drifts[0];
    for &(label, drift) in drifts {
        if drift > worst.1 {
            worst = (label, drift);
        }
        if drift > 1e-9 {
            return Err(format!("{label}: volume drift {drift:e} > 1e-9"));
        }
    }
    Ok(format!(
        "{} trajectories, worst drift {:.1e} ({})",
        drifts.len(),
        worst.1,
        worst.0
    ))
}

fn class_level_quantities() -> Verdict {
    let err = |e: calabi::Error| e.to_string();
    // n = 1: the correction term vanishes identically.
    let line = cohomology_report(1, 0.7, 0.0, 2.0, 1e-10).map_err(err)?;
    if line.psi != 0.0 {
        return Err(format!("n = 1 psi = {} (expected exact zero)", line.psi));
    }
    // Proportional classes with exactly representable pairings.
    let proportional = cohomology_report(2, 6.0, 3.0, 12.0, 1e-10).map_err(err)?;
    if proportional.psi != 0.0 || !proportional.proportional {
        return Err(format!(
            "proportional classes: psi = {}, flagged = {}",
            proportional.psi, proportional.proportional
        ));
    }
    // Pairings (c1^2*w^0, c1*w, w^2) = (1, 2, 5) give psi = 2 pi^2 / 5.
    let example = cohomology_report(2, 2.0, 1.0, 5.0, 1e-10).map_err(err)?;
    let expected = 2.0 * PI * PI / 5.0;
    if (example.psi - expected).abs() > 1e-12 {
        return Err(format!("psi = {} vs 2pi^2/5 = {expected}", example.psi));
    }
    // Scaling the class by t scales mu by 1/t.
    let base = CohomologyData::new(2, 2.0, 1.0, 5.0).map_err(err)?;
    for t in [0.5, 2.0, 10.0] {
        let scaled = CohomologyData::new(2, t * 2.0, 1.0, t * t * 5.0).map_err(err)?;
        let drift = (scaled.mu() - base.mu() / t).abs();
        if drift > 1e-12 {
            return Err(format!("mu homogeneity at t = {t}: drift {drift:e}"));
        }
    }
    Ok(format!(
        "psi exact on torus and proportional classes, example at {:.1e} of 2pi^2/5, mu homogeneous over half/2/10",
        (example.psi - expected).abs() / expected
    ))
}

fn integrator_cross_validation() -> Verdict {
    let domain = TorusDomain::new(1, 16, &[1.0, 1.0]).map_err(|e| e.to_string())?;
    let phi = PotentialField::from_modes(
        domain.clone(),
        &[CosineMode {
            wavevector: vec![1, 0],
            amplitude: 1e-2,
        }],
    )
    .map_err(|e| e.to_string())?;
    let state = FlowState::initial(phi, 0.0).map_err(|e| e.to_string())?;
    let dt0 = 0.5 * rk_stability_limit(&domain);

    let mut differences = Vec::new();
    for halving in 0..4 {
        let dt = dt0 / f64::powi(2.0, halving);
        let implicit = step_imex(&state, 0.0, dt).map_err(|e| e.to_string())?;
        let explicit = step_explicit_rk(&state, 0.0, dt).map_err(|e| e.to_string())?;
        let diff = implicit
            .phi
            .values()
            .iter()
            .zip(explicit.phi.values())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        differences.push(diff);
    }
    let mut ratios = Vec::new();
    for w in differences.windows(2) {
        let ratio = w[0] / w[1];
        if !(3.5..=4.5).contains(&ratio) {
            return Err(format!(
                "halving ratio {ratio:.3} outside [3.5, 4.5] (differences {differences:?})"
            ));
        }
        ratios.push(ratio);
    }
    Ok(format!(
        "one-step gap {:.1e} at dt = {dt0:.1e}, halving ratios {:.3}/{:.3}/{:.3}",
        differences[0], ratios[0], ratios[1], ratios[2]
    ))
}

fn fault_detection() -> Verdict {
    // A sign flip in the Green's kernel must trip exactly that check.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let toml = format!(
        r#"
schema_version = 1
seed = 5
inject_greens_sign_flip = true

[[suites]]
n = 1
size = 32
periods = [1.0, 1.0]
cases = 2

[output]
directory = "{}"
"#,
        dir.path().display()
    );
    let config = CheckConfig::parse(&toml, "acceptance").map_err(|e| e.to_string())?;
    let artifacts = execute_check(&config).map_err(|e| e.to_string())?;
    let failing: Vec<&str> = artifacts
        .reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.name.as_str())
        .collect();
    if failing != ["greens_representation"] || artifacts.exit_code != 1 {
        return Err(format!(
            "sign flip tripped {failing:?} with exit {}",
            artifacts.exit_code
        ));
    }

    // A synthetic trajectory whose largest Ricci eigenvalue jumps past
    // twice the warmup bound must latch the monitor at exactly that step.
    let mut monitor = TrapMonitor::new(2.0, 5);
    let mut t = 0.0;
    for _ in 0..5 {
        t += 0.01;
        monitor.observe(t, -0.05, 0.10);
    }
    if monitor.status() != MonitorStatus::Inside {
        return Err(format!("after warmup: {}", monitor.status().label()));
    }
    for _ in 5..12 {
        t += 0.01;
        monitor.observe(t, -0.06, 0.15);
    }
    if monitor.status() != MonitorStatus::Inside {
        return Err(format!("inside the band: {}", monitor.status().label()));
    }
    let spike_time = t + 0.01;
    monitor.observe(spike_time, -0.06, 0.21);
    let exited_at = match monitor.status() {
        MonitorStatus::Exited { time, .. } => time,
        other => return Err(format!("spike not latched: {}", other.label())),
    };
    if exited_at != spike_time {
        return Err(format!("latched at t = {exited_at}, spike was at {spike_time}"));
    }
    // Later observations must not move the latch.
    monitor.observe(spike_time + 0.01, -0.06, 0.30);
    match monitor.status() {
        MonitorStatus::Exited { time, .. } if time == spike_time => {}
        other => return Err(format!("latch moved: {}", other.label())),
    }
    Ok(format!(
        "sign flip isolated to greens_representation; synthetic spike latched at t = {spike_time}"
    ))
}
