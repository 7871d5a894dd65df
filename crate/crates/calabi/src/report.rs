//! Deterministic text artifacts: trajectory CSV, sweep CSV, summary JSON,
//! and the identity-check table.
//!
//! Builders return strings and do no IO. Floats are written in shortest
//! exponential form, which round-trips exactly and is byte-stable across
//! runs, so identical inputs produce identical files; wall-clock time
//! appears only in the summary JSON, never in a CSV.

use serde::Serialize;

use crate::estimates::IdentityReport;
use crate::flow::DiagnosticsRecord;

pub const TRAJECTORY_HEADER: &str =
    "step,t,dt,calabi,ricci_eig_min,ricci_eig_max,scalar_min,sup_phi,spectral_tail,monitor_status";

pub const SWEEP_HEADER: &str = "wavevector,amplitude,initial_ca,outcome,t_half,steps,final_ca";

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

/// Rows for every record whose step index is a multiple of `record_every`,
/// plus the final record regardless, so the end state is never dropped.
pub fn trajectory_csv(records: &[DiagnosticsRecord], record_every: u64) -> String {
    let stride = record_every.max(1);
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    let last = records.len().wrapping_sub(1);
    for (i, r) in records.iter().enumerate() {
        if r.step % stride != 0 && i != last {
            continue;
        }
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.step,
            fmt(r.t),
            fmt(r.dt_used),
            fmt(r.calabi),
            fmt(r.ricci_eig_min),
            fmt(r.ricci_eig_max),
            fmt(r.scalar_min),
            fmt(r.sup_phi),
            fmt(r.spectral_tail),
            r.monitor_status,
        ));
    }
    out
}

/// One sweep run boiled down to a table row.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub wavevector: Vec<i64>,
    pub amplitude: f64,
    pub initial_calabi: f64,
    pub outcome: String,
    /// First trajectory time at which the energy had halved, if it did.
    pub t_half: Option<f64>,
    pub steps: u64,
    pub final_calabi: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(48 * (rows.len() + 1));
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let wave = r
            .wavevector
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            wave,
            fmt(r.amplitude),
            fmt(r.initial_calabi),
            r.outcome,
            r.t_half.map_or_else(|| "nan".into(), fmt),
            r.steps,
            fmt(r.final_calabi),
        ));
    }
    out
}

/// Run summary written next to the trajectory. Field order is fixed by the
/// struct; `wall_time_seconds` is the only nondeterministic entry.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub outcome: String,
    pub initial_calabi: f64,
    pub final_calabi: f64,
    pub calabi_ratio: f64,
    pub t_final: f64,
    pub steps_accepted: u64,
    pub steps_rejected: u64,
    pub sup_phi: f64,
    pub spectral_tail: f64,
    pub volume_drift: f64,
    pub mu: f64,
    /// Average of R against ω_φⁿ at the end state; the class pins it to μ.
    pub mean_scalar: f64,
    pub monitor_status: String,
    pub monitor_k3: Option<f64>,
    pub monitor_k4: Option<f64>,
    pub wall_time_seconds: f64,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Fixed-width table of identity reports for terminal output.
pub fn check_table(reports: &[IdentityReport]) -> String {
    let name_width = reports
        .iter()
        .map(|r| r.name.len())
        .chain(std::iter::once("check".len()))
        .max()
        .unwrap_or(5);
    let mut out = String::new();
    out.push_str(&format!(
        "{:<name_width$}  {:>13}  {:>13}  {:>13}  result\n",
        "check", "residual_sup", "residual_l2", "tolerance"
    ));
    for r in reports {
        out.push_str(&format!(
            "{:<name_width$}  {:>13.6e}  {:>13.6e}  {:>13.6e}  {}\n",
            r.name,
            r.residual_sup,
            r.residual_l2,
            r.tolerance,
            if r.pass { "pass" } else { "FAIL" },
        ));
    }
    out
}

pub fn checks_json(reports: &[IdentityReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
    s.push('\n');
    s
}
