//! Experiment configuration: schema-versioned TOML, fail-closed.
//!
//! Unknown keys are errors, the schema version is mandatory, and every
//! config round-trips losslessly through serialization, so an experiment is
//! reproducible from its config file alone. The output directory can be
//! redirected at launch time through `CALABI_OUTPUT_DIR` without touching
//! the file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cohomology::CohomologyData;
use crate::error::Error;
use crate::fields::CosineMode;
use crate::flow::FlowConfig;
use crate::grid::TorusDomain;
use crate::Result;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable that overrides `output.directory`.
pub const OUTPUT_DIR_ENV: &str = "CALABI_OUTPUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub n: usize,
    pub size: usize,
    pub periods: Vec<f64>,
}

impl DomainConfig {
    pub fn build(&self) -> Result<Arc<TorusDomain>> {
        TorusDomain::new(self.n, self.size, &self.periods)
    }
}

/// One cosine component of the initial potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub wavevector: Vec<i64>,
    pub amplitude: f64,
}

impl ModeConfig {
    pub fn to_mode(&self) -> CosineMode {
        CosineMode {
            wavevector: self.wavevector.clone(),
            amplitude: self.amplitude,
        }
    }
}

/// Start data: an explicit mode list (empty means the flat background) or a
/// checkpoint to resume. Never both.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub modes: Vec<ModeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

impl InitialConfig {
    fn validate(&self) -> Result<()> {
        if self.checkpoint.is_some() && !self.modes.is_empty() {
            return Err(Error::Config(
                "initial: give either a mode list or a checkpoint, not both".into(),
            ));
        }
        Ok(())
    }
}

/// Intersection numbers of the class being flowed. Omitted in a config, the
/// run uses the flat-torus values of its domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohomologyConfig {
    pub c1_w_nm1: f64,
    pub c1sq_w_nm2: f64,
    pub w_n: f64,
}

impl CohomologyConfig {
    pub fn build(&self, n: usize) -> Result<CohomologyData> {
        CohomologyData::new(n, self.c1_w_nm1, self.c1sq_w_nm2, self.w_n)
    }
}

fn default_trajectory_csv() -> String {
    "trajectory.csv".into()
}
fn default_summary_json() -> String {
    "summary.json".into()
}
fn default_checkpoint_file() -> String {
    "checkpoint.bin".into()
}
fn default_sweep_csv() -> String {
    "sweep.csv".into()
}
fn default_checks_json() -> String {
    "checks.json".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Base directory for artifacts; created on demand.
    pub directory: PathBuf,
    #[serde(default = "default_trajectory_csv")]
    pub trajectory_csv: String,
    #[serde(default = "default_summary_json")]
    pub summary_json: String,
    /// Accepted steps between checkpoint rewrites; 0 disables checkpointing.
    #[serde(default)]
    pub checkpoint_every: u64,
    #[serde(default = "default_checkpoint_file")]
    pub checkpoint_file: String,
    #[serde(default = "default_sweep_csv")]
    pub sweep_csv: String,
    #[serde(default = "default_checks_json")]
    pub checks_json: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("."),
            trajectory_csv: default_trajectory_csv(),
            summary_json: default_summary_json(),
            checkpoint_every: 0,
            checkpoint_file: default_checkpoint_file(),
            sweep_csv: default_sweep_csv(),
            checks_json: default_checks_json(),
        }
    }
}

impl OutputConfig {
    /// Directory after the environment override.
    pub fn resolved_directory(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.directory.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub domain: DomainConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohomology: Option<CohomologyConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn check_schema(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema_version {version}, this build reads {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text, origin)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        self.domain.build()?;
        self.initial.validate()?;
        self.flow.validate()?;
        if let Some(c) = &self.cohomology {
            c.build(self.domain.n)?;
        }
        Ok(())
    }

    /// The class data this run flows in: the config's, or the flat-torus
    /// pairing of the domain.
    pub fn cohomology_data(&self, domain: &TorusDomain) -> Result<CohomologyData> {
        match &self.cohomology {
            Some(c) => c.build(domain.n()),
            None => CohomologyData::flat_torus(domain.n(), domain.background_volume()),
        }
    }
}

/// Cartesian grid of single-mode start data for a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub wavevectors: Vec<Vec<i64>>,
    pub amplitudes: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema_version: u32,
    pub domain: DomainConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohomology: Option<CohomologyConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    pub sweep: SweepGrid,
}

impl SweepConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text, origin)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        let domain = self.domain.build()?;
        self.flow.validate()?;
        if let Some(c) = &self.cohomology {
            c.build(self.domain.n)?;
        }
        for k in &self.sweep.wavevectors {
            domain.check_wavevector(k)?;
        }
        for &a in &self.sweep.amplitudes {
            if !a.is_finite() {
                return Err(Error::Config(format!("sweep amplitude {a} is not finite")));
            }
        }
        Ok(())
    }

    pub fn cohomology_data(&self, domain: &TorusDomain) -> Result<CohomologyData> {
        match &self.cohomology {
            Some(c) => c.build(domain.n()),
            None => CohomologyData::flat_torus(domain.n(), domain.background_volume()),
        }
    }
}

fn default_max_amplitude() -> f64 {
    1e-2
}
fn default_max_wave() -> i64 {
    3
}
fn default_modes_per_case() -> u32 {
    3
}

/// One randomized family of test potentials on one grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub n: usize,
    pub size: usize,
    pub periods: Vec<f64>,
    /// Number of random potentials drawn.
    pub cases: u32,
    /// Upper bound on any single cosine amplitude.
    #[serde(default = "default_max_amplitude")]
    pub max_amplitude: f64,
    /// Wavevector entries are drawn from [-max_wave, max_wave].
    #[serde(default = "default_max_wave")]
    pub max_wave: i64,
    #[serde(default = "default_modes_per_case")]
    pub modes_per_case: u32,
}

impl SuiteConfig {
    pub fn build_domain(&self) -> Result<Arc<TorusDomain>> {
        TorusDomain::new(self.n, self.size, &self.periods)
    }
}

fn default_residual_tolerance() -> f64 {
    1e-9
}
fn default_margin_tolerance() -> f64 {
    1e-12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub suites: Vec<SuiteConfig>,
    /// Corrupts the spectral inversion inside the representation-formula
    /// check; exists to prove the checker can see a broken kernel.
    #[serde(default)]
    pub inject_greens_sign_flip: bool,
    #[serde(default = "default_residual_tolerance")]
    pub residual_tolerance: f64,
    #[serde(default = "default_margin_tolerance")]
    pub margin_tolerance: f64,
    #[serde(default)]
    pub output: OutputConfig,
}

impl CheckConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text, origin)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        if self.suites.is_empty() {
            return Err(Error::Config("check config needs at least one suite".into()));
        }
        for s in &self.suites {
            s.build_domain()?;
            if !(s.max_amplitude.is_finite() && s.max_amplitude > 0.0) {
                return Err(Error::Config(format!(
                    "max_amplitude must be positive, got {}",
                    s.max_amplitude
                )));
            }
            if s.max_wave < 1 || s.max_wave as usize >= s.size / 2 {
                return Err(Error::Config(format!(
                    "max_wave {} out of range for size {}",
                    s.max_wave, s.size
                )));
            }
            if s.modes_per_case == 0 {
                return Err(Error::Config("modes_per_case must be at least 1".into()));
            }
        }
        if !(self.residual_tolerance.is_finite() && self.residual_tolerance > 0.0) {
            return Err(Error::Config("residual_tolerance must be positive".into()));
        }
        if !(self.margin_tolerance.is_finite() && self.margin_tolerance > 0.0) {
            return Err(Error::Config("margin_tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RUN_TOML: &str = r#"
        schema_version = 1

        [domain]
        n = 1
        size = 32
        periods = [1.0, 1.0]

        [[initial.modes]]
        wavevector = [1, 0]
        amplitude = 0.01

        [flow]
        dt_init = 1e-5
        stop_ca = 1e-10

        [output]
        directory = "out"
        checkpoint_every = 5
    "#;

    #[test]
    fn run_config_parses_and_round_trips() {
        let cfg = RunConfig::parse(RUN_TOML, "inline").unwrap();
        assert_eq!(cfg.domain.size, 32);
        assert_eq!(cfg.initial.modes.len(), 1);
        assert_eq!(cfg.flow.stop_ca, 1e-10);
        assert_eq!(cfg.flow.dt_growth, 1.2, "unset fields take defaults");
        assert_eq!(cfg.output.checkpoint_every, 5);
        assert_eq!(cfg.output.trajectory_csv, "trajectory.csv");

        let text = toml::to_string(&cfg).unwrap();
        let back = RunConfig::parse(&text, "round-trip").unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let bad = RUN_TOML.replace("dt_init", "dt_initial");
        let err = RunConfig::parse(&bad, "inline").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("dt_initial"), "{msg}");
        assert!(msg.contains("line"), "parse errors carry a location: {msg}");
    }

    #[test]
    fn schema_version_is_enforced() {
        let bad = RUN_TOML.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(
            RunConfig::parse(&bad, "inline"),
            Err(Error::Config(_))
        ));
        let missing = RUN_TOML.replace("schema_version = 1", "");
        assert!(RunConfig::parse(&missing, "inline").is_err());
    }

    #[test]
    fn initial_rejects_modes_and_checkpoint_together() {
        let bad = format!("{RUN_TOML}\n[initial]\ncheckpoint = \"x.bin\"\n");
        // toml itself rejects the duplicate [initial] table, so build the
        // conflicting config directly.
        assert!(RunConfig::parse(&bad, "inline").is_err());
        let mut cfg = RunConfig::parse(RUN_TOML, "inline").unwrap();
        cfg.initial.checkpoint = Some(PathBuf::from("x.bin"));
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn flat_initial_is_the_default() {
        let minimal = r#"
            schema_version = 1
            [domain]
            n = 1
            size = 16
            periods = [1.0, 1.0]
        "#;
        let cfg = RunConfig::parse(minimal, "inline").unwrap();
        assert!(cfg.initial.modes.is_empty());
        assert!(cfg.initial.checkpoint.is_none());
        let domain = cfg.domain.build().unwrap();
        let data = cfg.cohomology_data(&domain).unwrap();
        assert_eq!(data.mu(), 0.0);
        assert_eq!(data.w_n, domain.background_volume());
    }

    #[test]
    fn sweep_config_validates_grid_points() {
        let text = r#"
            schema_version = 1
            [domain]
            n = 1
            size = 16
            periods = [1.0, 1.0]
            [sweep]
            wavevectors = [[1, 0], [0, 9]]
            amplitudes = [1e-3]
        "#;
        assert!(matches!(
            SweepConfig::parse(text, "inline"),
            Err(Error::AliasedMode { .. })
        ));
        let ok = text.replace("[0, 9]", "[0, 7]");
        let cfg = SweepConfig::parse(&ok, "inline").unwrap();
        assert_eq!(cfg.sweep.wavevectors.len(), 2);
        assert_eq!(cfg.output.sweep_csv, "sweep.csv");
    }

    #[test]
    fn check_config_parses_with_defaults() {
        let text = r#"
            schema_version = 1
            seed = 42
            [[suites]]
            n = 1
            size = 32
            periods = [1.0, 1.0]
            cases = 5
        "#;
        let cfg = CheckConfig::parse(text, "inline").unwrap();
        assert_eq!(cfg.seed, 42);
        assert!(!cfg.inject_greens_sign_flip);
        assert_eq!(cfg.residual_tolerance, 1e-9);
        assert_eq!(cfg.margin_tolerance, 1e-12);
        assert_eq!(cfg.suites[0].max_amplitude, 1e-2);
        assert_eq!(cfg.suites[0].max_wave, 3);

        let text = toml::to_string(&cfg).unwrap();
        let back = CheckConfig::parse(&text, "round-trip").unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn output_directory_override_comes_from_the_environment() {
        // Read-only check against the ambient environment: when the variable
        // is unset the config value wins. The override path itself is
        // exercised end-to-end in the CLI tests, which can scope the
        // variable to a child process.
        let out = OutputConfig::default();
        if std::env::var_os(OUTPUT_DIR_ENV).is_none() {
            assert_eq!(out.resolved_directory(), PathBuf::from("."));
        }
    }
}
