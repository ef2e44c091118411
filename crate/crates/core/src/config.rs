//! Run configuration: one JSON document, every key optional.
//!
//! Precedence, highest first: command-line flags, the config file,
//! `QSW_MEMORY_OUTPUT_DIR` (output directory only), built-in defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{Criteria, Scenario};
use crate::network::{BinaryPattern, NetworkSpec};
use crate::photonic::{CouplerCalibration, DetuningDistribution, DEFAULT_SEGMENTS, DEFAULT_ENSEMBLE_SIZE};
use crate::qsw::QswRates;

pub const OUTPUT_DIR_ENV: &str = "QSW_MEMORY_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "qsw-output";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    #[default]
    Sweep,
    Calibrate,
    Hopfield,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Photonic,
    AbstractQsw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub omega: f64,
    pub rates: QswRates,
    pub step_mm: Option<f64>,
    pub length_mm: Option<f64>,
    pub n_segments: usize,
    pub distribution: DetuningDistribution,
    pub ensemble_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::Photonic,
            omega: 0.5,
            rates: QswRates::default(),
            step_mm: None,
            length_mm: None,
            n_segments: DEFAULT_SEGMENTS,
            distribution: DetuningDistribution::OneSided,
            ensemble_size: DEFAULT_ENSEMBLE_SIZE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub scenarios: Vec<Scenario>,
    pub amplitudes: Vec<f64>,
    pub samples_per_group: usize,
    pub include_baseline: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            scenarios: Scenario::ALL.to_vec(),
            amplitudes: vec![0.1, 0.2, 0.3, 0.4],
            samples_per_group: 5,
            include_baseline: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub scenario: Scenario,
    /// Must match the scenario when given.
    pub injection_site: Option<usize>,
    pub amplitude: f64,
    /// Detuning seed; `None` derives it from the master seed.
    pub sample_seed: Option<u64>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { scenario: Scenario::A, injection_site: None, amplitude: 0.4, sample_seed: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSection {
    pub coupler: CouplerCalibration,
    pub dbetas: Vec<f64>,
    pub z_max_mm: f64,
    pub n_points: usize,
    /// Relative standard deviation of multiplicative noise on the synthetic
    /// power samples.
    pub noise: f64,
    pub draws: usize,
    /// Detuning amplitudes whose ensemble dephasing rate is fitted.
    pub dephasing_amplitudes: Vec<f64>,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        CalibrationSection {
            coupler: CouplerCalibration::default(),
            dbetas: vec![0.1, 0.2, 0.4],
            z_max_mm: 40.0,
            n_points: 401,
            noise: 0.01,
            draws: 100,
            dephasing_amplitudes: vec![0.1, 0.2, 0.3, 0.4],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HopfieldSection {
    pub stored: Vec<BinaryPattern>,
    /// Inputs to retrieve from; empty means every threshold pattern.
    pub initial: Vec<BinaryPattern>,
    pub max_sweeps: usize,
    /// Neuron update order; empty means natural order.
    pub order: Vec<usize>,
}

impl Default for HopfieldSection {
    fn default() -> Self {
        HopfieldSection {
            stored: vec!["000000".parse().unwrap(), "111111".parse().unwrap()],
            initial: Vec::new(),
            max_sweeps: 100,
            order: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<String>,
    pub format: OutputFormat,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub network: NetworkSpec,
    pub model: ModelConfig,
    pub sweep: SweepSection,
    pub simulate: SimulateSection,
    pub criteria: Criteria,
    pub calibration: CalibrationSection,
    pub hopfield: HopfieldSection,
    pub output: OutputSection,
}

/// Every accepted key with a one-line description; printed by `--help`.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("command", "simulate | sweep | calibrate | hopfield; used when no subcommand is given (default sweep)"),
    ("seed", "master seed for every random draw (default 0)"),
    ("jobs", "worker threads; null uses all cores"),
    ("network.n_states", "state sites in the chain (default 7)"),
    ("network.chain_coupling", "coupling between neighbouring state sites, mm^-1 (default 0.03)"),
    ("network.sinks", "list of sink arrays; default one at each chain end"),
    ("network.sinks[].site", "zero-based state site the array attaches to"),
    ("network.sinks[].n_aux", "auxiliary sites in the array (default 50)"),
    ("network.sinks[].coupling", "coupling along the array, mm^-1; must exceed chain_coupling (default 0.15)"),
    ("network.evolution_length_mm", "propagation length, mm (default 80)"),
    ("network.base_propagation_constant", "common diagonal offset, mm^-1 (default 0)"),
    ("model.kind", "photonic | abstract_qsw (default photonic)"),
    ("model.omega", "classical weight of the abstract walk, 0..1 (default 0.5)"),
    ("model.rates.rate_constant", "rate of every chain and sink jump, mm^-1 (default 1)"),
    ("model.rates.dephasing_rate", "rate of pure-dephasing jumps on state sites, mm^-1 (default 0)"),
    ("model.step_mm", "abstract walk integration step, mm; null picks one automatically"),
    ("model.length_mm", "abstract walk length, mm; null uses network.evolution_length_mm"),
    ("model.n_segments", "detuning segments along the propagation axis (default 40)"),
    ("model.distribution", "one_sided (uniform on [0, a]) | symmetric (uniform on [-a/2, a/2])"),
    ("model.ensemble_size", "realizations per ensemble average (default 200)"),
    ("sweep.scenarios", "scenarios to run, subset of [\"A\", \"B\"]"),
    ("sweep.amplitudes", "detuning amplitudes of the sample groups, mm^-1 (default [0.1, 0.2, 0.3, 0.4])"),
    ("sweep.samples_per_group", "samples per amplitude group (default 5)"),
    ("sweep.include_baseline", "also run the undetuned walk (default true)"),
    ("simulate.scenario", "A (inject at site 1) | B (inject at the centre site)"),
    ("simulate.injection_site", "optional zero-based injection site; must match the scenario"),
    ("simulate.amplitude", "detuning amplitude, mm^-1 (default 0.4)"),
    ("simulate.sample_seed", "detuning seed; null derives one from seed"),
    ("criteria.a_factor", "scenario A passes when sink1 > a_factor * sink2 (default 2)"),
    ("criteria.a_strict", "whether sink1 = a_factor * sink2 fails (default true)"),
    ("criteria.b_low", "lower bound of the balanced sink1 share (default 0.4)"),
    ("criteria.b_high", "upper bound of the balanced sink1 share (default 0.6)"),
    ("criteria.b_inclusive", "whether the bounds count as balanced (default true)"),
    ("calibration.coupler.base_speed", "writing speed of the reference guide, mm/s (default 5)"),
    ("calibration.coupler.slope", "detuning per speed offset, mm^-1 per mm/s (default 0.20)"),
    ("calibration.coupler.coupling", "coupling of the calibration coupler, mm^-1 (default 0.3)"),
    ("calibration.dbetas", "detunings to round-trip, mm^-1 (default [0.1, 0.2, 0.4])"),
    ("calibration.z_max_mm", "length of the synthetic power scan, mm (default 40)"),
    ("calibration.n_points", "samples in the power scan (default 401)"),
    ("calibration.noise", "relative multiplicative noise on the scan (default 0.01)"),
    ("calibration.draws", "noisy repetitions per detuning (default 100)"),
    ("calibration.dephasing_amplitudes", "amplitudes whose dephasing rate is fitted, mm^-1"),
    ("hopfield.stored", "stored patterns as 0/1 strings (default [\"000000\", \"111111\"])"),
    ("hopfield.initial", "input patterns; empty means every threshold pattern"),
    ("hopfield.max_sweeps", "sweep limit per retrieval (default 100)"),
    ("hopfield.order", "neuron update order; empty means natural order"),
    ("output.dir", "output directory (default $QSW_MEMORY_OUTPUT_DIR, then qsw-output)"),
    ("output.format", "json | csv (default json)"),
];

/// Help text listing every config key.
pub fn keys_help() -> String {
    let width = CONFIG_KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::from("Config keys (JSON, all optional):\n");
    for (k, d) in CONFIG_KEYS {
        out.push_str(&format!("  {k:width$}  {d}\n"));
    }
    out
}

/// Parses and validates a JSON config. Errors name the offending key.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let key = if path == "." { String::new() } else { path };
        let msg = inner.to_string();
        Error::Validation { key: if key.is_empty() { "<document>".into() } else { key }, reason: msg }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Canonical form of a config document: parsed, defaults filled, re-emitted.
pub fn normalize(text: &str) -> Result<String> {
    Ok(serde_json::to_string_pretty(&parse_config(text)?)?)
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Validation { key: key.into(), reason: reason.into() }
}

fn check_amplitude(key: String, a: f64) -> Result<()> {
    if a.is_finite() && a >= 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("amplitude must be non-negative, got {a}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.network.sinks.len() != 2 && matches!(self.command, Command::Simulate | Command::Sweep) {
            return Err(invalid("network.sinks", "scenario runs need exactly two sinks"));
        }
        if self.jobs == Some(0) {
            return Err(invalid("jobs", "must be at least 1"));
        }
        let m = &self.model;
        if !(0.0..=1.0).contains(&m.omega) {
            return Err(invalid("model.omega", format!("must lie in [0, 1], got {}", m.omega)));
        }
        if !(m.rates.rate_constant.is_finite() && m.rates.rate_constant > 0.0) {
            return Err(invalid("model.rates.rate_constant", "must be positive"));
        }
        if !(m.rates.dephasing_rate.is_finite() && m.rates.dephasing_rate >= 0.0) {
            return Err(invalid("model.rates.dephasing_rate", "must be non-negative"));
        }
        if let Some(s) = m.step_mm.filter(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(invalid("model.step_mm", format!("must be positive, got {s}")));
        }
        if let Some(l) = m.length_mm.filter(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(invalid("model.length_mm", format!("must be positive, got {l}")));
        }
        if m.n_segments == 0 {
            return Err(invalid("model.n_segments", "must be at least 1"));
        }
        if m.ensemble_size == 0 {
            return Err(invalid("model.ensemble_size", "must be at least 1"));
        }

        let s = &self.sweep;
        if s.scenarios.is_empty() {
            return Err(invalid("sweep.scenarios", "must not be empty"));
        }
        if s.amplitudes.is_empty() {
            return Err(invalid("sweep.amplitudes", "must not be empty"));
        }
        for (i, &a) in s.amplitudes.iter().enumerate() {
            check_amplitude(format!("sweep.amplitudes[{i}]"), a)?;
        }
        if s.samples_per_group == 0 {
            return Err(invalid("sweep.samples_per_group", "must be at least 1"));
        }

        let sim = &self.simulate;
        check_amplitude("simulate.amplitude".into(), sim.amplitude)?;
        if let Some(site) = sim.injection_site {
            let expected = sim.scenario.injection_site(self.network.n_states)?;
            if site != expected {
                return Err(invalid(
                    "simulate.injection_site",
                    format!("scenario {} injects at site {expected}, not {site}", sim.scenario),
                ));
            }
        }

        let c = &self.criteria;
        if !(c.a_factor.is_finite() && c.a_factor >= 1.0) {
            return Err(invalid("criteria.a_factor", "must be at least 1"));
        }
        if !(0.0 <= c.b_low && c.b_low <= 0.5 && 0.5 <= c.b_high && c.b_high <= 1.0) {
            return Err(invalid("criteria.b_low", "need 0 <= b_low <= 0.5 <= b_high <= 1"));
        }

        let cal = &self.calibration;
        cal.coupler.validate().map_err(|e| match e {
            Error::Validation { key, reason } => invalid(key.replace("calibration.", "calibration.coupler."), reason),
            other => other,
        })?;
        for (i, &d) in cal.dbetas.iter().enumerate() {
            if !(d.is_finite() && d >= 0.0) {
                return Err(invalid(format!("calibration.dbetas[{i}]"), "must be non-negative"));
            }
        }
        if !(cal.z_max_mm.is_finite() && cal.z_max_mm > 0.0) {
            return Err(invalid("calibration.z_max_mm", "must be positive"));
        }
        if cal.n_points < 8 {
            return Err(invalid("calibration.n_points", "need at least 8 points"));
        }
        if !(cal.noise.is_finite() && cal.noise >= 0.0) {
            return Err(invalid("calibration.noise", "must be non-negative"));
        }
        for (i, &a) in cal.dephasing_amplitudes.iter().enumerate() {
            check_amplitude(format!("calibration.dephasing_amplitudes[{i}]"), a)?;
        }

        let h = &self.hopfield;
        if h.stored.is_empty() {
            return Err(invalid("hopfield.stored", "must not be empty"));
        }
        let m = h.stored[0].len();
        if let Some(i) = h.stored.iter().position(|p| p.len() != m) {
            return Err(invalid(format!("hopfield.stored[{i}]"), format!("length differs from {m}")));
        }
        if let Some(i) = h.initial.iter().position(|p| p.len() != m) {
            return Err(invalid(format!("hopfield.initial[{i}]"), format!("length differs from {m}")));
        }
        if h.max_sweeps == 0 {
            return Err(invalid("hopfield.max_sweeps", "must be at least 1"));
        }
        if !h.order.is_empty() {
            let mut sorted = h.order.clone();
            sorted.sort_unstable();
            if sorted != (0..m).collect::<Vec<_>>() {
                return Err(invalid("hopfield.order", format!("must be a permutation of 0..{m}")));
            }
        }
        Ok(())
    }

    /// Output directory after applying the environment fallback.
    pub fn output_dir(&self) -> String {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var(OUTPUT_DIR_ENV).ok().filter(|s| !s.is_empty()))
            .unwrap_or_else(|| DEFAULT_OUTPUT_DIR.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(r: Result<RunConfig>) -> String {
        match r {
            Err(Error::Validation { key, .. }) => key,
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = parse_config("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.network.n_states, 7);
        assert!(cfg.network.sinks.iter().all(|s| s.n_aux == 50));
        assert_eq!(cfg.model.n_segments, 40);
        assert_eq!(cfg.network.evolution_length / cfg.model.n_segments as f64, 2.0);
        assert_eq!(cfg.sweep.amplitudes, vec![0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn negative_amplitude_names_key() {
        assert_eq!(key_of(parse_config(r#"{"sweep": {"amplitudes": [0.1, -0.1]}}"#)), "sweep.amplitudes[1]");
        assert_eq!(key_of(parse_config(r#"{"simulate": {"amplitude": -0.1}}"#)), "simulate.amplitude");
    }

    #[test]
    fn unknown_keys_named() {
        assert_eq!(key_of(parse_config(r#"{"netwrk": {}}"#)), "netwrk");
        assert_eq!(key_of(parse_config(r#"{"network": {"chain": 1}}"#)), "network.chain");
    }

    #[test]
    fn type_errors_named() {
        assert_eq!(key_of(parse_config(r#"{"network": {"n_states": "seven"}}"#)), "network.n_states");
    }

    #[test]
    fn inconsistent_injection() {
        let r = parse_config(r#"{"simulate": {"scenario": "B", "injection_site": 1}}"#);
        assert_eq!(key_of(r), "simulate.injection_site");
        assert!(parse_config(r#"{"simulate": {"scenario": "B", "injection_site": 3}}"#).is_ok());
    }

    #[test]
    fn normalize_is_idempotent() {
        let x = r#"{"seed": 7, "network": {"chain_coupling": 0.04, "sinks": [{"site": 0, "n_aux": 10, "coupling": 0.2}, {"site": 6, "n_aux": 10, "coupling": 0.2}]}}"#;
        let once = normalize(x).unwrap();
        assert_eq!(normalize(&once).unwrap(), once);
        assert_eq!(serde_json::to_string_pretty(&parse_config(&once).unwrap()).unwrap(), once);
    }
}
