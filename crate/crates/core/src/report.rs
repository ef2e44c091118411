//! Command execution and artifact emission.
//!
//! JSON objects are emitted with sorted keys and floats rounded to nine
//! significant digits; CSV floats use [`sig9`]. The same report always
//! serializes to the same bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::{Command, ModelKind, OutputFormat, RunConfig};
use crate::error::{Error, Result};
use crate::format::{round9, sig9};
use crate::harness::{
    calibration_round_trip, compare_with_hopfield, dephasing_rates, derive_seed, run_scenario, scenario_correct,
    sweep_groups, AgreementReport, DephasingRow, GroupSweep, Model, RoundTripRow, RoundTripSpec, Scenario,
    ScenarioConfig, SweepConfig, WalkOutcome,
};
use crate::hopfield::{energy, hebbian_store, nearest_stored, retrieve_with_order, HopfieldNetwork};
use crate::network::{threshold_patterns, BinaryPattern};
use crate::photonic::{sample_detuning_profile_with, DetuningProfile, EnsembleSpec};

pub const SWEEP_CSV_HEADER: &str = "scenario,amplitude,seed,sink1,sink2,ratio,efficiency,correct";
pub const FIG3_CSV_HEADER: &str = "scenario,amplitude,sample,ratio,correct";
pub const FIG4_CSV_HEADER: &str = "series,amplitude,mean_efficiency,std_efficiency,n";

/// One output file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Serializes `value` as pretty JSON with every float rounded to nine
/// significant digits.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64().map(round9).and_then(serde_json::Number::from_f64) {
                *n = x;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_floats),
        Value::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgreementRow {
    pub scenario: Scenario,
    pub amplitude: f64,
    pub index: usize,
    pub correct: bool,
    pub walk: WalkOutcome,
    pub agree: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub sweep: GroupSweep,
    pub agreement: Vec<AgreementRow>,
    /// Whether every correct sample agrees with the Hopfield reference.
    pub correct_samples_agree: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulateReport {
    pub scenario: Scenario,
    pub injection_site: usize,
    pub model: Model,
    pub sink1: f64,
    pub sink2: f64,
    pub ratio: f64,
    pub efficiency: f64,
    pub correct: bool,
    pub agreement: AgreementReport,
    #[serde(skip)]
    pub trajectory_csv: String,
    #[serde(skip)]
    pub profile: Option<DetuningProfile>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrateReport {
    pub round_trip: Vec<RoundTripRow>,
    pub dephasing: Vec<DephasingRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RetrievalRow {
    pub initial: BinaryPattern,
    pub nearest: Vec<BinaryPattern>,
    pub distance: usize,
    pub retrieved: Option<BinaryPattern>,
    pub sweeps: Option<usize>,
    pub energy_initial: f64,
    pub energy_final: Option<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HopfieldReport {
    pub stored: Vec<BinaryPattern>,
    pub order: Vec<usize>,
    pub retrievals: Vec<RetrievalRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Report {
    Simulate(Box<SimulateReport>),
    Sweep(Box<SweepReport>),
    Calibrate(CalibrateReport),
    Hopfield(HopfieldReport),
}

/// Hopfield network storing the two patterns that label the sinks.
pub fn sink_net(n_states: usize) -> Result<HopfieldNetwork> {
    let p = threshold_patterns(n_states - 1)?;
    hebbian_store(&[p[0].clone(), p[n_states - 1].clone()])
}

pub fn sweep_config(cfg: &RunConfig) -> SweepConfig {
    SweepConfig {
        network: cfg.network.clone(),
        scenarios: cfg.sweep.scenarios.clone(),
        amplitudes: cfg.sweep.amplitudes.clone(),
        samples_per_group: cfg.sweep.samples_per_group,
        master_seed: cfg.seed,
        n_segments: cfg.model.n_segments,
        distribution: cfg.model.distribution,
        criteria: cfg.criteria,
        include_baseline: cfg.sweep.include_baseline,
    }
}

pub fn run_sweep(cfg: &RunConfig) -> Result<SweepReport> {
    let sweep = sweep_groups(&sweep_config(cfg))?;
    let net = sink_net(cfg.network.n_states)?;
    let mut agreement = Vec::new();
    for sc in &sweep.scenarios {
        for g in &sc.groups {
            for s in &g.samples {
                let a = compare_with_hopfield(sc.scenario, s.sink1, s.sink2, &net, &cfg.criteria)?;
                agreement.push(AgreementRow {
                    scenario: sc.scenario,
                    amplitude: g.amplitude,
                    index: s.index,
                    correct: s.correct,
                    walk: a.walk,
                    agree: a.agree,
                });
            }
        }
    }
    let correct_samples_agree = agreement.iter().all(|r| !r.correct || r.agree);
    Ok(SweepReport { sweep, agreement, correct_samples_agree })
}

pub fn run_simulate(cfg: &RunConfig) -> Result<SimulateReport> {
    let sim = &cfg.simulate;
    let model = match cfg.model.kind {
        ModelKind::Photonic => Model::Photonic {
            amplitude: sim.amplitude,
            seed: sim.sample_seed.unwrap_or_else(|| derive_seed(cfg.seed, 0, 0)),
            n_segments: cfg.model.n_segments,
            distribution: cfg.model.distribution,
        },
        ModelKind::AbstractQsw => Model::AbstractQsw {
            omega: cfg.model.omega,
            rates: cfg.model.rates,
            step: cfg.model.step_mm,
            length: cfg.model.length_mm,
        },
    };
    let sc = ScenarioConfig::new(sim.scenario, model.clone(), cfg.network.clone())?;
    let r = run_scenario(&sc)?;
    let agreement = compare_with_hopfield(sim.scenario, r.sink1_pop, r.sink2_pop, &sink_net(cfg.network.n_states)?, &cfg.criteria)?;

    let n = cfg.network.n_states;
    let mut csv = String::from("z_mm,sink1,sink2,efficiency");
    for i in 0..n {
        csv.push_str(&format!(",site_{i}"));
    }
    csv.push('\n');
    for (k, z) in r.trajectory.z_grid.iter().enumerate() {
        let (s1, s2) = (r.sink1_series[k], r.sink2_series[k]);
        let mut row = vec![sig9(*z), sig9(s1), sig9(s2), sig9(s1 + s2)];
        row.extend(r.trajectory.populations[k][..n].iter().map(|p| sig9(*p)));
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    let profile = match &model {
        Model::Photonic { amplitude, seed, n_segments, distribution } => Some(sample_detuning_profile_with(
            n,
            *n_segments,
            cfg.network.evolution_length / *n_segments as f64,
            *amplitude,
            *seed,
            *distribution,
        )?),
        Model::AbstractQsw { .. } => None,
    };
    Ok(SimulateReport {
        scenario: sim.scenario,
        injection_site: sc.injection_site,
        model,
        sink1: r.sink1_pop,
        sink2: r.sink2_pop,
        ratio: r.ratio,
        efficiency: r.transfer_efficiency,
        correct: scenario_correct(sim.scenario, &r, &cfg.criteria),
        agreement,
        trajectory_csv: csv,
        profile,
    })
}

pub fn run_calibrate(cfg: &RunConfig) -> Result<CalibrateReport> {
    let cal = &cfg.calibration;
    let round_trip = calibration_round_trip(&RoundTripSpec {
        coupler: cal.coupler,
        dbetas: cal.dbetas.clone(),
        z_max: cal.z_max_mm,
        n_points: cal.n_points,
        noise: cal.noise,
        draws: cal.draws,
        seed: cfg.seed,
    })?;
    let base = EnsembleSpec {
        amplitude: 0.0,
        n_sites: 2,
        n_segments: cfg.model.n_segments,
        segment_length: cfg.network.evolution_length / cfg.model.n_segments as f64,
        distribution: cfg.model.distribution,
    };
    let rate = if cfg.model.rates.dephasing_rate > 0.0 { cfg.model.rates.dephasing_rate } else { cfg.model.rates.rate_constant };
    let dephasing = dephasing_rates(
        cfg.network.chain_coupling,
        &cal.dephasing_amplitudes,
        &base,
        cfg.model.ensemble_size,
        cfg.seed,
        rate,
    )?;
    Ok(CalibrateReport { round_trip, dephasing })
}

pub fn run_hopfield(cfg: &RunConfig) -> Result<HopfieldReport> {
    let h = &cfg.hopfield;
    let net = hebbian_store(&h.stored)?;
    let m = net.neurons();
    let order: Vec<usize> = if h.order.is_empty() { (0..m).collect() } else { h.order.clone() };
    let initial = if h.initial.is_empty() { threshold_patterns(m)? } else { h.initial.clone() };
    let retrievals = initial
        .into_iter()
        .map(|init| {
            let (nearest, distance) = nearest_stored(&h.stored, &init)?;
            let energy_initial = energy(&net, &init)?;
            let row = match retrieve_with_order(&net, &init, &order, h.max_sweeps) {
                Ok(r) => RetrievalRow {
                    energy_final: Some(energy(&net, &r.attractor)?),
                    retrieved: Some(r.attractor),
                    sweeps: Some(r.sweeps),
                    converged: true,
                    initial: init,
                    nearest: nearest.into_iter().collect(),
                    distance,
                    energy_initial,
                },
                Err(Error::NonConvergence { .. }) => RetrievalRow {
                    initial: init,
                    nearest: nearest.into_iter().collect(),
                    distance,
                    retrieved: None,
                    sweeps: None,
                    energy_initial,
                    energy_final: None,
                    converged: false,
                },
                Err(e) => return Err(e),
            };
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HopfieldReport { stored: h.stored.clone(), order, retrievals })
}

/// Runs the configured command.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    Ok(match cfg.command {
        Command::Simulate => Report::Simulate(Box::new(run_simulate(cfg)?)),
        Command::Sweep => Report::Sweep(Box::new(run_sweep(cfg)?)),
        Command::Calibrate => Report::Calibrate(run_calibrate(cfg)?),
        Command::Hopfield => Report::Hopfield(run_hopfield(cfg)?),
    })
}

pub fn sweep_csv(s: &GroupSweep) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for sc in &s.scenarios {
        let base = sc.baseline.iter().map(|b| (0.0, b));
        let groups = sc.groups.iter().flat_map(|g| g.samples.iter().map(move |r| (g.amplitude, r)));
        for (a, r) in base.chain(groups) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                sc.scenario,
                sig9(a),
                r.seed,
                sig9(r.sink1),
                sig9(r.sink2),
                sig9(r.ratio),
                sig9(r.efficiency),
                r.correct
            ));
        }
    }
    out
}

/// Ratio scatter: one row per sample.
pub fn fig3_csv(s: &GroupSweep) -> String {
    let mut out = format!("{FIG3_CSV_HEADER}\n");
    for sc in &s.scenarios {
        for g in &sc.groups {
            for r in &g.samples {
                out.push_str(&format!("{},{},{},{},{}\n", sc.scenario, sig9(g.amplitude), r.index, sig9(r.ratio), r.correct));
            }
        }
    }
    out
}

/// Efficiency means and standard deviations per scenario, plus the
/// across-scenario average as series `total`.
pub fn fig4_csv(s: &GroupSweep) -> String {
    let mut out = format!("{FIG4_CSV_HEADER}\n");
    for sc in &s.scenarios {
        if let Some(b) = &sc.baseline {
            out.push_str(&format!("{},{},{},{},1\n", sc.scenario, sig9(0.0), sig9(b.efficiency), sig9(0.0)));
        }
        for g in &sc.groups {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                sc.scenario,
                sig9(g.amplitude),
                sig9(g.mean_efficiency),
                sig9(g.std_efficiency),
                g.samples.len()
            ));
        }
    }
    for t in &s.average_total {
        out.push_str(&format!("total,{},{},,{}\n", sig9(t.amplitude), sig9(t.mean_efficiency), s.scenarios.len()));
    }
    out
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

fn csv_table(rows: &[Vec<String>], header: &str) -> String {
    let mut out = format!("{header}\n");
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

impl Report {
    pub fn artifacts(&self, format: OutputFormat) -> Result<Vec<Artifact>> {
        let art = |name: &str, contents: String| Artifact { name: name.to_string(), contents };
        let mut out = Vec::new();
        match self {
            Report::Sweep(r) => {
                match format {
                    OutputFormat::Json => out.push(art("sweep.json", to_json(r.as_ref())?)),
                    OutputFormat::Csv => out.push(art("sweep.csv", sweep_csv(&r.sweep))),
                }
                out.push(art("fig3_ratios.csv", fig3_csv(&r.sweep)));
                out.push(art("fig4_efficiency.csv", fig4_csv(&r.sweep)));
            }
            Report::Simulate(r) => {
                match format {
                    OutputFormat::Json => out.push(art("simulate.json", to_json(r.as_ref())?)),
                    OutputFormat::Csv => out.push(art(
                        "simulate.csv",
                        format!(
                            "{SWEEP_CSV_HEADER}\n{},{},{},{},{},{},{},{}\n",
                            r.scenario,
                            sig9(r.profile.as_ref().map_or(0.0, |p| p.amplitude)),
                            r.profile.as_ref().map_or(0, |p| p.seed),
                            sig9(r.sink1),
                            sig9(r.sink2),
                            sig9(r.ratio),
                            sig9(r.efficiency),
                            yes_no(r.correct)
                        ),
                    )),
                }
                out.push(art("trajectory.csv", r.trajectory_csv.clone()));
                if let Some(p) = &r.profile {
                    out.push(art("profile.csv", p.to_csv()));
                }
            }
            Report::Calibrate(r) => match format {
                OutputFormat::Json => out.push(art("calibration.json", to_json(r)?)),
                OutputFormat::Csv => {
                    let rows: Vec<Vec<String>> = r
                        .round_trip
                        .iter()
                        .map(|t| {
                            vec![
                                sig9(t.dbeta),
                                sig9(t.speed_offset),
                                sig9(t.c_eff),
                                sig9(t.fit.c_eff),
                                sig9(t.fit.c),
                                sig9(t.recovered_dbeta),
                                sig9(t.abs_error),
                                sig9(t.noisy_mean_dbeta),
                                sig9(t.noisy_max_rel_error),
                            ]
                        })
                        .collect();
                    out.push(art(
                        "calibration.csv",
                        csv_table(
                            &rows,
                            "dbeta,speed_offset,c_eff,fit_c_eff,fit_c,recovered_dbeta,abs_error,noisy_mean_dbeta,noisy_max_rel_error",
                        ),
                    ));
                    let rows: Vec<Vec<String>> =
                        r.dephasing.iter().map(|d| vec![sig9(d.amplitude), sig9(d.rate), sig9(d.omega)]).collect();
                    out.push(art("dephasing.csv", csv_table(&rows, "amplitude,rate,omega")));
                }
            },
            Report::Hopfield(r) => match format {
                OutputFormat::Json => out.push(art("hopfield.json", to_json(r)?)),
                OutputFormat::Csv => {
                    let opt = |o: Option<String>| o.unwrap_or_default();
                    let rows: Vec<Vec<String>> = r
                        .retrievals
                        .iter()
                        .map(|t| {
                            vec![
                                t.initial.to_string(),
                                t.nearest.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" "),
                                t.distance.to_string(),
                                opt(t.retrieved.as_ref().map(|p| p.to_string())),
                                opt(t.sweeps.map(|s| s.to_string())),
                                sig9(t.energy_initial),
                                opt(t.energy_final.map(sig9)),
                                yes_no(t.converged).to_string(),
                            ]
                        })
                        .collect();
                    out.push(art(
                        "hopfield.csv",
                        csv_table(&rows, "initial,nearest,distance,retrieved,sweeps,energy_initial,energy_final,converged"),
                    ));
                }
            },
        }
        Ok(out)
    }
}

/// Writes every artifact into `dir`, creating it if needed.
pub fn emit_results(report: &Report, format: OutputFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    let artifacts = report.artifacts(format)?;
    fs::create_dir_all(dir)?;
    artifacts
        .into_iter()
        .map(|a| {
            let path = dir.join(&a.name);
            fs::write(&path, a.contents)?;
            Ok(path)
        })
        .collect()
}
