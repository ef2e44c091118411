//! Scenario runs, match-rate criteria, Δβ_A group sweeps and the comparison
//! against the Hopfield reference.
//!
//! Scenario A injects next to the `0…0` sink (state site 1, zero-based), so
//! the walk should clearly prefer sink 1. Scenario B injects at the centre
//! site, equidistant from both sinks, so the split should be balanced.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hopfield::{nearest_stored, retrieve, HopfieldNetwork};
use crate::network::{build_hamiltonian, threshold_patterns, BinaryPattern, Hamiltonian, NetworkSpec, SiteRole};
use crate::photonic::{
    coupler_power_transfer, effective_coupling, fit_dephasing_rate, fit_effective_coupling, piecewise_evolve,
    sample_detuning_profile_with, CouplerCalibration, CouplerFit, DetuningDistribution, EnsembleSpec, DEFAULT_SEGMENTS,
};
use crate::qsw::{abstract_walk, evolve, sink_population, DensityMatrix, EvolutionResult, QswRates, WalkParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    A,
    B,
}

impl Scenario {
    pub const ALL: [Scenario; 2] = [Scenario::A, Scenario::B];

    /// Zero-based injection site for a chain of `n_states`.
    pub fn injection_site(self, n_states: usize) -> Result<usize> {
        match self {
            Scenario::A if n_states >= 3 => Ok(1),
            Scenario::B if n_states >= 3 && n_states % 2 == 1 => Ok(n_states / 2),
            _ => Err(Error::Configuration(format!("scenario {self} needs an odd chain of at least 3 states, got {n_states}"))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::A => "A",
            Scenario::B => "B",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    /// Master-equation walk with one absorbing node per sink.
    AbstractQsw {
        omega: f64,
        rates: QswRates,
        /// Integration step, mm; `None` picks one from the generator scale.
        step: Option<f64>,
        /// Evolution length, mm; `None` uses the network's length.
        length: Option<f64>,
    },
    /// One realization of the segmented detuning model.
    Photonic {
        amplitude: f64,
        seed: u64,
        n_segments: usize,
        distribution: DetuningDistribution,
    },
}

impl Model {
    pub fn photonic(amplitude: f64, seed: u64) -> Self {
        Model::Photonic { amplitude, seed, n_segments: DEFAULT_SEGMENTS, distribution: DetuningDistribution::OneSided }
    }

    pub fn abstract_qsw(omega: f64) -> Self {
        Model::AbstractQsw { omega, rates: QswRates::default(), step: None, length: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// Zero-based; must equal `scenario.injection_site(n_states)`.
    pub injection_site: usize,
    pub model: Model,
    pub network: NetworkSpec,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario, model: Model, network: NetworkSpec) -> Result<Self> {
        let injection_site = scenario.injection_site(network.n_states)?;
        Ok(ScenarioConfig { scenario, injection_site, model, network })
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        let expected = self.scenario.injection_site(self.network.n_states)?;
        if self.injection_site != expected {
            return Err(Error::Validation {
                key: "simulate.injection_site".into(),
                reason: format!("scenario {} injects at site {expected}, not {}", self.scenario, self.injection_site),
            });
        }
        if self.network.sinks.len() != 2 {
            return Err(Error::Configuration(format!("scenarios need exactly two sinks, got {}", self.network.sinks.len())));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SampleResult {
    pub sink1_pop: f64,
    pub sink2_pop: f64,
    /// `sink1 / (sink1 + sink2)`; 0.5 when both sinks are empty.
    pub ratio: f64,
    pub transfer_efficiency: f64,
    pub sink1_series: Vec<f64>,
    pub sink2_series: Vec<f64>,
    pub trajectory: EvolutionResult,
}

fn split_ratio(s1: f64, s2: f64) -> f64 {
    let total = s1 + s2;
    if total > 0.0 {
        (s1 / total).clamp(0.0, 1.0)
    } else {
        0.5
    }
}

impl SampleResult {
    fn from_trajectory(trajectory: EvolutionResult, h: &Hamiltonian, network: &NetworkSpec) -> Result<Self> {
        // sink 1 is the array attached nearer to state site 0
        let mut order: Vec<usize> = (0..network.sinks.len()).collect();
        order.sort_by_key(|&k| network.sinks[k].site);
        let groups = h.sink_groups();
        let sink1_series = sink_population(&trajectory, &groups[order[0]])?;
        let sink2_series = sink_population(&trajectory, &groups[order[1]])?;
        let sink1_pop = *sink1_series.last().unwrap();
        let sink2_pop = *sink2_series.last().unwrap();
        Ok(SampleResult {
            sink1_pop,
            sink2_pop,
            ratio: split_ratio(sink1_pop, sink2_pop),
            transfer_efficiency: sink1_pop + sink2_pop,
            sink1_series,
            sink2_series,
            trajectory,
        })
    }

    /// Transfer efficiency at every recorded z.
    pub fn efficiency_series(&self) -> Vec<f64> {
        self.sink1_series.iter().zip(&self.sink2_series).map(|(a, b)| a + b).collect()
    }
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<SampleResult> {
    config.validate()?;
    let net = &config.network;
    match &config.model {
        Model::Photonic { amplitude, seed, n_segments, distribution } => {
            let h = build_hamiltonian(net)?;
            let seg = net.evolution_length / *n_segments as f64;
            let profile = sample_detuning_profile_with(net.n_states, *n_segments, seg, *amplitude, *seed, *distribution)?;
            let mut psi = vec![Complex64::new(0.0, 0.0); h.dim()];
            psi[config.injection_site] = Complex64::new(1.0, 0.0);
            let traj = piecewise_evolve(&psi, &h, &profile)?;
            SampleResult::from_trajectory(traj, &h, net)
        }
        Model::AbstractQsw { omega, rates, step, length } => {
            let (h, l) = abstract_walk(net, rates)?;
            let mut params = WalkParams::auto(&h, &l, *omega)?;
            if let Some(step) = step {
                params = WalkParams::new(*omega, *step, (1.0 / step).round().max(1.0) as usize)?;
            }
            let rho0 = DensityMatrix::basis(h.dim(), config.injection_site)?;
            let traj = evolve(&rho0, &h, &l, &params, length.unwrap_or(net.evolution_length))?;
            SampleResult::from_trajectory(traj, &h, net)
        }
    }
}

/// Boundaries of the two correctness tests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Criteria {
    /// Scenario A passes when `sink1 > a_factor · sink2`.
    pub a_factor: f64,
    /// Whether equality at the A boundary fails (`true`) or passes.
    pub a_strict: bool,
    pub b_low: f64,
    pub b_high: f64,
    /// Whether the B bounds themselves count as balanced.
    pub b_inclusive: bool,
}

impl Default for Criteria {
    fn default() -> Self {
        Criteria { a_factor: 2.0, a_strict: true, b_low: 0.4, b_high: 0.6, b_inclusive: true }
    }
}

impl Criteria {
    fn clear_preference(&self, favored: f64, other: f64) -> bool {
        if self.a_strict {
            favored > self.a_factor * other
        } else {
            favored >= self.a_factor * other
        }
    }

    fn balanced(&self, ratio: f64) -> bool {
        if self.b_inclusive {
            (self.b_low..=self.b_high).contains(&ratio)
        } else {
            ratio > self.b_low && ratio < self.b_high
        }
    }
}

pub fn scenario_correct(scenario: Scenario, sample: &SampleResult, criteria: &Criteria) -> bool {
    scenario_correct_pops(scenario, sample.sink1_pop, sample.sink2_pop, criteria)
}

pub(crate) fn scenario_correct_pops(scenario: Scenario, s1: f64, s2: f64, criteria: &Criteria) -> bool {
    match scenario {
        Scenario::A => criteria.clear_preference(s1, s2),
        Scenario::B => criteria.balanced(split_ratio(s1, s2)),
    }
}

/// Percentage of samples meeting the scenario's criterion.
pub fn match_rate(samples: &[SampleResult], scenario: Scenario, criteria: &Criteria) -> Result<f64> {
    let flags: Vec<bool> = samples.iter().map(|s| scenario_correct(scenario, s, criteria)).collect();
    match_rate_of(&flags)
}

pub fn match_rate_of(correct: &[bool]) -> Result<f64> {
    if correct.is_empty() {
        return Err(Error::Configuration("match rate of an empty sample list".into()));
    }
    Ok(100.0 * correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64)
}

pub fn transfer_efficiency(sample: &SampleResult) -> f64 {
    sample.sink1_pop + sample.sink2_pop
}

/// Per-sample seed: SplitMix64 of the master seed mixed with
/// `(group << 32) | sample`. Both scenarios use the same seed for a given
/// group and sample, mirroring one chip probed at two inputs.
pub fn derive_seed(master: u64, group: usize, sample: usize) -> u64 {
    splitmix64(master ^ splitmix64(((group as u64) << 32) | sample as u64))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub network: NetworkSpec,
    pub scenarios: Vec<Scenario>,
    pub amplitudes: Vec<f64>,
    pub samples_per_group: usize,
    pub master_seed: u64,
    pub n_segments: usize,
    pub distribution: DetuningDistribution,
    pub criteria: Criteria,
    /// Also run the undetuned walk once per scenario.
    pub include_baseline: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            network: NetworkSpec::default(),
            scenarios: Scenario::ALL.to_vec(),
            amplitudes: vec![0.1, 0.2, 0.3, 0.4],
            samples_per_group: 5,
            master_seed: 0,
            n_segments: DEFAULT_SEGMENTS,
            distribution: DetuningDistribution::OneSided,
            criteria: Criteria::default(),
            include_baseline: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub seed: u64,
    pub sink1: f64,
    pub sink2: f64,
    pub ratio: f64,
    pub efficiency: f64,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub amplitude: f64,
    pub mean_efficiency: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std_efficiency: f64,
    pub mean_ratio: f64,
    pub match_rate: f64,
    pub samples: Vec<SampleRecord>,
}

impl GroupStats {
    pub fn from_samples(amplitude: f64, samples: Vec<SampleRecord>) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().map(|s| s.efficiency).sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|s| (s.efficiency - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let flags: Vec<bool> = samples.iter().map(|s| s.correct).collect();
        GroupStats {
            amplitude,
            mean_efficiency: mean,
            std_efficiency: var.sqrt(),
            mean_ratio: samples.iter().map(|s| s.ratio).sum::<f64>() / n,
            match_rate: match_rate_of(&flags).unwrap_or(0.0),
            samples,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSweep {
    pub scenario: Scenario,
    pub injection_site: usize,
    /// Match rate over every sample of every group.
    pub match_rate: f64,
    pub baseline: Option<SampleRecord>,
    pub groups: Vec<GroupStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSweep {
    pub config: SweepConfig,
    pub scenarios: Vec<ScenarioSweep>,
    /// Mean efficiency over all scenarios per amplitude, baseline first when
    /// present.
    pub average_total: Vec<TotalPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TotalPoint {
    pub amplitude: f64,
    pub mean_efficiency: f64,
}

impl GroupSweep {
    pub fn scenario(&self, s: Scenario) -> Option<&ScenarioSweep> {
        self.scenarios.iter().find(|x| x.scenario == s)
    }
}

fn record(scenario: Scenario, index: usize, seed: u64, r: &SampleResult, criteria: &Criteria) -> SampleRecord {
    SampleRecord {
        index,
        seed,
        sink1: r.sink1_pop,
        sink2: r.sink2_pop,
        ratio: r.ratio,
        efficiency: r.transfer_efficiency,
        correct: scenario_correct(scenario, r, criteria),
    }
}

/// Runs every (scenario, amplitude, sample) cell of the grid. Cells are
/// independent and evaluated in parallel; results are assembled in grid order.
pub fn sweep_groups(config: &SweepConfig) -> Result<GroupSweep> {
    config.network.validate()?;
    if config.samples_per_group == 0 || config.amplitudes.is_empty() || config.scenarios.is_empty() {
        return Err(Error::Configuration("sweep needs scenarios, amplitudes and samples".into()));
    }
    if let Some(a) = config.amplitudes.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::Domain(format!("amplitude {a} is negative")));
    }

    struct Cell {
        scenario: Scenario,
        group: Option<usize>,
        sample: usize,
        seed: u64,
        amplitude: f64,
    }
    let mut cells = Vec::new();
    for &scenario in &config.scenarios {
        if config.include_baseline {
            cells.push(Cell { scenario, group: None, sample: 0, seed: 0, amplitude: 0.0 });
        }
        for (g, &amplitude) in config.amplitudes.iter().enumerate() {
            for sample in 0..config.samples_per_group {
                let seed = derive_seed(config.master_seed, g, sample);
                cells.push(Cell { scenario, group: Some(g), sample, seed, amplitude });
            }
        }
    }

    let results: Vec<Result<SampleRecord>> = cells
        .par_iter()
        .map(|c| {
            let model = Model::Photonic {
                amplitude: c.amplitude,
                seed: c.seed,
                n_segments: config.n_segments,
                distribution: config.distribution,
            };
            let sc = ScenarioConfig::new(c.scenario, model, config.network.clone())?;
            let r = run_scenario(&sc)?;
            Ok(record(c.scenario, c.sample, c.seed, &r, &config.criteria))
        })
        .collect();

    let mut scenarios = Vec::new();
    let mut it = cells.iter().zip(results);
    for &scenario in &config.scenarios {
        let mut baseline = None;
        let mut groups: Vec<Vec<SampleRecord>> = vec![Vec::new(); config.amplitudes.len()];
        for _ in 0..(config.include_baseline as usize + config.amplitudes.len() * config.samples_per_group) {
            let (cell, rec) = it.next().expect("one result per cell");
            let rec = rec?;
            match cell.group {
                None => baseline = Some(rec),
                Some(g) => groups[g].push(rec),
            }
        }
        let groups: Vec<GroupStats> =
            groups.into_iter().zip(&config.amplitudes).map(|(s, &a)| GroupStats::from_samples(a, s)).collect();
        let flags: Vec<bool> = groups.iter().flat_map(|g| g.samples.iter().map(|s| s.correct)).collect();
        scenarios.push(ScenarioSweep {
            scenario,
            injection_site: scenario.injection_site(config.network.n_states)?,
            match_rate: match_rate_of(&flags)?,
            baseline,
            groups,
        });
    }

    let n_sc = scenarios.len() as f64;
    let mut average_total = Vec::new();
    if config.include_baseline {
        let mean = scenarios.iter().map(|s| s.baseline.as_ref().unwrap().efficiency).sum::<f64>() / n_sc;
        average_total.push(TotalPoint { amplitude: 0.0, mean_efficiency: mean });
    }
    for (g, &a) in config.amplitudes.iter().enumerate() {
        let mean = scenarios.iter().map(|s| s.groups[g].mean_efficiency).sum::<f64>() / n_sc;
        average_total.push(TotalPoint { amplitude: a, mean_efficiency: mean });
    }
    Ok(GroupSweep { config: config.clone(), scenarios, average_total })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkOutcome {
    Sink1,
    Sink2,
    Balanced,
    /// Neither a clear preference nor a balanced split.
    Unclear,
}

/// Outcome of a sample judged with the scenario criteria, independently of
/// which scenario produced it.
pub fn walk_outcome(sink1: f64, sink2: f64, criteria: &Criteria) -> WalkOutcome {
    if criteria.balanced(split_ratio(sink1, sink2)) {
        WalkOutcome::Balanced
    } else if criteria.clear_preference(sink1, sink2) {
        WalkOutcome::Sink1
    } else if criteria.clear_preference(sink2, sink1) {
        WalkOutcome::Sink2
    } else {
        WalkOutcome::Unclear
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub scenario: Scenario,
    pub initial: BinaryPattern,
    pub walk: WalkOutcome,
    pub nearest: BTreeSet<BinaryPattern>,
    pub distance: usize,
    pub retrieved: BinaryPattern,
    pub agree: bool,
}

/// Checks that the walk's preferred sink is the Hopfield network's answer
/// for the scenario's input pattern.
///
/// The input pattern is the threshold pattern labelling the injection site;
/// sink 1 stands for the all-zeros pattern and sink 2 for all-ones.
pub fn compare_with_hopfield(
    scenario: Scenario,
    sink1: f64,
    sink2: f64,
    net: &HopfieldNetwork,
    criteria: &Criteria,
) -> Result<AgreementReport> {
    let m = net.neurons();
    let labels = threshold_patterns(m)?;
    let (zero, ones) = (labels[0].clone(), labels[m].clone());
    let stored = net.stored_patterns();
    if !(stored.contains(&zero) && stored.contains(&ones)) {
        return Err(Error::Configuration("the Hopfield network must store both sink patterns".into()));
    }
    let initial = labels[scenario.injection_site(m + 1)?].clone();
    let (nearest, distance) = nearest_stored(stored, &initial)?;
    let retrieved = retrieve(net, &initial, 100)?.attractor;
    let walk = walk_outcome(sink1, sink2, criteria);
    let unique = |p: &BinaryPattern| nearest.len() == 1 && nearest.contains(p) && &retrieved == p;
    let agree = match walk {
        WalkOutcome::Sink1 => unique(&zero),
        WalkOutcome::Sink2 => unique(&ones),
        WalkOutcome::Balanced => nearest.len() == 2 && nearest.contains(&zero) && nearest.contains(&ones),
        WalkOutcome::Unclear => false,
    };
    Ok(AgreementReport { scenario, initial, walk, nearest, distance, retrieved, agree })
}

/// Maps a fitted dephasing rate γ onto the mixing parameter of a walk whose
/// only jumps are pure dephasing at `dephasing_rate`: equal ratios of
/// coherence decay to coherent coupling give `ω = γ / (γ + dephasing_rate)`.
pub fn omega_from_dephasing_rate(gamma: f64, dephasing_rate: f64) -> Result<f64> {
    if !(gamma >= 0.0 && dephasing_rate > 0.0) {
        return Err(Error::Domain(format!("need gamma >= 0 and rate > 0, got {gamma}, {dephasing_rate}")));
    }
    Ok(gamma / (gamma + dephasing_rate))
}

/// Shortest abstract-walk length (on the recorded grid, up to `max_length`)
/// at which the transfer efficiency reaches `target`.
pub fn abstract_length_matching(
    network: &NetworkSpec,
    scenario: Scenario,
    omega: f64,
    rates: &QswRates,
    target: f64,
    max_length: f64,
) -> Result<f64> {
    let model = Model::AbstractQsw { omega, rates: *rates, step: None, length: Some(max_length) };
    let sample = run_scenario(&ScenarioConfig::new(scenario, model, network.clone())?)?;
    let eff = sample.efficiency_series();
    sample
        .trajectory
        .z_grid
        .iter()
        .zip(eff)
        .find(|(_, e)| *e >= target)
        .map(|(z, _)| *z)
        .ok_or_else(|| Error::Domain(format!("efficiency {target} not reached within {max_length} mm")))
}

/// Synthetic directional-coupler scans fitted back to detunings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTripSpec {
    pub coupler: CouplerCalibration,
    pub dbetas: Vec<f64>,
    pub z_max: f64,
    pub n_points: usize,
    /// Relative standard deviation of multiplicative Gaussian noise.
    pub noise: f64,
    pub draws: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTripRow {
    pub dbeta: f64,
    /// Speed offset giving `dbeta` under the linear calibration, mm/s.
    pub speed_offset: f64,
    pub c_eff: f64,
    pub fit: CouplerFit,
    pub recovered_dbeta: f64,
    pub abs_error: f64,
    /// Mean recovered detuning over the noisy draws (`NaN` without draws).
    pub noisy_mean_dbeta: f64,
    pub noisy_max_rel_error: f64,
}

/// Coupler power scan `(z, P₂(z))` on `n_points` equally spaced lengths.
pub fn coupler_scan(c: f64, dbeta: f64, z_max: f64, n_points: usize) -> Result<Vec<(f64, f64)>> {
    (0..n_points)
        .map(|k| {
            let z = z_max * k as f64 / (n_points - 1) as f64;
            coupler_power_transfer(c, dbeta, z).map(|p| (z, p))
        })
        .collect()
}

pub fn calibration_round_trip(spec: &RoundTripSpec) -> Result<Vec<RoundTripRow>> {
    spec.coupler.validate()?;
    let c = spec.coupler.coupling;
    let normal = Normal::new(0.0, spec.noise).map_err(|e| Error::Domain(e.to_string()))?;
    spec.dbetas
        .iter()
        .enumerate()
        .map(|(k, &dbeta)| {
            let scan = coupler_scan(c, dbeta, spec.z_max, spec.n_points)?;
            let fit = fit_effective_coupling(&scan)?;
            let recovered = fit.dbeta();
            let noisy = (0..spec.draws)
                .into_par_iter()
                .map(|d| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, k, d));
                    let data: Vec<(f64, f64)> = scan.iter().map(|&(z, p)| (z, p * (1.0 + normal.sample(&mut rng)))).collect();
                    fit_effective_coupling(&data).map(|f| f.dbeta())
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean = noisy.iter().sum::<f64>() / noisy.len() as f64;
            let max_rel = noisy.iter().map(|d| (d - dbeta).abs() / dbeta).fold(0.0, f64::max);
            Ok(RoundTripRow {
                dbeta,
                speed_offset: dbeta / spec.coupler.slope,
                c_eff: effective_coupling(c, dbeta)?,
                fit,
                recovered_dbeta: recovered,
                abs_error: (recovered - dbeta).abs(),
                noisy_mean_dbeta: mean,
                noisy_max_rel_error: max_rel,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingRow {
    pub amplitude: f64,
    pub rate: f64,
    /// Mixing parameter of the equivalent abstract walk.
    pub omega: f64,
}

/// Dephasing rate of a two-site coupler with the chain coupling under each
/// detuning amplitude, with the equivalent `ω` for pure-dephasing jumps at
/// `dephasing_rate`.
pub fn dephasing_rates(
    coupling: f64,
    amplitudes: &[f64],
    base: &EnsembleSpec,
    realizations: usize,
    seed: u64,
    dephasing_rate: f64,
) -> Result<Vec<DephasingRow>> {
    let h = Hamiltonian::from_edges(&[0.0, 0.0], &[(0, 1, coupling)], vec![SiteRole::State; 2], vec![])?;
    amplitudes
        .iter()
        .enumerate()
        .map(|(g, &amplitude)| {
            let spec = EnsembleSpec { amplitude, n_sites: 2, ..*base };
            let seeds: Vec<u64> = (0..realizations).map(|i| derive_seed(seed, g, i)).collect();
            let rate = fit_dephasing_rate(&h, &spec, &seeds)?.rate;
            Ok(DephasingRow { amplitude, rate, omega: omega_from_dephasing_rate(rate.max(0.0), dephasing_rate)? })
        })
        .collect()
}
