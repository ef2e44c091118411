//! Waveguide-array realization of the noisy walk.
//!
//! Decoherence is produced by random detunings of the propagation constant:
//! every state waveguide is split into segments, each with its own detuning
//! drawn uniformly from `[0, Δβ_A]`. A single realization evolves unitarily;
//! averaging over realizations yields the decohered mixture.
//!
//! The same module holds the detuned directional-coupler relations used to
//! calibrate detuning against writing speed.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig9;
use crate::network::Hamiltonian;
use crate::qsw::{DensityMatrix, EvolutionResult};

pub const DEFAULT_SEGMENTS: usize = 40;
pub const DEFAULT_SEGMENT_LENGTH: f64 = 2.0;
pub const DEFAULT_ENSEMBLE_SIZE: usize = 200;
pub const NORM_TOL: f64 = 1e-9;

/// How segment detunings are drawn for a given amplitude `Δβ_A`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetuningDistribution {
    /// Uniform on `[0, Δβ_A]`.
    #[default]
    OneSided,
    /// Uniform on `[−Δβ_A/2, Δβ_A/2]`.
    Symmetric,
}

/// Piecewise-constant detunings, `values[segment][site]` in mm⁻¹.
///
/// Columns cover the first `values[0].len()` sites of the lattice (the state
/// sites); all remaining sites are undetuned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetuningProfile {
    pub n_segments: usize,
    pub segment_length: f64,
    pub amplitude: f64,
    pub seed: u64,
    pub values: Vec<Vec<f64>>,
}

impl DetuningProfile {
    pub fn zeros(n_sites: usize, n_segments: usize, segment_length: f64) -> Self {
        DetuningProfile {
            n_segments,
            segment_length,
            amplitude: 0.0,
            seed: 0,
            values: vec![vec![0.0; n_sites]; n_segments],
        }
    }

    pub fn n_sites(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn length(&self) -> f64 {
        self.n_segments as f64 * self.segment_length
    }

    /// Site order reversed in every segment.
    pub fn mirrored(&self) -> Self {
        let values = self.values.iter().map(|row| row.iter().rev().copied().collect()).collect();
        DetuningProfile { values, ..self.clone() }
    }

    /// Profile widened to `dim` columns with `offset[k]` added to every site
    /// of segment `k`.
    pub fn with_segment_offsets(&self, dim: usize, offset: &[f64]) -> Self {
        let values = self
            .values
            .iter()
            .zip(offset)
            .map(|(row, &o)| (0..dim).map(|i| row.get(i).copied().unwrap_or(0.0) + o).collect())
            .collect();
        DetuningProfile { values, ..self.clone() }
    }

    /// Rows are segments, columns are sites.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("segment");
        for i in 0..self.n_sites() {
            out.push_str(&format!(",site_{i}"));
        }
        out.push('\n');
        for (k, row) in self.values.iter().enumerate() {
            out.push_str(&k.to_string());
            for v in row {
                out.push(',');
                out.push_str(&sig9(*v));
            }
            out.push('\n');
        }
        out
    }
}

pub fn sample_detuning_profile(
    n_sites: usize,
    n_segments: usize,
    segment_length: f64,
    amplitude: f64,
    seed: u64,
) -> Result<DetuningProfile> {
    sample_detuning_profile_with(n_sites, n_segments, segment_length, amplitude, seed, DetuningDistribution::OneSided)
}

/// Independent uniform draws per (segment, site), reproducible from `seed`.
pub fn sample_detuning_profile_with(
    n_sites: usize,
    n_segments: usize,
    segment_length: f64,
    amplitude: f64,
    seed: u64,
    distribution: DetuningDistribution,
) -> Result<DetuningProfile> {
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(Error::Domain(format!("detuning amplitude must be non-negative, got {amplitude}")));
    }
    if !(segment_length.is_finite() && segment_length > 0.0) || n_segments == 0 {
        return Err(Error::Domain("segments must have positive count and length".into()));
    }
    let mut profile = DetuningProfile::zeros(n_sites, n_segments, segment_length);
    profile.amplitude = amplitude;
    profile.seed = seed;
    if amplitude == 0.0 {
        return Ok(profile);
    }
    let (lo, hi) = match distribution {
        DetuningDistribution::OneSided => (0.0, amplitude),
        DetuningDistribution::Symmetric => (-0.5 * amplitude, 0.5 * amplitude),
    };
    let dist = Uniform::new_inclusive(lo, hi).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for row in &mut profile.values {
        for v in row.iter_mut() {
            *v = dist.sample(&mut rng);
        }
    }
    Ok(profile)
}

/// `exp(−i (H + diag(detuning)) length) · psi`, evaluated by a Taylor series
/// on substeps short enough that each series converges to rounding error.
pub fn propagate(h: &Hamiltonian, detuning: &[f64], psi: &[Complex64], length: f64) -> Vec<Complex64> {
    let bound = h.row_sum_bound() + detuning.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let substeps = ((bound * length) / 0.5).ceil().max(1.0) as usize;
    let dz = length / substeps as f64;
    let n = psi.len();
    let mut state = psi.to_vec();
    let mut term = vec![Complex64::new(0.0, 0.0); n];
    let mut next = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..substeps {
        term.copy_from_slice(&state);
        for k in 1..=60 {
            h.apply_detuned(&term, detuning, &mut next);
            let f = Complex64::new(0.0, -dz / k as f64);
            let mut size = 0.0_f64;
            for (t, x) in term.iter_mut().zip(&next) {
                *t = f * x;
                size = size.max(t.norm());
            }
            for (s, t) in state.iter_mut().zip(&term) {
                *s += t;
            }
            if size < 1e-18 {
                break;
            }
        }
    }
    state
}

fn check_psi(psi0: &[Complex64], h: &Hamiltonian, profile: &DetuningProfile) -> Result<()> {
    if psi0.len() != h.dim() {
        return Err(Error::Dimension { expected: h.dim(), found: psi0.len() });
    }
    if profile.n_sites() > h.dim() {
        return Err(Error::Dimension { expected: h.dim(), found: profile.n_sites() });
    }
    let norm: f64 = psi0.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::State(format!("input norm² is {norm}, expected 1")));
    }
    Ok(())
}

/// Amplitudes at every segment boundary, starting with `psi0`.
fn segment_states(psi0: &[Complex64], h: &Hamiltonian, profile: &DetuningProfile) -> Vec<Vec<Complex64>> {
    let mut states = Vec::with_capacity(profile.n_segments + 1);
    states.push(psi0.to_vec());
    for row in &profile.values {
        let next = propagate(h, row, states.last().unwrap(), profile.segment_length);
        states.push(next);
    }
    states
}

fn populations_of(psi: &[Complex64]) -> Vec<f64> {
    psi.iter().map(|a| a.norm_sqr()).collect()
}

/// One realization: exact unitary per segment, populations recorded at
/// every segment boundary.
pub fn piecewise_evolve(psi0: &[Complex64], h_base: &Hamiltonian, profile: &DetuningProfile) -> Result<EvolutionResult> {
    check_psi(psi0, h_base, profile)?;
    let states = segment_states(psi0, h_base, profile);
    let z_grid = (0..states.len()).map(|k| k as f64 * profile.segment_length).collect();
    let populations = states.iter().map(|s| populations_of(s)).collect();
    let last = states.last().unwrap();
    let n = last.len();
    let final_rho = DensityMatrix::from_raw(DMatrix::from_fn(n, n, |i, j| last[i] * last[j].conj()));
    Ok(EvolutionResult { z_grid, populations, final_rho })
}

/// Ensemble configuration shared by [`ensemble_average`] and the dephasing fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub amplitude: f64,
    /// Number of detuned (state) sites.
    pub n_sites: usize,
    pub n_segments: usize,
    pub segment_length: f64,
    pub distribution: DetuningDistribution,
}

impl EnsembleSpec {
    pub fn new(amplitude: f64, n_sites: usize) -> Self {
        EnsembleSpec {
            amplitude,
            n_sites,
            n_segments: DEFAULT_SEGMENTS,
            segment_length: DEFAULT_SEGMENT_LENGTH,
            distribution: DetuningDistribution::OneSided,
        }
    }

    pub fn profile(&self, seed: u64) -> Result<DetuningProfile> {
        sample_detuning_profile_with(self.n_sites, self.n_segments, self.segment_length, self.amplitude, seed, self.distribution)
    }
}

/// Realizations per reduction chunk; fixes the summation tree independently
/// of the thread count.
const CHUNK: usize = 16;

struct EnsembleSums {
    populations: Vec<Vec<f64>>,
    rho: DMatrix<Complex64>,
    coherence: Vec<Complex64>,
}

impl EnsembleSums {
    fn zero(points: usize, dim: usize) -> Self {
        EnsembleSums {
            populations: vec![vec![0.0; dim]; points],
            rho: DMatrix::zeros(dim, dim),
            coherence: vec![Complex64::new(0.0, 0.0); points],
        }
    }

    fn add(&mut self, other: &EnsembleSums) {
        for (a, b) in self.populations.iter_mut().zip(&other.populations) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.rho += &other.rho;
        for (a, b) in self.coherence.iter_mut().zip(&other.coherence) {
            *a += b;
        }
    }
}

fn run_ensemble(
    psi0: &[Complex64],
    h_base: &Hamiltonian,
    spec: &EnsembleSpec,
    seeds: &[u64],
    pair: (usize, usize),
) -> Result<(EvolutionResult, Vec<Complex64>)> {
    if seeds.is_empty() {
        return Err(Error::Domain("ensemble needs at least one realization".into()));
    }
    let probe = spec.profile(seeds[0])?;
    check_psi(psi0, h_base, &probe)?;
    let dim = h_base.dim();
    let points = spec.n_segments + 1;

    let partials: Vec<Result<EnsembleSums>> = seeds
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut sums = EnsembleSums::zero(points, dim);
            for &seed in chunk {
                let profile = spec.profile(seed)?;
                let states = segment_states(psi0, h_base, &profile);
                for (k, s) in states.iter().enumerate() {
                    for (acc, a) in sums.populations[k].iter_mut().zip(s) {
                        *acc += a.norm_sqr();
                    }
                    sums.coherence[k] += s[pair.0] * s[pair.1].conj();
                }
                let last = states.last().unwrap();
                for j in 0..dim {
                    let cj = last[j].conj();
                    for i in 0..dim {
                        sums.rho[(i, j)] += last[i] * cj;
                    }
                }
            }
            Ok(sums)
        })
        .collect();

    let mut total = EnsembleSums::zero(points, dim);
    for p in partials {
        total.add(&p?);
    }
    let inv = 1.0 / seeds.len() as f64;
    let populations = total.populations.into_iter().map(|row| row.into_iter().map(|x| x * inv).collect()).collect();
    let final_rho = DensityMatrix::from_raw(total.rho * Complex64::new(inv, 0.0));
    let coherence = total.coherence.into_iter().map(|c| c * inv).collect();
    let z_grid = (0..points).map(|k| k as f64 * spec.segment_length).collect();
    Ok((EvolutionResult { z_grid, populations, final_rho }, coherence))
}

/// Mean population trajectory over one realization per seed; `final_rho` is
/// the averaged density matrix at the output.
pub fn ensemble_average(
    psi0: &[Complex64],
    h_base: &Hamiltonian,
    spec: &EnsembleSpec,
    seeds: &[u64],
) -> Result<EvolutionResult> {
    run_ensemble(psi0, h_base, spec, seeds, (0, 0)).map(|(r, _)| r)
}

/// Ensemble-averaged `ρ_ij` at every segment boundary.
pub fn ensemble_coherence(
    psi0: &[Complex64],
    h_base: &Hamiltonian,
    spec: &EnsembleSpec,
    seeds: &[u64],
    pair: (usize, usize),
) -> Result<Vec<(f64, Complex64)>> {
    let dim = h_base.dim();
    if pair.0 >= dim || pair.1 >= dim {
        return Err(Error::Dimension { expected: dim, found: pair.0.max(pair.1) + 1 });
    }
    let (res, coh) = run_ensemble(psi0, h_base, spec, seeds, pair)?;
    Ok(res.z_grid.into_iter().zip(coh).collect())
}

/// `sqrt((Δβ/2)² + C²)`.
pub fn effective_coupling(c: f64, dbeta: f64) -> Result<f64> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Domain(format!("coupling must be positive, got {c}")));
    }
    Ok((0.25 * dbeta * dbeta + c * c).sqrt())
}

/// Cross-port power of a detuned directional coupler after length `z`.
pub fn coupler_power_transfer(c: f64, dbeta: f64, z: f64) -> Result<f64> {
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::Domain(format!("propagation length must be non-negative, got {z}")));
    }
    let c_eff = effective_coupling(c, dbeta)?;
    Ok((c * c) / (c_eff * c_eff) * (c_eff * z).sin().powi(2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplerCalibration {
    /// Writing speed of the reference waveguide, mm/s.
    pub base_speed: f64,
    /// Detuning per unit speed offset, mm⁻¹ per mm/s.
    pub slope: f64,
    /// Coupling of the undetuned coupler, mm⁻¹.
    pub coupling: f64,
}

impl Default for CouplerCalibration {
    fn default() -> Self {
        CouplerCalibration { base_speed: 5.0, slope: 0.20, coupling: 0.3 }
    }
}

impl CouplerCalibration {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, v: f64| Error::Validation { key: format!("calibration.{key}"), reason: format!("must be positive, got {v}") };
        if !(self.slope.is_finite() && self.slope > 0.0) {
            return Err(bad("slope", self.slope));
        }
        if !(self.coupling.is_finite() && self.coupling > 0.0) {
            return Err(bad("coupling", self.coupling));
        }
        if !(self.base_speed.is_finite() && self.base_speed > 0.0) {
            return Err(bad("base_speed", self.base_speed));
        }
        Ok(())
    }
}

/// Linear speed-to-detuning map, `Δβ = slope · ΔV`.
pub fn dbeta_from_speed(dv: f64, calib: &CouplerCalibration) -> f64 {
    calib.slope * dv
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplerFit {
    pub c_eff: f64,
    pub c: f64,
    /// Fitted `A` in `P₂(z) = A·sin²(Ω z)`.
    pub amplitude: f64,
    pub rms_residual: f64,
}

impl CouplerFit {
    /// `2·sqrt(C_eff² − C²)`, clamped at zero when noise pushes `C` above `C_eff`.
    pub fn dbeta(&self) -> f64 {
        2.0 * (self.c_eff * self.c_eff - self.c * self.c).max(0.0).sqrt()
    }
}

fn profile_residual(samples: &[(f64, f64)], omega: f64) -> (f64, f64) {
    let (mut ps, mut ss, mut pp) = (0.0, 0.0, 0.0);
    for &(z, p) in samples {
        let s = (omega * z).sin().powi(2);
        ps += p * s;
        ss += s * s;
        pp += p * p;
    }
    if ss > 0.0 {
        (pp - ps * ps / ss, ps / ss)
    } else {
        (pp, 0.0)
    }
}

/// Least-squares fit of `P₂(z) = A·sin²(Ω z)` to coupler power samples,
/// returning `C_eff = Ω` and `C = sqrt(A)·Ω`.
///
/// A grid scan over `Ω` (with `A` solved in closed form) locates the global
/// minimum, golden-section search narrows it, and Gauss–Newton on `(A, Ω)`
/// polishes the result.
pub fn fit_effective_coupling(samples: &[(f64, f64)]) -> Result<CouplerFit> {
    let fail = |reason: String| Error::FitFailure { reason, series: samples.to_vec() };
    if samples.len() < 8 {
        return Err(fail(format!("need at least 8 samples, got {}", samples.len())));
    }
    if samples.iter().any(|&(z, p)| !z.is_finite() || !p.is_finite() || z < 0.0) {
        return Err(fail("samples must be finite with z >= 0".into()));
    }
    let mut zs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    zs.sort_by(f64::total_cmp);
    let span = zs[zs.len() - 1] - zs[0];
    let min_dz = zs.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
    let (pmin, pmax) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.1), hi.max(s.1)));
    if !(span > 0.0 && min_dz.is_finite()) {
        return Err(fail("samples must cover more than one z position".into()));
    }
    if pmax - pmin < 1e-6 {
        return Err(fail(format!("power is flat (range {:e}); no oscillation to fit", pmax - pmin)));
    }

    // Frequencies from a quarter oscillation over the span up to the
    // sampling limit of sin²(Ω z).
    let lo = std::f64::consts::PI / (4.0 * span);
    let hi = std::f64::consts::PI / (2.0 * min_dz);
    // a step of π/(6·span) moves the phase at the far end by at most π/6
    let n_grid = ((hi - lo) * 6.0 * span / std::f64::consts::PI).ceil().clamp(200.0, 20000.0) as usize;
    let grid_step = (hi - lo) / n_grid as f64;
    let (mut best, mut best_r) = (lo, f64::INFINITY);
    for k in 0..=n_grid {
        let omega = lo + k as f64 * grid_step;
        let (r, _) = profile_residual(samples, omega);
        if r < best_r {
            best = omega;
            best_r = r;
        }
    }

    // golden section on [best − step, best + step]
    let (mut a, mut b) = ((best - grid_step).max(lo * 0.5), best + grid_step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (profile_residual(samples, x1).0, profile_residual(samples, x2).0);
    for _ in 0..200 {
        if b - a < 1e-15 * b {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = profile_residual(samples, x1).0;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = profile_residual(samples, x2).0;
        }
    }
    let mut omega = 0.5 * (a + b);
    let mut amp = profile_residual(samples, omega).1;

    // Gauss–Newton polish on (A, Ω)
    for _ in 0..50 {
        let (mut jaa, mut jao, mut joo, mut ga, mut go) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(z, p) in samples {
            let s = (omega * z).sin();
            let c = (omega * z).cos();
            let r = p - amp * s * s;
            let da = s * s;
            let dw = amp * 2.0 * s * c * z;
            jaa += da * da;
            jao += da * dw;
            joo += dw * dw;
            ga += da * r;
            go += dw * r;
        }
        let det = jaa * joo - jao * jao;
        if det.abs() < 1e-300 {
            break;
        }
        let step_a = (joo * ga - jao * go) / det;
        let step_w = (jaa * go - jao * ga) / det;
        let old_r: f64 = samples.iter().map(|&(z, p)| (p - amp * (omega * z).sin().powi(2)).powi(2)).sum();
        let trial_w = omega + step_w;
        let trial_a = amp + step_a;
        let trial_r: f64 = samples.iter().map(|&(z, p)| (p - trial_a * (trial_w * z).sin().powi(2)).powi(2)).sum();
        if !(trial_r <= old_r) {
            break;
        }
        omega = trial_w;
        amp = trial_a;
        if step_w.abs() < 1e-16 * omega && step_a.abs() < 1e-16 {
            break;
        }
    }

    if omega * span < std::f64::consts::FRAC_PI_2 {
        return Err(fail(format!("samples span {span} mm, less than half an oscillation at fitted rate {omega}")));
    }
    if !(amp > 0.0) {
        return Err(fail(format!("fitted amplitude {amp} is not positive")));
    }
    let rms = (samples.iter().map(|&(z, p)| (p - amp * (omega * z).sin().powi(2)).powi(2)).sum::<f64>() / samples.len() as f64).sqrt();
    Ok(CouplerFit { c_eff: omega, c: amp.sqrt() * omega, amplitude: amp, rms_residual: rms })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingFit {
    /// Decay rate of the averaged coherence, mm⁻¹.
    pub rate: f64,
    /// `(z, |ρ̄₀₁(z)|)` used for the fit.
    pub series: Vec<(f64, f64)>,
}

/// Decay rate of the ensemble-averaged coherence of a two-site coupler
/// started in `(|0⟩ + |1⟩)/√2`, fitted as `|ρ̄₀₁(z)| = ½·exp(−rate·z)` by
/// least squares on the logarithm.
pub fn fit_dephasing_rate(h_two_site: &Hamiltonian, spec: &EnsembleSpec, seeds: &[u64]) -> Result<DephasingFit> {
    if h_two_site.dim() != 2 {
        return Err(Error::Dimension { expected: 2, found: h_two_site.dim() });
    }
    if !(spec.amplitude.is_finite() && spec.amplitude >= 0.0) {
        return Err(Error::Domain(format!("detuning amplitude must be non-negative, got {}", spec.amplitude)));
    }
    let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let coh = ensemble_coherence(&[a, a], h_two_site, spec, seeds, (0, 1))?;
    let series: Vec<(f64, f64)> = coh.iter().map(|(z, c)| (*z, c.norm())).collect();
    let points: Vec<(f64, f64)> = series.iter().filter(|(_, y)| *y > 1e-12).map(|&(z, y)| (z, (y / 0.5).ln())).collect();
    if points.len() < 3 || points.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::FitFailure { reason: "coherence vanished before the fit window".into(), series });
    }
    // ln(y/½) = −rate·z, no intercept
    let szz: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let szy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    if szz <= 0.0 {
        return Err(Error::FitFailure { reason: "degenerate z grid".into(), series });
    }
    Ok(DephasingFit { rate: -szy / szz, series })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_hamiltonian, NetworkSpec, SiteRole};
    use approx::assert_abs_diff_eq;

    fn coupler(c: f64) -> Hamiltonian {
        Hamiltonian::from_edges(&[0.0, 0.0], &[(0, 1, c)], vec![SiteRole::State; 2], vec![]).unwrap()
    }

    fn basis(dim: usize, i: usize) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        v[i] = Complex64::new(1.0, 0.0);
        v
    }

    #[test]
    fn zero_amplitude_profile() {
        let p = sample_detuning_profile(7, 40, 2.0, 0.0, 9).unwrap();
        assert!(p.values.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(p.length(), 80.0);
    }

    #[test]
    fn paper_profile_shape_and_range() {
        let p = sample_detuning_profile(7, 40, 2.0, 0.4, 3).unwrap();
        assert_eq!(p.values.iter().flatten().count(), 280);
        assert!(p.values.iter().flatten().all(|&v| (0.0..=0.4).contains(&v)));
        assert_eq!(p, sample_detuning_profile(7, 40, 2.0, 0.4, 3).unwrap());
        assert_ne!(p, sample_detuning_profile(7, 40, 2.0, 0.4, 4).unwrap());
    }

    #[test]
    fn symmetric_profile_range() {
        let p = sample_detuning_profile_with(7, 40, 2.0, 0.4, 3, DetuningDistribution::Symmetric).unwrap();
        assert!(p.values.iter().flatten().all(|&v| (-0.2..=0.2).contains(&v)));
        assert!(p.values.iter().flatten().any(|&v| v < 0.0));
    }

    #[test]
    fn negative_amplitude_rejected() {
        assert!(matches!(sample_detuning_profile(7, 40, 2.0, -0.1, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn detuned_coupler_closed_form() {
        let (c, d) = (0.1, 0.15);
        let h = Hamiltonian::from_edges(&[0.0, 0.0], &[(0, 1, c)], vec![SiteRole::State; 2], vec![]).unwrap();
        let mut profile = DetuningProfile::zeros(2, 40, 2.0);
        for row in &mut profile.values {
            row[1] = d;
        }
        let res = piecewise_evolve(&basis(2, 0), &h, &profile).unwrap();
        for (z, p) in res.z_grid.iter().zip(&res.populations) {
            assert_abs_diff_eq!(p[1], coupler_power_transfer(c, d, *z).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn norm_preserved_over_segments() {
        let h = build_hamiltonian(&NetworkSpec::default()).unwrap();
        let p = sample_detuning_profile(7, 40, 2.0, 0.4, 11).unwrap();
        let res = piecewise_evolve(&basis(h.dim(), 1), &h, &p).unwrap();
        for pops in &res.populations {
            assert!((pops.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_input_norm() {
        let h = coupler(0.1);
        let psi = vec![Complex64::new(0.9, 0.0), Complex64::new(0.0, 0.0)];
        let err = piecewise_evolve(&psi, &h, &DetuningProfile::zeros(2, 4, 1.0)).unwrap_err();
        assert!(matches!(err, Error::State(_)));
    }

    #[test]
    fn single_realization_ensemble_matches_piecewise() {
        let h = build_hamiltonian(&NetworkSpec::with_aux(7, 0.03, 5)).unwrap();
        let spec = EnsembleSpec::new(0.3, 7);
        let psi = basis(h.dim(), 3);
        let single = piecewise_evolve(&psi, &h, &spec.profile(42).unwrap()).unwrap();
        let ens = ensemble_average(&psi, &h, &spec, &[42]).unwrap();
        assert_eq!(single.populations, ens.populations);
        assert_eq!(single.final_rho, ens.final_rho);
    }

    #[test]
    fn zero_amplitude_ensemble_is_pure_walk() {
        let h = build_hamiltonian(&NetworkSpec::with_aux(7, 0.03, 5)).unwrap();
        let spec = EnsembleSpec::new(0.0, 7);
        let psi = basis(h.dim(), 1);
        let pure = piecewise_evolve(&psi, &h, &spec.profile(0).unwrap()).unwrap();
        let ens = ensemble_average(&psi, &h, &spec, &[1, 2, 3, 4, 5]).unwrap();
        for (a, b) in pure.populations.iter().flatten().zip(ens.populations.iter().flatten()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn effective_coupling_examples() {
        assert_eq!(effective_coupling(0.3, 0.0).unwrap(), 0.3);
        assert_abs_diff_eq!(effective_coupling(0.3, 0.8).unwrap(), 0.5, epsilon = 1e-15);
        assert!(effective_coupling(0.0, 0.1).is_err());
        assert!(effective_coupling(-0.2, 0.1).is_err());
        let mut last = effective_coupling(0.3, 0.0).unwrap();
        for k in 1..50 {
            let next = effective_coupling(0.3, 0.02 * k as f64).unwrap();
            assert!(next > last);
            assert_eq!(next, effective_coupling(0.3, -0.02 * k as f64).unwrap());
            last = next;
        }
    }

    #[test]
    fn coupler_power_examples() {
        let c = 0.3;
        assert_abs_diff_eq!(coupler_power_transfer(c, 0.0, std::f64::consts::PI / (2.0 * c)).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(coupler_power_transfer(c, 0.4, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(coupler_power_transfer(0.3, 0.8, std::f64::consts::PI).unwrap(), 0.36, epsilon = 1e-12);
        assert!(coupler_power_transfer(c, 0.1, -1.0).is_err());
    }

    #[test]
    fn speed_map() {
        let cal = CouplerCalibration::default();
        assert_abs_diff_eq!(dbeta_from_speed(1.0, &cal), 0.20, epsilon = 1e-15);
        assert_eq!(dbeta_from_speed(0.0, &cal), 0.0);
        assert_abs_diff_eq!(dbeta_from_speed(2.0, &cal), 0.40, epsilon = 1e-15);
    }

    fn synthetic(c: f64, dbeta: f64, n: usize, z_max: f64) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let z = z_max * k as f64 / (n - 1) as f64;
                (z, coupler_power_transfer(c, dbeta, z).unwrap())
            })
            .collect()
    }

    #[test]
    fn coupler_fit_roundtrip() {
        let fit = fit_effective_coupling(&synthetic(0.3, 0.8, 201, 40.0)).unwrap();
        assert_abs_diff_eq!(fit.c_eff, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.c, 0.3, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.dbeta(), 0.8, epsilon = 1e-6);
    }

    #[test]
    fn coupler_fit_zero_detuning() {
        let fit = fit_effective_coupling(&synthetic(0.3, 0.0, 201, 40.0)).unwrap();
        assert!(fit.dbeta() < 1e-6, "{fit:?}");
    }

    #[test]
    fn coupler_fit_failures() {
        let flat: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, 0.25)).collect();
        match fit_effective_coupling(&flat) {
            Err(Error::FitFailure { series, .. }) => assert_eq!(series.len(), 20),
            other => panic!("expected fit failure, got {other:?}"),
        }
        assert!(fit_effective_coupling(&synthetic(0.3, 0.8, 5, 10.0)).is_err());
        // a tenth of a period is not enough
        assert!(fit_effective_coupling(&synthetic(0.3, 0.0, 50, 0.5)).is_err());
    }

    #[test]
    fn dephasing_rate_zero_without_noise() {
        let spec = EnsembleSpec::new(0.0, 2);
        let fit = fit_dephasing_rate(&coupler(0.03), &spec, &[0, 1, 2]).unwrap();
        assert!(fit.rate.abs() < 1e-12, "{}", fit.rate);
        assert_eq!(fit.series.len(), 41);
    }

    #[test]
    fn dephasing_rate_needs_two_sites() {
        let h = build_hamiltonian(&NetworkSpec::with_aux(3, 0.03, 1)).unwrap();
        assert!(fit_dephasing_rate(&h, &EnsembleSpec::new(0.1, 2), &[0]).is_err());
    }

    #[test]
    fn profile_csv_layout() {
        let p = sample_detuning_profile(3, 2, 1.0, 0.1, 5).unwrap();
        let csv = p.to_csv();
        assert!(csv.starts_with("segment,site_0,site_1,site_2\n0,"));
        assert_eq!(csv.lines().count(), 3);
    }
}
