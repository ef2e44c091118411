//! Quantum stochastic walk engine.
//!
//! Integrates the master equation
//!
//! ```text
//! dρ/dz = −(1−ω)·i[H, ρ] + ω·Σ (L ρ L† − ½{L†L, ρ})
//! ```
//!
//! where every jump operator is `L = sqrt(rate)·|to⟩⟨from|`. Propagation
//! distance `z` (mm) plays the role of time.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig9;
use crate::network::{Hamiltonian, NetworkSpec, SiteRole};

pub const TRACE_TOL: f64 = 1e-9;
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-7;
/// Largest accepted `step × scale` for the integrator.
pub const STABILITY_LIMIT: f64 = 0.1;
/// `step × scale` targeted by [`WalkParams::auto`].
pub const DEFAULT_STEP_FACTOR: f64 = 0.01;


#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    rho: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Wraps `rho` after checking Hermiticity, unit trace and positivity.
    pub fn new(rho: DMatrix<Complex64>) -> Result<Self> {
        if !rho.is_square() {
            return Err(Error::Dimension { expected: rho.nrows(), found: rho.ncols() });
        }
        let dm = DensityMatrix { rho };
        dm.check(true).map_err(Error::State)?;
        Ok(dm)
    }

    pub(crate) fn from_raw(rho: DMatrix<Complex64>) -> Self {
        DensityMatrix { rho }
    }

    /// `|site⟩⟨site|`.
    pub fn basis(dim: usize, site: usize) -> Result<Self> {
        if site >= dim {
            return Err(Error::Dimension { expected: dim, found: site + 1 });
        }
        let mut rho = DMatrix::zeros(dim, dim);
        rho[(site, site)] = Complex64::new(1.0, 0.0);
        Ok(DensityMatrix { rho })
    }

    /// `|psi⟩⟨psi|` for a unit-norm amplitude vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > TRACE_TOL {
            return Err(Error::State(format!("state norm² is {norm}, expected 1")));
        }
        let dim = psi.len();
        Ok(DensityMatrix { rho: DMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj()) })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix { rho: DMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    /// Largest elementwise `|ρ_ij − conj(ρ_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.rho[(i, j)] - self.rho[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        // symmetrize so the eigen solver sees an exactly Hermitian input
        let h = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        nalgebra::SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn check(&self, positivity: bool) -> std::result::Result<(), String> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(format!("trace {tr} deviates from 1"));
        }
        let herm = self.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(format!("hermiticity error {herm:e}"));
        }
        if positivity {
            let min = self.min_eigenvalue();
            if min < -POSITIVITY_TOL {
                return Err(format!("negative eigenvalue {min:e}"));
            }
        }
        Ok(())
    }
}

pub fn site_populations(rho: &DensityMatrix) -> Vec<f64> {
    (0..rho.dim()).map(|i| rho.rho[(i, i)].re).collect()
}

/// `tr(ρ²)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    // tr(ρ²) = Σ_ij ρ_ij ρ_ji = Σ_ij |ρ_ij|² for Hermitian ρ
    rho.rho.iter().map(|c| c.norm_sqr()).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

/// Jump operators `sqrt(rate)·|to⟩⟨from|`. `from == to` gives pure dephasing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LindbladSet {
    jumps: Vec<Jump>,
}

impl LindbladSet {
    pub fn new(jumps: Vec<Jump>) -> Result<Self> {
        for j in &jumps {
            if !(j.rate.is_finite() && j.rate >= 0.0) {
                return Err(Error::Domain(format!("jump {} -> {} has invalid rate {}", j.from, j.to, j.rate)));
            }
        }
        Ok(LindbladSet { jumps })
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn max_index(&self) -> Option<usize> {
        self.jumps.iter().map(|j| j.from.max(j.to)).max()
    }

    /// Total rate out of each site: the diagonal of `Σ L†L`.
    pub fn outflow(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for j in &self.jumps {
            out[j.from] += j.rate;
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    /// Mixing between coherent (0) and classical (1) dynamics.
    pub omega: f64,
    /// Integration step, mm.
    pub step: f64,
    /// Steps between stored snapshots.
    pub record_every: usize,
}

impl WalkParams {
    pub fn new(omega: f64, step: f64, record_every: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&omega) {
            return Err(Error::Domain(format!("omega must lie in [0, 1], got {omega}")));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Domain(format!("step must be positive, got {step}")));
        }
        Ok(WalkParams { omega, step, record_every: record_every.max(1) })
    }

    /// Step chosen so `step × generator_scale` is [`DEFAULT_STEP_FACTOR`],
    /// recording roughly once per millimetre.
    pub fn auto(h: &Hamiltonian, l: &LindbladSet, omega: f64) -> Result<Self> {
        let scale = generator_scale(h, l, omega).max(1e-3);
        let step = DEFAULT_STEP_FACTOR / scale;
        WalkParams::new(omega, step, (1.0 / step).round().max(1.0) as usize)
    }
}

/// Rate scale used for the stability check: the larger of `‖H‖₂` and
/// `ω·max outflow`.
pub fn generator_scale(h: &Hamiltonian, l: &LindbladSet, omega: f64) -> f64 {
    let dissipative = omega * l.outflow(h.dim()).into_iter().fold(0.0, f64::max);
    h.spectral_norm().max(dissipative)
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub z_grid: Vec<f64>,
    /// `populations[k][i]`: population of site `i` at `z_grid[k]`.
    pub populations: Vec<Vec<f64>>,
    pub final_rho: DensityMatrix,
}

impl EvolutionResult {
    pub fn final_populations(&self) -> &[f64] {
        self.populations.last().expect("at least the initial snapshot is recorded")
    }

    /// CSV with columns `z_mm, site_0, …, site_{dim-1}`.
    pub fn to_csv(&self) -> String {
        let dim = self.final_rho.dim();
        let mut out = String::from("z_mm");
        for i in 0..dim {
            out.push_str(&format!(",site_{i}"));
        }
        out.push('\n');
        for (z, pops) in self.z_grid.iter().zip(&self.populations) {
            out.push_str(&sig9(*z));
            for p in pops {
                out.push(',');
                out.push_str(&sig9(*p));
            }
            out.push('\n');
        }
        out
    }
}

fn check_dims(rho: &DensityMatrix, h: &Hamiltonian, l: &LindbladSet) -> Result<()> {
    if rho.dim() != h.dim() {
        return Err(Error::Dimension { expected: h.dim(), found: rho.dim() });
    }
    if let Some(m) = l.max_index() {
        if m >= h.dim() {
            return Err(Error::Dimension { expected: h.dim(), found: m + 1 });
        }
    }
    Ok(())
}

/// Right-hand side `dρ/dz` of the master equation.
pub fn lindblad_generator(
    rho: &DensityMatrix,
    h: &Hamiltonian,
    l: &LindbladSet,
    omega: f64,
) -> Result<DMatrix<Complex64>> {
    check_dims(rho, h, l)?;
    let gen = Generator::new(h, l, omega);
    let mut out = DMatrix::zeros(h.dim(), h.dim());
    gen.apply(&rho.rho, &mut out);
    Ok(out)
}

/// Sparse evaluation of the generator as `Y + Y†`, with
/// `Y = −i(1−ω)Hρ − ½ω Kρ + ½ω Σ rate·ρ_ff |t⟩⟨t|` and `K = Σ L†L`.
/// Writing the output this way keeps it exactly Hermitian.
struct Generator<'a> {
    h: &'a Hamiltonian,
    diag: Vec<f64>,
    outflow: Vec<f64>,
    jumps: &'a [Jump],
    coherent: f64,
    omega: f64,
}

impl<'a> Generator<'a> {
    fn new(h: &'a Hamiltonian, l: &'a LindbladSet, omega: f64) -> Self {
        Generator {
            h,
            diag: h.diagonal(),
            outflow: l.outflow(h.dim()),
            jumps: l.jumps(),
            coherent: 1.0 - omega,
            omega,
        }
    }

    fn apply(&self, rho: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let n = rho.nrows();
        let mi = Complex64::new(0.0, -self.coherent);
        let half_omega = 0.5 * self.omega;
        // Y = −i(1−ω)·(Hρ) − ½ω·Kρ, row by row
        for a in 0..n {
            let scale_diag = mi * self.diag[a] - half_omega * self.outflow[a];
            for b in 0..n {
                out[(a, b)] = scale_diag * rho[(a, b)];
            }
        }
        if self.coherent != 0.0 {
            for &(i, j, c) in self.h.edges() {
                let f = mi * c;
                for b in 0..n {
                    out[(i, b)] += f * rho[(j, b)];
                    out[(j, b)] += f * rho[(i, b)];
                }
            }
        }
        for jump in self.jumps {
            out[(jump.to, jump.to)] += half_omega * jump.rate * rho[(jump.from, jump.from)].re;
        }
        // out ← Y + Y†
        for a in 0..n {
            out[(a, a)] = Complex64::new(2.0 * out[(a, a)].re, 0.0);
            for b in a + 1..n {
                let s = out[(a, b)] + out[(b, a)].conj();
                out[(a, b)] = s;
                out[(b, a)] = s.conj();
            }
        }
    }
}

/// Fixed-step classical RK4 integration of the master equation over
/// `z_total` mm.
///
/// The step is shortened so that a whole number of steps covers `z_total`.
/// Trace and Hermiticity are checked after every step, positivity at every
/// recorded snapshot.
pub fn evolve(
    rho0: &DensityMatrix,
    h: &Hamiltonian,
    l: &LindbladSet,
    params: &WalkParams,
    z_total: f64,
) -> Result<EvolutionResult> {
    check_dims(rho0, h, l)?;
    rho0.check(true).map_err(Error::State)?;
    if !(z_total.is_finite() && z_total > 0.0) {
        return Err(Error::Domain(format!("z_total must be positive, got {z_total}")));
    }
    let params = WalkParams::new(params.omega, params.step, params.record_every)?;
    let norm = h.spectral_norm();
    if params.step * norm > STABILITY_LIMIT {
        return Err(Error::Stability { step: params.step, scale: norm, limit: STABILITY_LIMIT });
    }
    let scale = generator_scale(h, l, params.omega);
    if params.step * scale > STABILITY_LIMIT {
        return Err(Error::Stability { step: params.step, scale, limit: STABILITY_LIMIT });
    }

    let n_steps = ((z_total / params.step) - 1e-9).ceil().max(1.0) as usize;
    let dz = z_total / n_steps as f64;
    let gen = Generator::new(h, l, params.omega);
    let n = h.dim();

    let mut rho = rho0.rho.clone();
    let mut k1 = DMatrix::zeros(n, n);
    let mut k2 = DMatrix::zeros(n, n);
    let mut k3 = DMatrix::zeros(n, n);
    let mut k4 = DMatrix::zeros(n, n);
    let mut tmp = DMatrix::zeros(n, n);
    let half = Complex64::new(0.5 * dz, 0.0);
    let full = Complex64::new(dz, 0.0);
    let sixth = Complex64::new(dz / 6.0, 0.0);
    let two = Complex64::new(2.0, 0.0);

    let mut z_grid = vec![0.0];
    let mut populations = vec![site_populations(rho0)];

    for step in 1..=n_steps {
        gen.apply(&rho, &mut k1);
        tmp.copy_from(&rho);
        tmp.zip_apply(&k1, |t, k| *t += half * k);
        gen.apply(&tmp, &mut k2);
        tmp.copy_from(&rho);
        tmp.zip_apply(&k2, |t, k| *t += half * k);
        gen.apply(&tmp, &mut k3);
        tmp.copy_from(&rho);
        tmp.zip_apply(&k3, |t, k| *t += full * k);
        gen.apply(&tmp, &mut k4);
        for idx in 0..n * n {
            rho[idx] += sixth * (k1[idx] + two * (k2[idx] + k3[idx]) + k4[idx]);
        }

        let z = step as f64 * dz;
        let current = DensityMatrix::from_raw(rho.clone());
        let record = step % params.record_every == 0 || step == n_steps;
        if let Err(reason) = current.check(record) {
            return Err(Error::Diverged { z, reason });
        }
        if record {
            z_grid.push(z);
            populations.push(site_populations(&current));
        }
    }
    let final_rho = DensityMatrix::from_raw(rho);
    Ok(EvolutionResult { z_grid, populations, final_rho })
}

/// Per-snapshot population summed over the sites of `group`.
pub fn sink_population(result: &EvolutionResult, group: &[usize]) -> Result<Vec<f64>> {
    if group.is_empty() {
        return Err(Error::Configuration("empty sink group".into()));
    }
    let dim = result.final_rho.dim();
    if let Some(&bad) = group.iter().find(|&&i| i >= dim) {
        return Err(Error::Dimension { expected: dim, found: bad + 1 });
    }
    Ok(result.populations.iter().map(|p| group.iter().map(|&i| p[i]).sum()).collect())
}

/// Rates for the abstract walk built by [`abstract_walk`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QswRates {
    /// Rate of every chain and sink jump, mm⁻¹ (scaled by ω in the generator).
    pub rate_constant: f64,
    /// Rate of optional pure-dephasing jumps `|i⟩⟨i|` on state sites.
    pub dephasing_rate: f64,
}

impl Default for QswRates {
    fn default() -> Self {
        QswRates { rate_constant: 1.0, dephasing_rate: 0.0 }
    }
}

/// Abstract walk on the state chain with one absorbing node per sink.
///
/// Node order is the state sites, then one sink node per attachment. Chain
/// edges carry coherent coupling and jumps in both directions; each sink is
/// reached only by the directed jump `state site → sink node`.
pub fn abstract_walk(spec: &NetworkSpec, rates: &QswRates) -> Result<(Hamiltonian, LindbladSet)> {
    spec.validate()?;
    let n = spec.n_states;
    let dim = n + spec.sinks.len();
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, spec.chain_coupling)).collect();
    let mut roles = vec![SiteRole::State; n];
    roles.extend(std::iter::repeat_n(SiteRole::Sink, spec.sinks.len()));
    let groups = (n..dim).map(|i| vec![i]).collect();
    let h = Hamiltonian::from_edges(&vec![spec.base_propagation_constant; dim], &edges, roles, groups)?;

    let r = rates.rate_constant;
    let mut jumps = Vec::new();
    for i in 0..n - 1 {
        jumps.push(Jump { from: i, to: i + 1, rate: r });
        jumps.push(Jump { from: i + 1, to: i, rate: r });
    }
    for (k, sink) in spec.sinks.iter().enumerate() {
        jumps.push(Jump { from: sink.site, to: n + k, rate: r });
    }
    if rates.dephasing_rate > 0.0 {
        jumps.extend((0..n).map(|i| Jump { from: i, to: i, rate: rates.dephasing_rate }));
    }
    Ok((h, LindbladSet::new(jumps)?))
}
