//! State encoding and lattice construction.
//!
//! The primary sites of the lattice form a nearest-neighbour chain whose
//! positions are labelled by threshold patterns (`0…0`, `0…01`, …, `1…1`), so
//! the number of chain spacings between two sites equals the Hamming distance
//! of their labels. Sinks are linear arrays of auxiliary sites hanging off
//! chosen state sites, coupled more strongly than the chain itself.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed-length bit string, written most-significant position first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinaryPattern {
    bits: Vec<bool>,
}

impl BinaryPattern {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidLength(0));
        }
        Ok(BinaryPattern { bits })
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn complement(&self) -> Self {
        BinaryPattern { bits: self.bits.iter().map(|b| !b).collect() }
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Pattern with bit `i` set from the low bits of `value` (last position is
    /// bit 0). Used for exhaustive enumeration over all `2^len` states.
    pub fn from_index(value: u64, len: usize) -> Result<Self> {
        if len == 0 || len > 64 {
            return Err(Error::InvalidLength(len));
        }
        let bits = (0..len).map(|i| (value >> (len - 1 - i)) & 1 == 1).collect();
        Ok(BinaryPattern { bits })
    }
}

impl fmt::Display for BinaryPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BinaryPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Configuration(format!("invalid bit {other:?} in pattern {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        BinaryPattern::new(bits)
    }
}

impl Serialize for BinaryPattern {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BinaryPattern {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The `m + 1` threshold patterns of length `m`: pattern `k` has `k` trailing
/// ones. Consecutive patterns differ in exactly one position.
pub fn threshold_patterns(m: usize) -> Result<Vec<BinaryPattern>> {
    if m == 0 {
        return Err(Error::InvalidLength(0));
    }
    Ok((0..=m)
        .map(|k| BinaryPattern { bits: (0..m).map(|i| i >= m - k).collect() })
        .collect())
}

pub fn hamming(a: &BinaryPattern, b: &BinaryPattern) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), found: b.len() });
    }
    Ok(a.bits.iter().zip(&b.bits).filter(|(x, y)| x != y).count())
}

/// One sink: a linear array of `n_aux` auxiliary sites attached to a state site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkAttachment {
    /// Zero-based index of the state site the array hangs off.
    pub site: usize,
    pub n_aux: usize,
    /// Coupling (mm⁻¹) along the array and between the state site and the
    /// first auxiliary site.
    pub coupling: f64,
}

pub const DEFAULT_CHAIN_COUPLING: f64 = 0.03;
pub const DEFAULT_SINK_RATIO: f64 = 5.0;
pub const DEFAULT_N_STATES: usize = 7;
pub const DEFAULT_N_AUX: usize = 50;
pub const DEFAULT_EVOLUTION_LENGTH: f64 = 80.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSpec {
    pub n_states: usize,
    /// Coupling between adjacent state sites, mm⁻¹.
    pub chain_coupling: f64,
    pub sinks: Vec<SinkAttachment>,
    #[serde(rename = "evolution_length_mm")]
    pub evolution_length: f64,
    /// Common diagonal offset, mm⁻¹. Only contributes a global phase.
    pub base_propagation_constant: f64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self::with_aux(DEFAULT_N_STATES, DEFAULT_CHAIN_COUPLING, DEFAULT_N_AUX)
    }
}

impl NetworkSpec {
    /// Chain of `n_states` with one sink at each end, `n_aux` sites per sink
    /// and sink coupling five times the chain coupling.
    pub fn with_aux(n_states: usize, chain_coupling: f64, n_aux: usize) -> Self {
        let sink = |site| SinkAttachment { site, n_aux, coupling: DEFAULT_SINK_RATIO * chain_coupling };
        NetworkSpec {
            n_states,
            chain_coupling,
            sinks: vec![sink(0), sink(n_states.saturating_sub(1))],
            evolution_length: DEFAULT_EVOLUTION_LENGTH,
            base_propagation_constant: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| Err(Error::Validation { key: format!("network.{key}"), reason });
        if self.n_states < 2 {
            return bad("n_states", format!("need at least 2 state sites, got {}", self.n_states));
        }
        if !(self.chain_coupling.is_finite() && self.chain_coupling > 0.0) {
            return bad("chain_coupling", format!("must be positive, got {}", self.chain_coupling));
        }
        if !(self.evolution_length.is_finite() && self.evolution_length > 0.0) {
            return bad("evolution_length_mm", format!("must be positive, got {}", self.evolution_length));
        }
        if !self.base_propagation_constant.is_finite() {
            return bad("base_propagation_constant", "must be finite".into());
        }
        let mut seen = Vec::new();
        for (k, sink) in self.sinks.iter().enumerate() {
            if sink.site >= self.n_states {
                return bad(&format!("sinks[{k}].site"), format!("{} is not a state site (n_states = {})", sink.site, self.n_states));
            }
            if seen.contains(&sink.site) {
                return Err(Error::Configuration(format!("duplicate sink attachment at state site {}", sink.site)));
            }
            seen.push(sink.site);
            if sink.n_aux == 0 {
                return bad(&format!("sinks[{k}].n_aux"), "a sink needs at least one auxiliary site".into());
            }
            if !(sink.coupling.is_finite() && sink.coupling > self.chain_coupling) {
                return bad(
                    &format!("sinks[{k}].coupling"),
                    format!("must exceed chain_coupling {}, got {}", self.chain_coupling, sink.coupling),
                );
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n_states + self.sinks.iter().map(|s| s.n_aux).sum::<usize>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteRole {
    State,
    /// Auxiliary waveguide of a sink array.
    Aux,
    /// Single absorbing node of the abstract walk.
    Sink,
}

/// Hermitian coupling matrix over all sites, units mm⁻¹.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    entries: DMatrix<Complex64>,
    /// Undirected edges `(i, j, coupling)` with `i < j`.
    edges: Vec<(usize, usize, f64)>,
    site_roles: Vec<SiteRole>,
    sink_groups: Vec<Vec<usize>>,
}

impl Hamiltonian {
    /// Real symmetric Hamiltonian from a diagonal and an undirected edge list.
    pub fn from_edges(
        diagonal: &[f64],
        edges: &[(usize, usize, f64)],
        site_roles: Vec<SiteRole>,
        sink_groups: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let dim = diagonal.len();
        if site_roles.len() != dim {
            return Err(Error::Dimension { expected: dim, found: site_roles.len() });
        }
        let mut entries = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            dim,
            diagonal.iter().map(|&d| Complex64::new(d, 0.0)),
        ));
        let mut normalized = Vec::with_capacity(edges.len());
        for &(i, j, c) in edges {
            if i >= dim || j >= dim || i == j {
                return Err(Error::Configuration(format!("invalid edge ({i}, {j}) for dimension {dim}")));
            }
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            entries[(a, b)] = Complex64::new(c, 0.0);
            entries[(b, a)] = Complex64::new(c, 0.0);
            normalized.push((a, b, c));
        }
        for group in &sink_groups {
            if let Some(&bad) = group.iter().find(|&&i| i >= dim) {
                return Err(Error::Configuration(format!("sink index {bad} out of range")));
            }
        }
        Ok(Hamiltonian { entries, edges: normalized, site_roles, sink_groups })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).collect()
    }

    pub fn site_roles(&self) -> &[SiteRole] {
        &self.site_roles
    }

    pub fn sink_groups(&self) -> &[Vec<usize>] {
        &self.sink_groups
    }

    pub fn state_sites(&self) -> Vec<usize> {
        self.site_roles.iter().enumerate().filter(|(_, r)| **r == SiteRole::State).map(|(i, _)| i).collect()
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        nalgebra::SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Upper bound on the spectral norm: the largest absolute row sum.
    pub fn row_sum_bound(&self) -> f64 {
        self.entries.row_iter().map(|r| r.iter().map(|c| c.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// `out = H·psi` with an extra per-site diagonal `detuning` (missing
    /// entries count as zero). Uses the edge list, not the dense matrix.
    pub(crate) fn apply_detuned(&self, psi: &[Complex64], detuning: &[f64], out: &mut [Complex64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let d = self.entries[(i, i)].re + detuning.get(i).copied().unwrap_or(0.0);
            *o = psi[i] * d;
        }
        for &(i, j, c) in &self.edges {
            out[i] += psi[j] * c;
            out[j] += psi[i] * c;
        }
    }
}

/// Lattice Hamiltonian: state chain plus one auxiliary array per sink.
///
/// Site order is the state sites first, then each sink's auxiliary sites in
/// attachment order, nearest to the state site first.
pub fn build_hamiltonian(spec: &NetworkSpec) -> Result<Hamiltonian> {
    spec.validate()?;
    let dim = spec.dim();
    let mut roles = vec![SiteRole::State; spec.n_states];
    let mut edges: Vec<(usize, usize, f64)> =
        (0..spec.n_states - 1).map(|i| (i, i + 1, spec.chain_coupling)).collect();
    let mut groups = Vec::with_capacity(spec.sinks.len());
    let mut next = spec.n_states;
    for sink in &spec.sinks {
        let group: Vec<usize> = (next..next + sink.n_aux).collect();
        edges.push((sink.site, group[0], sink.coupling));
        edges.extend(group.windows(2).map(|w| (w[0], w[1], sink.coupling)));
        roles.extend(std::iter::repeat_n(SiteRole::Aux, sink.n_aux));
        next += sink.n_aux;
        groups.push(group);
    }
    Hamiltonian::from_edges(&vec![spec.base_propagation_constant; dim], &edges, roles, groups)
}
