//! Classical Hopfield network used as the reference associative memory.
//!
//! Bits map to spins as `0 → −1`, `1 → +1`. Thresholds are zero and a
//! neuron whose local field is exactly zero keeps its current value.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::network::{hamming, BinaryPattern};

#[derive(Clone, Debug, PartialEq)]
pub struct HopfieldNetwork {
    m: usize,
    /// Row-major `m × m`, symmetric with zero diagonal.
    weights: Vec<f64>,
    stored: Vec<BinaryPattern>,
}

fn spin(b: bool) -> f64 {
    if b {
        1.0
    } else {
        -1.0
    }
}

/// One-shot Hebbian storage, `w_ij = (1/m) Σ_p s_i s_j` off the diagonal.
pub fn hebbian_store(patterns: &[BinaryPattern]) -> Result<HopfieldNetwork> {
    let first = patterns.first().ok_or_else(|| Error::Configuration("no patterns to store".into()))?;
    let m = first.len();
    if let Some(bad) = patterns.iter().find(|p| p.len() != m) {
        return Err(Error::Dimension { expected: m, found: bad.len() });
    }
    let mut weights = vec![0.0; m * m];
    for p in patterns {
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    weights[i * m + j] += spin(p.get(i)) * spin(p.get(j));
                }
            }
        }
    }
    let inv = 1.0 / m as f64;
    weights.iter_mut().for_each(|w| *w *= inv);
    Ok(HopfieldNetwork { m, weights, stored: patterns.to_vec() })
}

impl HopfieldNetwork {
    /// Network with all weights zero.
    pub fn empty(m: usize) -> Self {
        HopfieldNetwork { m, weights: vec![0.0; m * m], stored: Vec::new() }
    }

    pub fn neurons(&self) -> usize {
        self.m
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.m + j]
    }

    pub fn stored_patterns(&self) -> &[BinaryPattern] {
        &self.stored
    }

    fn check_len(&self, state: &BinaryPattern) -> Result<()> {
        if state.len() != self.m {
            return Err(Error::Dimension { expected: self.m, found: state.len() });
        }
        Ok(())
    }

    fn field(&self, state: &BinaryPattern, i: usize) -> f64 {
        (0..self.m).filter(|&j| j != i).map(|j| self.weight(i, j) * spin(state.get(j))).sum()
    }
}

/// `E = −½ Σ_{i≠j} w_ij s_i s_j`.
pub fn energy(net: &HopfieldNetwork, state: &BinaryPattern) -> Result<f64> {
    net.check_len(state)?;
    let mut e = 0.0;
    for i in 0..net.m {
        for j in 0..net.m {
            if i != j {
                e += net.weight(i, j) * spin(state.get(i)) * spin(state.get(j));
            }
        }
    }
    Ok(-0.5 * e)
}

/// One asynchronous sweep over the neurons in `order`.
pub fn update_async(net: &HopfieldNetwork, state: &BinaryPattern, order: &[usize]) -> Result<BinaryPattern> {
    net.check_len(state)?;
    let mut seen = vec![false; net.m];
    for &i in order {
        if i >= net.m || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Configuration(format!("update order {order:?} is not a permutation of 0..{}", net.m)));
        }
    }
    if order.len() != net.m {
        return Err(Error::Configuration(format!("update order {order:?} is not a permutation of 0..{}", net.m)));
    }
    let mut next = state.clone();
    for &i in order {
        let h = net.field(&next, i);
        if h > 0.0 {
            next.set(i, true);
        } else if h < 0.0 {
            next.set(i, false);
        }
    }
    Ok(next)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Retrieval {
    pub attractor: BinaryPattern,
    /// Sweeps performed, including the final one that changed nothing.
    pub sweeps: usize,
}

/// Sweeps in natural neuron order until a fixed point.
pub fn retrieve(net: &HopfieldNetwork, initial: &BinaryPattern, max_sweeps: usize) -> Result<Retrieval> {
    let order: Vec<usize> = (0..net.m).collect();
    retrieve_with_order(net, initial, &order, max_sweeps)
}

pub fn retrieve_with_order(
    net: &HopfieldNetwork,
    initial: &BinaryPattern,
    order: &[usize],
    max_sweeps: usize,
) -> Result<Retrieval> {
    if max_sweeps == 0 {
        return Err(Error::Configuration("max_sweeps must be at least 1".into()));
    }
    let mut state = initial.clone();
    for sweep in 1..=max_sweeps {
        let next = update_async(net, &state, order)?;
        if next == state {
            return Ok(Retrieval { attractor: next, sweeps: sweep });
        }
        state = next;
    }
    Err(Error::NonConvergence { sweeps: max_sweeps, last: state })
}

/// Stored patterns at minimal Hamming distance from `state`. More than one
/// entry means a tie.
pub fn nearest_stored(patterns: &[BinaryPattern], state: &BinaryPattern) -> Result<(BTreeSet<BinaryPattern>, usize)> {
    if patterns.is_empty() {
        return Err(Error::Configuration("no stored patterns".into()));
    }
    let dists = patterns.iter().map(|p| hamming(p, state)).collect::<Result<Vec<_>>>()?;
    let best = *dists.iter().min().unwrap();
    let set = patterns.iter().zip(&dists).filter(|(_, &d)| d == best).map(|(p, _)| p.clone()).collect();
    Ok((set, best))
}
