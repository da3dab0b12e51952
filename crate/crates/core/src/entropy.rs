//! Shannon and conditional entropy with respect to dyadic partitions, in bits.

use crate::dyadic::DyadicMeasure;
use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue {
    pub bits: f64,
    pub depth: u32,
}

/// `sum -p log2 p` over the given masses, with `0 log 0 = 0`.
pub fn entropy_of_masses<I: IntoIterator<Item = f64>>(masses: I) -> f64 {
    let h: f64 = masses
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum();
    // rounding can push a zero entropy to -1e-17
    h.max(0.0)
}

/// `H(mu, D_k)`.
pub fn shannon_entropy(mu: &DyadicMeasure, k: u32) -> Result<EntropyValue> {
    let cells = mu.aggregate(k)?;
    Ok(EntropyValue {
        bits: entropy_of_masses(cells.iter().map(|c| c.1)),
        depth: k,
    })
}

/// `H_k(mu) = H(mu, D_k) / k`, in `[0, d]`.
pub fn normalized_entropy(mu: &DyadicMeasure, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(LabError::invalid("normalized entropy needs k >= 1"));
    }
    Ok(shannon_entropy(mu, k)?.bits / k as f64)
}

/// `H(mu, D_fine | D_coarse)`, summed over positive-mass coarse cells.
pub fn conditional_entropy(mu: &DyadicMeasure, fine: u32, coarse: u32) -> Result<EntropyValue> {
    if coarse > fine {
        return Err(LabError::invalid(format!(
            "coarse depth {coarse} exceeds fine depth {fine}"
        )));
    }
    let fine_cells = mu.aggregate(fine)?;
    let shift = mu.dim() as u32 * (fine - coarse);
    let mut bits = 0.0;
    let mut i = 0;
    while i < fine_cells.len() {
        let parent = fine_cells[i].0 >> shift;
        let mut j = i;
        while j < fine_cells.len() && fine_cells[j].0 >> shift == parent {
            j += 1;
        }
        let group = &fine_cells[i..j];
        let mass: f64 = group.iter().map(|c| c.1).sum();
        if mass > 0.0 {
            bits += mass * entropy_of_masses(group.iter().map(|c| c.1 / mass));
        }
        i = j;
    }
    Ok(EntropyValue { bits, depth: fine })
}

/// Entropy with respect to the depth-`k` partition translated by `offset`
/// depth-`N` cells along each axis: cells `[(j + o/2^(N-k)) 2^-k, ...)`.
///
/// The offset is a whole number of finest cells so every depth-`N` cell
/// falls inside exactly one translated cell. Used to compare two partitions
/// whose elements meet at most `2^d` elements of each other.
pub fn shifted_partition_entropy(mu: &DyadicMeasure, k: u32, offset: [u64; 2]) -> Result<f64> {
    if k > mu.depth() {
        return Err(LabError::ResolutionExceeded {
            requested: k,
            depth: mu.depth(),
        });
    }
    let width = 1u64 << (mu.depth() - k);
    let mut bins: std::collections::HashMap<[u64; 2], f64> = std::collections::HashMap::new();
    for (cube, m) in mu.support() {
        let idx = cube.index();
        let mut key = [0u64; 2];
        for axis in 0..mu.dim() {
            key[axis] = (idx[axis] + offset[axis]) / width;
        }
        *bins.entry(key).or_insert(0.0) += m;
    }
    let mut masses: Vec<f64> = bins.into_values().collect();
    masses.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(entropy_of_masses(masses))
}
