use super::direction::Direction;
use crate::dyadic::{DyadicCube, DyadicMeasure};
use crate::entropy::entropy_of_masses;
use crate::error::{LabError, Result};
use crate::scenery::SceneryDistribution;
use rayon::prelude::*;
use std::collections::HashMap;

/// Entropy of a mass list binned by `key`, with masses summed in sorted
/// order so the result does not depend on hash iteration order.
pub(crate) fn binned_entropy<I: Iterator<Item = (i64, f64)>>(items: I) -> f64 {
    let mut bins: HashMap<i64, f64> = HashMap::new();
    for (k, m) in items {
        *bins.entry(k).or_insert(0.0) += m;
    }
    let mut masses: Vec<f64> = bins.into_values().collect();
    masses.sort_by(|a, b| a.partial_cmp(b).unwrap());
    entropy_of_masses(masses)
}

fn check_planar(eta: &DyadicMeasure) -> Result<()> {
    if eta.dim() != 2 {
        return Err(LabError::UnsupportedDimension(eta.dim()));
    }
    Ok(())
}

/// `H_q(Π_v η)`: cell masses pushed to `v · center`, binned on `2^-q` intervals.
pub fn projected_entropy(eta: &DyadicMeasure, v: Direction, q: u32) -> Result<f64> {
    check_planar(eta)?;
    if q == 0 || q > 40 {
        return Err(LabError::invalid(format!("projection depth {q} outside [1, 40]")));
    }
    let scale = (q as f64).exp2();
    let depth = eta.depth();
    let h = binned_entropy(eta.cells().iter().map(|&(code, m)| {
        let c = DyadicCube::from_code(2, depth, code).expect("valid code").center();
        ((v.project(c) * scale).floor() as i64, m)
    }));
    Ok(h / q as f64)
}

/// `|H_q(Π_v η) - H_q(Π_v' η)|` for directions within `2^-q` of each other.
pub fn direction_continuity_check(
    eta: &DyadicMeasure,
    v: Direction,
    w: Direction,
    q: u32,
) -> Result<f64> {
    let limit = (-(q as f64)).exp2();
    if v.chord(&w) > limit * (1.0 + 1e-12) {
        return Err(LabError::invalid(format!(
            "directions {} and {} are more than 2^-{q} apart",
            v.theta(),
            w.theta()
        )));
    }
    Ok((projected_entropy(eta, v, q)? - projected_entropy(eta, w, q)?).abs())
}

/// `ℰ_q(v) = ∫ min(H_q(Π_v η), 1) dP(η)` against an empirical scenery.
pub fn expected_projected_entropy(scn: &SceneryDistribution, v: Direction, q: u32) -> Result<f64> {
    if scn.q_view() < q {
        return Err(LabError::ResolutionExceeded {
            requested: q,
            depth: scn.q_view(),
        });
    }
    let terms: Vec<f64> = scn
        .atoms()
        .par_iter()
        .map(|a| projected_entropy(&a.view, v, q).map(|h| a.weight * h.min(1.0)))
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

/// `ℰ_q` on the direction grid `θ_j = j 2^-q`, `j < ceil(π 2^q)`.
///
/// Projections in `v` and `-v` have the same entropy up to one bin, so
/// half the circle is enough.
pub fn projection_profile(scn: &SceneryDistribution, q: u32) -> Result<Vec<(f64, f64)>> {
    let step = (-(q as f64)).exp2();
    let n = (std::f64::consts::PI / step).ceil() as usize;
    (0..n)
        .map(|j| {
            let v = Direction::new(j as f64 * step)?;
            Ok((v.theta(), expected_projected_entropy(scn, v, q)?))
        })
        .collect()
}
