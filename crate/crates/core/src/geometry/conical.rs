use super::direction::check_beta;
use super::distance::{select_pins, PinPolicy};
use crate::dyadic::GridSet;
use crate::error::{LabError, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

fn check_planar(set: &GridSet) -> Result<()> {
    if set.dim() != 2 {
        return Err(LabError::UnsupportedDimension(set.dim()));
    }
    Ok(())
}

/// Line angles (mod π) of `y - x` over `y ∈ B` with `|x - y| >= r_min`.
fn line_angles(x: [u64; 2], set: &GridSet, r_min: f64) -> Vec<f64> {
    let r = r_min * (set.scale() as f64).exp2();
    let r2 = r * r;
    let mut angles: Vec<f64> = set
        .points()
        .iter()
        .filter_map(|&y| {
            let dx = y[0] as f64 - x[0] as f64;
            let dy = y[1] as f64 - x[1] as f64;
            let d2 = dx * dx + dy * dy;
            if d2 == 0.0 || d2 < r2 {
                return None;
            }
            Some(dy.atan2(dx).rem_euclid(PI))
        })
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    angles
}

/// Largest circular gap between consecutive angles on `[0, π)`.
fn max_gap(angles: &[f64]) -> f64 {
    match angles {
        [] => PI,
        [first, .., last] => {
            let inner = angles.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            inner.max(first + PI - last)
        }
        [_] => PI,
    }
}

/// Every two-sided cone `X(x, β, v)` contains a `y ∈ B` with `|x - y| >= r_min`.
///
/// Equivalent to the largest gap between line angles being below `2β`.
pub fn well_surrounded(x: [u64; 2], set: &GridSet, beta: f64, r_min: f64) -> Result<bool> {
    check_planar(set)?;
    check_beta(beta)?;
    if !(r_min > 0.0) {
        return Err(LabError::invalid(format!("r_min = {r_min} must be positive")));
    }
    let angles = line_angles(x, set, r_min);
    Ok(!angles.is_empty() && max_gap(&angles) < 2.0 * beta)
}

/// Some two-sided cone at `x` of opening `β` misses every other point of `A`.
pub fn has_empty_cone(x: [u64; 2], set: &GridSet, beta: f64) -> Result<bool> {
    check_planar(set)?;
    check_beta(beta)?;
    Ok(max_gap(&line_angles(x, set, 0.0)) >= 2.0 * beta)
}

/// `|A| / 2^k` when every point of the `k`-discrete set `A` has an empty
/// `β`-cone, otherwise `None`.
pub fn empty_cone_ratio(set: &GridSet, beta: f64) -> Result<Option<f64>> {
    check_planar(set)?;
    check_beta(beta)?;
    let all = set
        .points()
        .par_iter()
        .all(|&x| max_gap(&line_angles(x, set, 0.0)) >= 2.0 * beta);
    Ok(all.then(|| set.len() as f64 / (set.scale() as f64).exp2()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicalRecord {
    pub index: usize,
    pub point: [u64; 2],
    pub well_surrounded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicalScan {
    pub scale: u32,
    pub beta: f64,
    pub r_min: f64,
    pub pins_scanned: usize,
    pub well_surrounded: usize,
    pub well_surrounded_fraction: f64,
    pub sampled: bool,
    pub seed: Option<u64>,
    pub per_pin: Vec<ConicalRecord>,
}

pub fn conical_scan(set: &GridSet, beta: f64, r_min: f64, policy: PinPolicy) -> Result<ConicalScan> {
    check_planar(set)?;
    check_beta(beta)?;
    if !(r_min > 0.0) {
        return Err(LabError::invalid(format!("r_min = {r_min} must be positive")));
    }
    let (pins, sampled, seed) = select_pins(set.len(), policy);
    let per_pin: Vec<ConicalRecord> = pins
        .par_iter()
        .map(|&i| {
            let point = set.points()[i];
            let angles = line_angles(point, set, r_min);
            ConicalRecord {
                index: i,
                point,
                well_surrounded: !angles.is_empty() && max_gap(&angles) < 2.0 * beta,
            }
        })
        .collect();
    let good = per_pin.iter().filter(|r| r.well_surrounded).count();
    Ok(ConicalScan {
        scale: set.scale(),
        beta,
        r_min,
        pins_scanned: per_pin.len(),
        well_surrounded: good,
        well_surrounded_fraction: good as f64 / per_pin.len() as f64,
        sampled,
        seed,
        per_pin,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalSet {
    /// Points of `B` that are not well surrounded; may be empty.
    pub points: Vec<[u64; 2]>,
    pub fraction: f64,
    /// `2^{(1-κ) s N}` when `(s, κ)` is supplied.
    pub bound: Option<f64>,
    pub within_bound: Option<bool>,
}

pub fn exceptional_set(
    set: &GridSet,
    beta: f64,
    r_min: f64,
    exponents: Option<(f64, f64)>,
) -> Result<ExceptionalSet> {
    let scan = conical_scan(set, beta, r_min, PinPolicy::All)?;
    let points: Vec<[u64; 2]> = scan
        .per_pin
        .iter()
        .filter(|r| !r.well_surrounded)
        .map(|r| r.point)
        .collect();
    let bound = exponents.map(|(s, kappa)| ((1.0 - kappa) * s * set.scale() as f64).exp2());
    Ok(ExceptionalSet {
        fraction: points.len() as f64 / set.len() as f64,
        within_bound: bound.map(|b| (points.len() as f64) <= b),
        bound,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regular::{generate_pattern_set, PatternSpec};

    #[test]
    fn gap_cases() {
        assert_eq!(max_gap(&[]), PI);
        assert_eq!(max_gap(&[1.0]), PI);
        assert!((max_gap(&[0.1, 0.2, 3.0]) - 2.8).abs() < 1e-12);
        assert!((max_gap(&[0.5, 2.9]) - 2.4).abs() < 1e-12);
        assert!((max_gap(&[0.2, 1.5, 2.9]) - 1.4).abs() < 1e-12);
        assert!((max_gap(&[1.0, 2.0]) - (PI - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn full_grid_center() {
        let a = generate_pattern_set(&PatternSpec::full(2, 5)).unwrap();
        assert!(well_surrounded([16, 16], &a, PI / 8.0, 0.25).unwrap());
    }

    #[test]
    fn half_plane_is_not_surrounded() {
        // everything within a narrow cone around the x-axis
        let pts: Vec<[u64; 2]> = (0..32).flat_map(|i| [[i, 10], [i, 11]]).collect();
        let a = GridSet::new(2, 5, pts).unwrap();
        assert!(!well_surrounded([0, 10], &a, 0.3, 0.1).unwrap());
        assert!(has_empty_cone([0, 10], &a, 0.3).unwrap());
    }

    #[test]
    fn no_qualifying_points() {
        let a = GridSet::new(2, 4, vec![[0, 0], [1, 0]]).unwrap();
        assert!(!well_surrounded([0, 0], &a, 0.5, 0.5).unwrap());
        assert!(well_surrounded([0, 0], &a, 0.5, 0.0).is_err());
    }

    #[test]
    fn line_set_has_empty_cones() {
        let a = GridSet::new(2, 6, (0..64).map(|i| [i, 7]).collect()).unwrap();
        let r = empty_cone_ratio(&a, 0.2).unwrap().unwrap();
        assert!((r - 1.0).abs() < 1e-15);
        let full = generate_pattern_set(&PatternSpec::full(2, 4)).unwrap();
        assert!(empty_cone_ratio(&full, 0.5).unwrap().is_none());
    }

    #[test]
    fn exceptional_bound() {
        let a = generate_pattern_set(&PatternSpec::full(2, 5)).unwrap();
        let e = exceptional_set(&a, 0.4, 0.25, Some((2.0, 0.5))).unwrap();
        assert_eq!(e.bound, Some(32.0));
        assert!(e.points.len() < a.len());
        assert_eq!(e.within_bound, Some(e.points.len() <= 32));
    }
}
