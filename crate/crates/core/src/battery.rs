//! Named generator families used by calibration and by the inequality checks.
//!
//! Calibration runs the families at small scales with one set of seeds; the
//! checks run them at larger scales with different seeds.

use crate::dyadic::{DyadicCube, DyadicMeasure, GridSet};
use crate::error::{LabError, Result};
use crate::regular::{
    generate_katz_tao, generate_pattern_set, generate_random_regular, set_to_measure, PatternSpec,
    RandomRegularSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The uniform member is built at a depth with at most `2^20` cells.
pub const UNIFORM_MAX_CELLS_LOG2: u32 = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Uniform,
    PointMass,
    MiddleHalfCantor,
    ThreeQuadrant,
    KatzTao,
    RandomRegular { s: f64, c_target: f64, seed: u64 },
    /// Product measure with the given child weights (Morton child order).
    Cascade { weights: Vec<f64> },
    /// Random masses in `[0.2, 1)` on a random regular support.
    RandomWeights { s: f64, c_target: f64, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct Member {
    pub name: String,
    pub family: Family,
    pub measure: DyadicMeasure,
    /// Exponent of the regular set carrying the measure, when there is one.
    pub support_exponent: Option<f64>,
}

impl Member {
    pub fn dim(&self) -> usize {
        self.measure.dim()
    }
}

/// Product measure of depth `depth`; zero weights prune children.
pub fn cascade_measure(dim: usize, depth: u32, weights: &[f64]) -> Result<DyadicMeasure> {
    let children = 1usize << dim;
    if weights.len() != children {
        return Err(LabError::DimensionMismatch {
            expected: children,
            got: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| *w < 0.0) || total <= 0.0 {
        return Err(LabError::invalid("cascade weights must be nonnegative with positive sum"));
    }
    let kept = weights.iter().filter(|w| **w > 0.0).count() as f64;
    if kept.powi(depth as i32) > crate::regular::MAX_GENERATED_POINTS as f64 {
        return Err(LabError::invalid("cascade support too large"));
    }
    let mut cells = vec![(0u64, 1.0f64)];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(cells.len() * kept as usize);
        for &(code, m) in &cells {
            for (c, w) in weights.iter().enumerate() {
                if *w > 0.0 {
                    next.push(((code << dim) | c as u64, m * w / total));
                }
            }
        }
        cells = next;
    }
    DyadicMeasure::from_masses(dim, depth, cells)
}

fn random_weights(set: &GridSet, seed: u64) -> Result<DyadicMeasure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let weights: Vec<(u64, f64)> = set
        .points()
        .iter()
        .map(|&p| (crate::morton::encode(set.dim(), p), rng.gen_range(0.2..1.0)))
        .collect();
    DyadicMeasure::from_weights(set.dim(), set.scale(), weights)
}

pub fn build(family: &Family, dim: usize, depth: u32) -> Result<Member> {
    let regular = |s, c_target, seed| {
        generate_random_regular(&RandomRegularSpec {
            dim,
            scale: depth,
            s,
            c_target,
            seed,
        })
    };
    let (name, measure, support_exponent) = match family {
        Family::Uniform => {
            let depth = depth.min(UNIFORM_MAX_CELLS_LOG2 / dim as u32);
            ("uniform".to_string(), DyadicMeasure::uniform(dim, depth)?, Some(dim as f64))
        }
        Family::PointMass => {
            let side = 1u64 << depth;
            let idx = if dim == 1 { [side / 3, 0] } else { [side / 3, side / 5] };
            let cube = DyadicCube::new(dim, depth, idx)?;
            ("point-mass".to_string(), DyadicMeasure::point_mass(&cube), None)
        }
        Family::MiddleHalfCantor => {
            if dim != 1 || !depth.is_multiple_of(2) {
                return Err(LabError::invalid("middle-half Cantor needs d = 1 and even depth"));
            }
            let set = generate_pattern_set(&PatternSpec::middle_half_cantor(depth / 2))?;
            ("middle-half-cantor".to_string(), set_to_measure(&set), Some(0.5))
        }
        Family::ThreeQuadrant => {
            if dim != 2 {
                return Err(LabError::UnsupportedDimension(dim));
            }
            let set = generate_pattern_set(&PatternSpec::three_quadrant(depth))?;
            ("three-quadrant".to_string(), set_to_measure(&set), Some(3f64.log2()))
        }
        Family::KatzTao => {
            if dim != 2 {
                return Err(LabError::UnsupportedDimension(dim));
            }
            ("katz-tao".to_string(), set_to_measure(&generate_katz_tao(depth)?), Some(1.0))
        }
        Family::RandomRegular { s, c_target, seed } => (
            format!("random-regular-s{s}-seed{seed}"),
            set_to_measure(&regular(*s, *c_target, *seed)?),
            Some(*s),
        ),
        Family::Cascade { weights } => {
            let label: Vec<String> = weights.iter().map(|w| format!("{w}")).collect();
            (
                format!("cascade-{}", label.join("-")),
                cascade_measure(dim, depth, weights)?,
                None,
            )
        }
        Family::RandomWeights { s, c_target, seed } => (
            format!("random-weights-s{s}-seed{seed}"),
            random_weights(&regular(*s, *c_target, *seed)?, *seed)?,
            Some(*s),
        ),
    };
    Ok(Member {
        name: format!("d{dim}-{name}"),
        family: family.clone(),
        measure,
        support_exponent,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Calibration,
    Acceptance,
}

impl Stage {
    /// Depth of the battery measures in dimension `dim`.
    pub fn depth(self, dim: usize) -> u32 {
        match (self, dim) {
            (Stage::Calibration, 1) => 12,
            (Stage::Calibration, _) => 10,
            (Stage::Acceptance, 1) => 18,
            (Stage::Acceptance, _) => 14,
        }
    }

    /// Depth of the planar battery for the direction sweep.
    pub fn continuity_depth(self) -> u32 {
        match self {
            Stage::Calibration => 10,
            Stage::Acceptance => 12,
        }
    }

    pub fn continuity_qs(self) -> Vec<u32> {
        match self {
            Stage::Calibration => vec![3, 4, 5],
            Stage::Acceptance => vec![4, 5, 6],
        }
    }

    /// Depth of the planar battery for pinched configurations.
    pub fn corollary_depth(self) -> u32 {
        match self {
            Stage::Calibration => 12,
            Stage::Acceptance => 14,
        }
    }

    pub fn corollary_qs(self) -> Vec<u32> {
        match self {
            Stage::Calibration => vec![4, 5],
            Stage::Acceptance => vec![4, 5, 6],
        }
    }

    pub fn corollary_thetas(self) -> Vec<f64> {
        match self {
            Stage::Calibration => vec![0.2, 1.1, 2.3, 3.9],
            Stage::Acceptance => vec![0.6, 1.7, 3.0, 4.4, 5.5],
        }
    }

    pub fn richness_qs(self) -> Vec<u32> {
        vec![2, 3]
    }

    /// Scales of the line-like and comb-like sets.
    pub fn cone_scales(self) -> Vec<u32> {
        match self {
            Stage::Calibration => vec![5, 6],
            Stage::Acceptance => vec![7, 8],
        }
    }

    fn seeds(self) -> [u64; 2] {
        match self {
            Stage::Calibration => [101, 102],
            Stage::Acceptance => [7, 8],
        }
    }
}

pub fn families(stage: Stage, dim: usize) -> Vec<Family> {
    let [a, b] = stage.seeds();
    let mut out = vec![Family::Uniform, Family::PointMass];
    if dim == 1 {
        out.extend([
            Family::MiddleHalfCantor,
            Family::RandomRegular { s: 0.6, c_target: 4.0, seed: a },
            Family::RandomRegular { s: 0.8, c_target: 4.0, seed: b },
            Family::Cascade { weights: vec![0.7, 0.3] },
            Family::RandomWeights { s: 0.7, c_target: 4.0, seed: a },
        ]);
    } else {
        out.extend([
            Family::ThreeQuadrant,
            Family::KatzTao,
            Family::RandomRegular { s: 1.2, c_target: 4.0, seed: a },
            Family::RandomRegular { s: 1.4, c_target: 4.0, seed: b },
            Family::RandomRegular { s: 1.6, c_target: 4.0, seed: a },
            Family::Cascade { weights: vec![0.45, 0.35, 0.2, 0.0] },
            Family::RandomWeights { s: 1.4, c_target: 4.0, seed: a },
        ]);
    }
    out
}

/// All members of one dimension at the stage's depth.
pub fn battery(stage: Stage, dim: usize) -> Result<Vec<Member>> {
    battery_at(stage, dim, stage.depth(dim))
}

pub fn battery_at(stage: Stage, dim: usize, depth: u32) -> Result<Vec<Member>> {
    families(stage, dim)
        .iter()
        .map(|f| build(f, dim, depth))
        .collect()
}

/// Line-like and comb-like sets at scale `k` for the empty-cone bound.
pub fn cone_sets(k: u32) -> Result<Vec<(String, GridSet)>> {
    let side = 1u64 << k;
    let mid = side / 2;
    let mut out = vec![
        ("horizontal-line".to_string(), GridSet::new(2, k, (0..side).map(|i| [i, mid]).collect())?),
        ("diagonal".to_string(), GridSet::new(2, k, (0..side).map(|i| [i, i]).collect())?),
        ("slope-half".to_string(), GridSet::new(2, k, (0..side).map(|i| [i, i / 2]).collect())?),
    ];
    for lines in [2u64, 3, 4, 6, 8] {
        for gap in [1u64, 2, 4] {
            if mid / 2 + lines * gap >= side {
                continue;
            }
            let pts = (0..lines)
                .flat_map(|j| (0..side).map(move |i| [i, mid / 2 + j * gap]))
                .collect();
            out.push((format!("stacked-{lines}x{gap}"), GridSet::new(2, k, pts)?));
        }
    }
    for tooth in [1u64, 2, 4] {
        for spacing in [4u64, 8] {
            let mut pts: Vec<[u64; 2]> = (0..side).map(|i| [i, mid]).collect();
            for x in (0..side).step_by(spacing as usize) {
                pts.extend((1..=tooth).map(|t| [x, mid + t]));
            }
            out.push((format!("comb-{tooth}x{spacing}"), GridSet::new(2, k, pts)?));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::shannon_entropy;

    #[test]
    fn cascade_entropy() {
        let mu = cascade_measure(1, 10, &[0.7, 0.3]).unwrap();
        let h = -(0.7f64 * 0.7f64.log2() + 0.3 * 0.3f64.log2());
        assert!((shannon_entropy(&mu, 10).unwrap().bits - 10.0 * h).abs() < 1e-9);
        assert!(cascade_measure(2, 3, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn calibration_battery_builds() {
        for dim in [1, 2] {
            let members = battery(Stage::Calibration, dim).unwrap();
            assert!(members.len() >= 7);
            for m in &members {
                assert!((m.measure.total_mass() - 1.0).abs() < 1e-9, "{}", m.name);
                assert_eq!(m.dim(), dim);
            }
        }
    }
}
