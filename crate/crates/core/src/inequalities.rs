//! Quantitative checks of the entropy inequalities over a battery, returning
//! the raw slack of every instance so calibration and assertions share code.

use crate::battery::Member;
use crate::dyadic::{DyadicCube, DyadicMeasure};
use crate::entropy::normalized_entropy;
use crate::error::{LabError, Result};
use crate::geometry::direction::{direction, Direction};
use crate::geometry::distance::half_distance_entropy;
use crate::geometry::projection::{expected_projected_entropy, projection_profile};
use crate::scenery::{local_global_gaps, measure_scenery, minimal_rich_delta, scenery_entropies};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub member: String,
    pub dim: usize,
    pub q: u32,
    pub n_prime: u32,
    pub gap: f64,
    /// `|gap| N' / q`.
    pub normalized: f64,
}

/// Local-global gaps at every `(q, N')` that fits the member's depth.
pub fn gap_records(member: &Member, pairs: &[(u32, u32)]) -> Result<Vec<GapRecord>> {
    let mu = &member.measure;
    let mut out = Vec::new();
    let mut qs: Vec<u32> = pairs.iter().map(|p| p.0).collect();
    qs.sort_unstable();
    qs.dedup();
    for q in qs {
        let ns: Vec<u32> = pairs
            .iter()
            .filter(|&&(pq, n)| pq == q && q < n && n + q <= mu.depth())
            .map(|p| p.1)
            .collect();
        for (n, gap) in ns.iter().zip(local_global_gaps(mu, q, &ns)?) {
            out.push(GapRecord {
                member: member.name.clone(),
                dim: mu.dim(),
                q,
                n_prime: *n,
                gap,
                normalized: gap.abs() * *n as f64 / q as f64,
            });
        }
    }
    Ok(out)
}

/// `(q, N')` grid used for the local-global constant.
pub fn gap_pairs(depth: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for q in 1..=4 {
        for n in (q + 1)..=(depth - q) {
            out.push((q, n));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinchedConfig {
    pub member: String,
    /// Depth and index of the cell `D`.
    pub cell_depth: u32,
    pub cell_index: [u64; 2],
    pub q: u32,
    pub direction: f64,
    /// Pin in the coordinates of `D` rescaled to the unit square.
    pub pin: [f64; 2],
    pub n_prime: u32,
    /// `max_{y ∈ D} |σ(x, y) - v|`; at most `2^-q` by construction.
    pub pinch: f64,
}

/// `max |σ(x, y) - v|` over the unit square, attained at a corner since the
/// pin lies outside the square.
pub fn pinch_width(pin: [f64; 2], v: Direction) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for corner in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
        worst = worst.max(direction(&pin, &corner)?.chord(&v));
    }
    Ok(worst)
}

/// Pin `x` on the ray from the square's center in direction `v`, far enough
/// that every `σ(x, y)` with `y` in the square is within `2^-q` of `v`.
pub fn pinched_pin(v: Direction, q: u32) -> Result<([f64; 2], f64)> {
    let limit = (-(q as f64)).exp2();
    let u = v.vector();
    let mut r = 2f64.sqrt() * (q as f64).exp2();
    loop {
        let pin = [0.5 + r * u[0], 0.5 + r * u[1]];
        let pinch = pinch_width(pin, v)?;
        if pinch <= limit {
            return Ok((pin, pinch));
        }
        r *= 1.25;
    }
}

/// Configurations over cells `D` at the given depths (heaviest and first
/// positive-mass cell), view depths `qs` and directions `thetas`.
pub fn pinched_configs(
    member: &Member,
    cell_depths: &[u32],
    qs: &[u32],
    thetas: &[f64],
) -> Result<Vec<PinchedConfig>> {
    let mu = &member.measure;
    if mu.dim() != 2 {
        return Err(LabError::UnsupportedDimension(mu.dim()));
    }
    let mut out = Vec::new();
    for &m in cell_depths {
        let cells = mu.aggregate(m)?;
        let heaviest = cells
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
            .expect("nonempty support")
            .0;
        let mut picks = vec![cells[0].0];
        if heaviest != cells[0].0 {
            picks.push(heaviest);
        }
        for code in picks {
            let cube = DyadicCube::from_code(2, m, code)?;
            for &q in qs {
                if mu.depth() < m + 2 * q + 1 {
                    continue;
                }
                for &theta in thetas {
                    let v = Direction::new(theta)?;
                    let (pin, pinch) = pinched_pin(v, q)?;
                    out.push(PinchedConfig {
                        member: member.name.clone(),
                        cell_depth: m,
                        cell_index: cube.index(),
                        q,
                        direction: v.theta(),
                        pin,
                        n_prime: mu.depth() - m - q,
                        pinch,
                    });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorollaryRecord {
    pub config: PinchedConfig,
    /// `H_{N'}(φ_x μ_D)`.
    pub distance_entropy: f64,
    /// `∫ H_q(Π_v η) d<μ_D>_[0,N')`.
    pub projected_mean: f64,
    /// `projected_mean - distance_entropy`.
    pub slack: f64,
    /// `q / N' + 1 / q`.
    pub scale_term: f64,
}

impl CorollaryRecord {
    /// Smallest `c` with `distance_entropy >= projected_mean - c (q/N' + 1/q)`.
    pub fn required_constant(&self) -> f64 {
        (self.slack / self.scale_term).max(0.0)
    }
}

pub fn corollary_record(mu: &DyadicMeasure, config: &PinchedConfig) -> Result<CorollaryRecord> {
    let cube = DyadicCube::new(2, config.cell_depth, config.cell_index)?;
    let mu_d = mu.view(&cube, mu.depth() - config.cell_depth)?;
    let v = Direction::new(config.direction)?;
    let q = config.q;
    let n = config.n_prime;
    let scn = measure_scenery(&mu_d, 0, n, q)?;
    let projected_mean = scn.expectation(|eta| {
        crate::geometry::projection::projected_entropy(eta, v, q).expect("planar view")
    });
    let distance_entropy = half_distance_entropy(&config.pin, &mu_d, n)?;
    Ok(CorollaryRecord {
        config: config.clone(),
        distance_entropy,
        projected_mean,
        slack: projected_mean - distance_entropy,
        scale_term: q as f64 / n as f64 + 1.0 / q as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRecord {
    pub member: String,
    pub q: u32,
    pub theta: f64,
    pub theta_next: f64,
    pub chord: f64,
    /// `|ℰ_q(v) - ℰ_q(v')|`.
    pub difference: f64,
    /// `q |ℰ_q(v) - ℰ_q(v')|`.
    pub normalized: f64,
}

/// `ℰ_q` over `<μ>_[0,N-q)` on the `2^-q` direction grid, compared between
/// neighbouring grid directions, including the step that closes the circle.
pub fn continuity_records(member: &Member, q: u32) -> Result<Vec<ContinuityRecord>> {
    let mu = &member.measure;
    if mu.dim() != 2 {
        return Err(LabError::UnsupportedDimension(mu.dim()));
    }
    let scn = measure_scenery(mu, 0, mu.depth() - q, q)?;
    let mut profile = projection_profile(&scn, q)?;
    // ℰ_q(v + π) on the far side of the half-circle grid
    let closing = Direction::new(std::f64::consts::PI)?;
    profile.push((closing.theta(), expected_projected_entropy(&scn, closing, q)?));
    Ok(profile
        .windows(2)
        .map(|w| {
            let (a, b) = (Direction::new(w[0].0).unwrap(), Direction::new(w[1].0).unwrap());
            let difference = (w[0].1 - w[1].1).abs();
            ContinuityRecord {
                member: member.name.clone(),
                q,
                theta: w[0].0,
                theta_next: w[1].0,
                chord: a.chord(&b),
                difference,
                normalized: q as f64 * difference,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RichnessRecord {
    pub member: String,
    pub s: f64,
    pub q: u32,
    pub n_prime: u32,
    /// `max(s - H_{N'}(μ), 0) + EPSILON_FLOOR`, so `H_{N'}(μ) > s - ε`.
    pub epsilon: f64,
    /// Smallest `δ` at which `μ` is `s`-rich at `(N', q, δ)`.
    pub delta_min: Option<f64>,
    /// Largest `C'` with richness at `δ = √ε / C'`.
    pub c_prime_max: Option<f64>,
}

pub const EPSILON_FLOOR: f64 = 1e-3;

/// Richness of a measure carried by a regular set, at the largest `N'`.
pub fn richness_record(member: &Member, q: u32) -> Result<Option<RichnessRecord>> {
    let Some(s) = member.support_exponent else {
        return Ok(None);
    };
    let mu = &member.measure;
    let n = mu.depth() - q;
    if q >= n {
        return Ok(None);
    }
    let h = normalized_entropy(mu, n)?;
    let epsilon = (s - h).max(0.0) + EPSILON_FLOOR;
    let entropies = scenery_entropies(mu, n, q)?;
    let delta_min = minimal_rich_delta(&entropies, s);
    Ok(Some(RichnessRecord {
        member: member.name.clone(),
        s,
        q,
        n_prime: n,
        epsilon,
        delta_min,
        c_prime_max: delta_min.map(|d| epsilon.sqrt() / d),
    }))
}
