use super::projection::binned_entropy;
use crate::dyadic::{DyadicCube, DyadicMeasure, GridSet};
use crate::error::{LabError, Result};
use crate::regular::isqrt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Above `|A|^2` pair checks, scans sample pins instead of using all of them.
pub const EXHAUSTIVE_PAIR_BUDGET: u64 = 4_000_000_000;

const MAX_BITMAP_BITS: u64 = 1 << 34;

/// Distance bin `floor(|p - y| 2^N)` for grid points, computed exactly.
pub fn distance_bin(p: [u64; 2], y: [u64; 2]) -> u64 {
    let dx = p[0].abs_diff(y[0]);
    let dy = p[1].abs_diff(y[1]);
    isqrt(dx * dx + dy * dy)
}

struct Bitmap(Vec<u64>);

impl Bitmap {
    fn new(bits: u64) -> Self {
        Bitmap(vec![0; (bits / 64 + 1) as usize])
    }

    fn set(&mut self, i: u64) {
        self.0[(i / 64) as usize] |= 1 << (i % 64);
    }

    fn count(&self) -> u64 {
        self.0.iter().map(|w| w.count_ones() as u64).sum()
    }

    fn or(mut self, other: Bitmap) -> Bitmap {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a |= b;
        }
        self
    }
}

fn max_bin(scale: u32) -> u64 {
    // sqrt(2) (2^N - 1) rounded up, plus slack
    isqrt(2 * ((1u64 << scale) - 1).pow(2)) + 2
}

fn check_bitmap(scale: u32) -> Result<u64> {
    let bits = max_bin(scale);
    if bits > MAX_BITMAP_BITS {
        return Err(LabError::invalid(format!("scale {scale} too fine for distance bitmaps")));
    }
    Ok(bits)
}

fn count_from(pin: [u64; 2], set: &GridSet, bits: u64) -> u64 {
    if (set.len() as u64) * 8 < bits {
        let mut v: Vec<u64> = set.points().iter().map(|&y| distance_bin(pin, y)).collect();
        v.sort_unstable();
        v.dedup();
        return v.len() as u64;
    }
    let mut map = Bitmap::new(bits);
    for &y in set.points() {
        map.set(distance_bin(pin, y));
    }
    map.count()
}

/// `N(dist(x, A), 2^-N)` for a grid pin `x`: distinct `floor(|x - y| 2^N)`.
pub fn pinned_distance_count(pin: [u64; 2], set: &GridSet) -> Result<u64> {
    let bits = check_bitmap(set.scale())?;
    let side = 1u64 << set.scale();
    if pin[0] >= side || pin[1] >= side || (set.dim() == 1 && pin[1] != 0) {
        return Err(LabError::invalid(format!("pin {pin:?} outside the grid")));
    }
    Ok(count_from(pin, set, bits))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PinPolicy {
    All,
    Sample { n: usize, seed: u64 },
    /// All pins within the pair budget, otherwise a seeded sample.
    Auto { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinRecord {
    pub index: usize,
    pub point: [u64; 2],
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinnedScan {
    pub scale: u32,
    pub t: f64,
    /// Pins with count below `2^{tN}` are exceptional.
    pub threshold: f64,
    pub pins_scanned: usize,
    pub exceptional: usize,
    pub exceptional_fraction: f64,
    pub sampled: bool,
    pub seed: Option<u64>,
    /// Pinned count -> number of pins with that count.
    pub histogram: BTreeMap<u64, u64>,
    pub per_pin: Vec<PinRecord>,
}

impl PinnedScan {
    pub fn max_count(&self) -> u64 {
        self.per_pin.iter().map(|p| p.count).max().unwrap_or(0)
    }

    pub fn min_count(&self) -> u64 {
        self.per_pin.iter().map(|p| p.count).min().unwrap_or(0)
    }
}

/// Indices of the pins a scan visits, plus whether they were sampled.
pub fn select_pins(len: usize, policy: PinPolicy) -> (Vec<usize>, bool, Option<u64>) {
    let sample = |n: usize, seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, len, n).into_vec();
        idx.sort_unstable();
        idx
    };
    match policy {
        PinPolicy::All => ((0..len).collect(), false, None),
        PinPolicy::Sample { n, seed } if n < len => (sample(n, seed), true, Some(seed)),
        PinPolicy::Sample { .. } => ((0..len).collect(), false, None),
        PinPolicy::Auto { seed } => {
            let pairs = (len as u64).saturating_mul(len as u64);
            if pairs <= EXHAUSTIVE_PAIR_BUDGET {
                ((0..len).collect(), false, None)
            } else {
                let n = (EXHAUSTIVE_PAIR_BUDGET / len as u64).max(1) as usize;
                (sample(n, seed), true, Some(seed))
            }
        }
    }
}

/// Counts pins of `A` whose pinned distance count is below `2^{tN}`.
pub fn pinned_scan(set: &GridSet, t: f64, policy: PinPolicy) -> Result<PinnedScan> {
    if !(t > 0.0 && t < 1.0) {
        return Err(LabError::invalid(format!("t = {t} outside (0,1)")));
    }
    let bits = check_bitmap(set.scale())?;
    let (pins, sampled, seed) = select_pins(set.len(), policy);
    let per_pin: Vec<PinRecord> = pins
        .par_iter()
        .map(|&i| {
            let point = set.points()[i];
            PinRecord {
                index: i,
                point,
                count: count_from(point, set, bits),
            }
        })
        .collect();
    let threshold = (t * set.scale() as f64).exp2();
    let mut histogram = BTreeMap::new();
    let mut exceptional = 0;
    for p in &per_pin {
        *histogram.entry(p.count).or_insert(0) += 1;
        if (p.count as f64) < threshold {
            exceptional += 1;
        }
    }
    Ok(PinnedScan {
        scale: set.scale(),
        t,
        threshold,
        pins_scanned: per_pin.len(),
        exceptional,
        exceptional_fraction: exceptional as f64 / per_pin.len() as f64,
        sampled,
        seed,
        histogram,
        per_pin,
    })
}

/// `N(dist(A, B), 2^-N)`: distinct `floor(|x - y| 2^N)` over `A × B`.
pub fn distance_set_count(a: &GridSet, b: &GridSet) -> Result<u64> {
    if a.scale() != b.scale() {
        return Err(LabError::ScaleMismatch(a.scale(), b.scale()));
    }
    if a.dim() != b.dim() {
        return Err(LabError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let bits = check_bitmap(a.scale())?;
    let map = a
        .points()
        .par_iter()
        .fold(
            || Bitmap::new(bits),
            |mut m, &x| {
                for &y in b.points() {
                    m.set(distance_bin(x, y));
                }
                m
            },
        )
        .reduce(|| Bitmap::new(bits), Bitmap::or);
    Ok(map.count())
}

/// `H_{N'}(φ_x μ)` for `φ_x(y) = |x - y| / 2`, with cell masses at cell centers.
///
/// `x` may lie outside the unit square.
pub fn half_distance_entropy(x: &[f64], mu: &DyadicMeasure, n_prime: u32) -> Result<f64> {
    if mu.dim() != x.len() {
        return Err(LabError::DimensionMismatch {
            expected: mu.dim(),
            got: x.len(),
        });
    }
    if n_prime == 0 || n_prime > mu.depth() {
        return Err(LabError::ResolutionExceeded {
            requested: n_prime,
            depth: mu.depth(),
        });
    }
    let scale = (n_prime as f64).exp2();
    let depth = mu.depth();
    let dim = mu.dim();
    let h = binned_entropy(mu.cells().iter().map(|&(code, m)| {
        let c = DyadicCube::from_code(dim, depth, code).expect("valid code").center();
        let r = (0..dim).map(|i| (x[i] - c[i]).powi(2)).sum::<f64>().sqrt();
        ((0.5 * r * scale).floor() as i64, m)
    }));
    Ok(h / n_prime as f64)
}
