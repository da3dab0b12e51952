//! Generators for discrete Ahlfors-regular sets, set/measure conversions and
//! the regularity-constant verifier.
//!
//! A set `A` at scale `2^-N` is discrete `(s, C)`-regular when
//! `C^-1 2^((N-k)s) <= |B(x, 2^-k) ∩ A| <= C 2^((N-k)s)` for every `x` in `A`
//! and every `k` in `0..N`. Balls are closed and Euclidean; in grid units the
//! radius is `2^(N-k)` and all comparisons are exact integer arithmetic.

use crate::boxdim::linear_fit;
use crate::dyadic::{check_dim, DyadicMeasure, GridSet};
use crate::error::{LabError, Result};
use crate::morton;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Hard cap on generated set sizes.
pub const MAX_GENERATED_POINTS: usize = 1 << 26;

/// Pins above this count are sampled by the verifier.
pub const DEFAULT_SAMPLE_THRESHOLD: usize = 200_000;

#[inline]
pub(crate) fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r.checked_mul(r).is_none_or(|v| v > n) {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|v| v <= n) {
        r += 1;
    }
    r
}

/// Self-similar pattern: keep `kept` among the `(2^b)^d` sub-cells at every
/// one of `levels` block levels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub dim: usize,
    pub block_depth: u32,
    pub kept: Vec<[u64; 2]>,
    pub levels: u32,
}

impl PatternSpec {
    pub fn new(dim: usize, block_depth: u32, kept: Vec<[u64; 2]>, levels: u32) -> Result<Self> {
        let spec = PatternSpec {
            dim,
            block_depth,
            kept,
            levels,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        if self.kept.is_empty() {
            return Err(LabError::EmptyPattern);
        }
        if self.block_depth == 0 || self.levels == 0 {
            return Err(LabError::invalid("block depth and levels must be positive"));
        }
        if self.depth() > crate::dyadic::max_depth(self.dim) {
            return Err(LabError::DepthExhausted {
                requested: self.depth(),
                available: crate::dyadic::max_depth(self.dim),
            });
        }
        let side = 1u64 << self.block_depth;
        let mut seen = std::collections::HashSet::new();
        for c in &self.kept {
            if c[0] >= side || (self.dim == 2 && c[1] >= side) || (self.dim == 1 && c[1] != 0) {
                return Err(LabError::invalid(format!("pattern cell {c:?} out of range")));
            }
            if !seen.insert(*c) {
                return Err(LabError::invalid(format!("pattern cell {c:?} repeated")));
            }
        }
        Ok(())
    }

    /// The 3-quadrant pattern `{(0,0), (1,0), (0,1)}`, `s = log2 3`.
    pub fn three_quadrant(levels: u32) -> Self {
        PatternSpec {
            dim: 2,
            block_depth: 1,
            kept: vec![[0, 0], [1, 0], [0, 1]],
            levels,
        }
    }

    pub fn full(dim: usize, levels: u32) -> Self {
        let kept = if dim == 1 {
            vec![[0, 0], [1, 0]]
        } else {
            vec![[0, 0], [1, 0], [0, 1], [1, 1]]
        };
        PatternSpec {
            dim,
            block_depth: 1,
            kept,
            levels,
        }
    }

    /// Middle-half Cantor set in `[0,1)`: keep quarters 0 and 3, `s = 1/2`.
    pub fn middle_half_cantor(levels: u32) -> Self {
        PatternSpec {
            dim: 1,
            block_depth: 2,
            kept: vec![[0, 0], [3, 0]],
            levels,
        }
    }

    pub fn depth(&self) -> u32 {
        self.block_depth * self.levels
    }

    /// `log2(|kept|) / b`.
    pub fn implied_dimension(&self) -> f64 {
        (self.kept.len() as f64).log2() / self.block_depth as f64
    }
}

pub fn generate_pattern_set(spec: &PatternSpec) -> Result<GridSet> {
    spec.validate()?;
    let total = (spec.kept.len() as f64).powi(spec.levels as i32);
    if total > MAX_GENERATED_POINTS as f64 {
        return Err(LabError::invalid(format!(
            "pattern would produce {total} points (cap {MAX_GENERATED_POINTS})"
        )));
    }
    let b = spec.block_depth;
    let mut points = vec![[0u64, 0u64]];
    for _ in 0..spec.levels {
        let mut next = Vec::with_capacity(points.len() * spec.kept.len());
        for p in &points {
            for c in &spec.kept {
                next.push([(p[0] << b) | c[0], (p[1] << b) | c[1]]);
            }
        }
        points = next;
    }
    GridSet::new(spec.dim, spec.depth(), points)
}

/// Product set `{i 2^(N/2)} x {j}` in grid units, `0 <= i < 2^(N/2) - 1`,
/// `0 <= j < 2^(N/2)`.
pub fn generate_katz_tao(scale: u32) -> Result<GridSet> {
    if !scale.is_multiple_of(2) {
        return Err(LabError::invalid(format!("Katz-Tao scale must be even, got {scale}")));
    }
    if scale < 4 {
        return Err(LabError::invalid("Katz-Tao scale must be at least 4"));
    }
    let half = 1u64 << (scale / 2);
    let points = (0..half - 1)
        .flat_map(|i| (0..half).map(move |j| [i * half, j]))
        .collect();
    GridSet::new(2, scale, points)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomRegularSpec {
    pub dim: usize,
    pub scale: u32,
    pub s: f64,
    pub c_target: f64,
    pub seed: u64,
}

/// Per-depth child counts: the product tracks `2^(sk)` inside `[C^-1, C]`.
fn steer_counts(spec: &RandomRegularSpec) -> Result<Vec<usize>> {
    let dim = spec.dim;
    let max_children = 1usize << dim;
    let mut branch = spec.s.exp2();
    if (branch - branch.round()).abs() < 1e-9 {
        branch = branch.round();
    }
    let lo = (branch.floor() as usize).clamp(1, max_children);
    let hi = (branch.ceil() as usize).clamp(1, max_children);
    let mut candidates = vec![lo];
    if hi != lo {
        candidates.push(hi);
    }
    let mut cumulative = 1.0f64;
    let mut counts = Vec::with_capacity(spec.scale as usize);
    for k in 0..spec.scale {
        let target = (spec.s * (k + 1) as f64).exp2();
        let ratios: Vec<f64> = candidates
            .iter()
            .map(|&c| cumulative * c as f64 / target)
            .collect();
        let best = candidates
            .iter()
            .zip(&ratios)
            .filter(|(_, &r)| r >= 1.0 / spec.c_target && r <= spec.c_target)
            .min_by(|a, b| a.1.log2().abs().partial_cmp(&b.1.log2().abs()).unwrap());
        match best {
            Some((&c, _)) => {
                counts.push(c);
                cumulative *= c as f64;
            }
            None => {
                return Err(LabError::GenerationInfeasible {
                    depth: k + 1,
                    target,
                    candidates: ratios,
                    band: spec.c_target,
                })
            }
        }
    }
    Ok(counts)
}

/// Top-down random subdivision. Every node at depth `k` keeps the same
/// number of children, chosen so the cumulative count stays in the band
/// `[C^-1 2^(sk), C 2^(sk)]` and moves the ratio toward 1; which children
/// are kept is uniformly random per node. Deterministic in the seed.
pub fn generate_random_regular(spec: &RandomRegularSpec) -> Result<GridSet> {
    check_dim(spec.dim)?;
    if !(spec.s > 0.0 && spec.s <= spec.dim as f64) {
        return Err(LabError::invalid(format!(
            "exponent {} outside (0, {}]",
            spec.s, spec.dim
        )));
    }
    if !(spec.c_target > 1.0) {
        return Err(LabError::invalid("target constant must exceed 1"));
    }
    if spec.scale == 0 || spec.scale > crate::dyadic::max_depth(spec.dim) {
        return Err(LabError::invalid(format!("unsupported scale {}", spec.scale)));
    }
    let counts = steer_counts(spec)?;
    let total: f64 = counts.iter().map(|&c| c as f64).product();
    if total > MAX_GENERATED_POINTS as f64 {
        return Err(LabError::invalid(format!(
            "random set would have {total} points (cap {MAX_GENERATED_POINTS})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let children = 1usize << spec.dim;
    let mut nodes = vec![[0u64, 0u64]];
    for &c in &counts {
        let mut next = Vec::with_capacity(nodes.len() * c);
        for p in &nodes {
            let mut picks = sample(&mut rng, children, c).into_vec();
            picks.sort_unstable();
            for ci in picks {
                let ci = ci as u64;
                if spec.dim == 1 {
                    next.push([(p[0] << 1) | ci, 0]);
                } else {
                    next.push([(p[0] << 1) | (ci & 1), (p[1] << 1) | (ci >> 1)]);
                }
            }
        }
        nodes = next;
    }
    GridSet::new(spec.dim, spec.scale, nodes)
}

/// `mu^A`: mass `1/|A|` on every occupied depth-`N` cell.
pub fn set_to_measure(set: &GridSet) -> DyadicMeasure {
    let m = 1.0 / set.len() as f64;
    let mut cells: Vec<(u64, f64)> = set
        .points()
        .iter()
        .map(|&p| (morton::encode(set.dim(), p), m))
        .collect();
    cells.sort_by_key(|c| c.0);
    DyadicMeasure::from_sorted_unchecked(set.dim(), set.scale(), cells)
}

/// `A^mu`: left endpoints of the positive-mass depth-`N` cells.
pub fn measure_to_set(mu: &DyadicMeasure) -> Result<GridSet> {
    let points = mu
        .cells()
        .iter()
        .map(|&(code, _)| morton::decode(mu.dim(), code))
        .collect();
    GridSet::new(mu.dim(), mu.depth(), points)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    Fixed(f64),
    /// Least squares on `(k, log2 mean count)`.
    Fit,
}

#[derive(Clone, Debug)]
pub struct VerifierOptions {
    pub sample_threshold: usize,
    pub seed: u64,
}

impl Default for VerifierOptions {
    fn default() -> Self {
        VerifierOptions {
            sample_threshold: DEFAULT_SAMPLE_THRESHOLD,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub k: u32,
    pub expected: f64,
    pub min_count: u64,
    pub max_count: u64,
    pub mean_count: f64,
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: [u64; 2],
    pub k: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub s: f64,
    #[serde(rename = "C_star")]
    pub c_star: f64,
    pub worst: Witness,
    pub per_k: Vec<ScaleRow>,
    pub sampled: bool,
    pub pins: usize,
    pub seed: u64,
}

/// Closed Euclidean ball counts over a grid set.
pub struct BallCounter {
    dim: usize,
    side: u64,
    /// d = 1: sorted x coordinates.
    line: Vec<u64>,
    /// d = 2: nonempty row ids with their sorted x coordinates.
    rows: Vec<u64>,
    row_xs: Vec<Vec<u64>>,
    /// Dense prefix counts per nonempty row, when small enough.
    prefix: Option<Vec<Vec<u32>>>,
}

/// Upper bound on dense prefix entries (u32) kept by [`BallCounter`].
const DENSE_PREFIX_LIMIT: u64 = 1 << 24;

impl BallCounter {
    pub fn new(set: &GridSet) -> Self {
        let side = 1u64 << set.scale();
        if set.dim() == 1 {
            let mut line: Vec<u64> = set.points().iter().map(|p| p[0]).collect();
            line.sort_unstable();
            return BallCounter {
                dim: 1,
                side,
                line,
                rows: Vec::new(),
                row_xs: Vec::new(),
                prefix: None,
            };
        }
        let mut pts: Vec<[u64; 2]> = set.points().to_vec();
        pts.sort_unstable_by_key(|p| (p[1], p[0]));
        let mut rows = Vec::new();
        let mut row_xs: Vec<Vec<u64>> = Vec::new();
        for p in pts {
            if rows.last() != Some(&p[1]) {
                rows.push(p[1]);
                row_xs.push(Vec::new());
            }
            row_xs.last_mut().unwrap().push(p[0]);
        }
        let prefix = if (rows.len() as u64) * (side + 1) <= DENSE_PREFIX_LIMIT {
            Some(
                row_xs
                    .iter()
                    .map(|xs| {
                        let mut pre = vec![0u32; side as usize + 1];
                        for &x in xs {
                            pre[x as usize + 1] += 1;
                        }
                        for i in 1..pre.len() {
                            pre[i] += pre[i - 1];
                        }
                        pre
                    })
                    .collect(),
            )
        } else {
            None
        };
        BallCounter {
            dim: 2,
            side,
            line: Vec::new(),
            rows,
            row_xs,
            prefix,
        }
    }

    #[inline]
    fn count_sorted(xs: &[u64], lo: u64, hi: u64) -> u64 {
        let a = xs.partition_point(|&x| x < lo);
        let b = xs.partition_point(|&x| x <= hi);
        (b - a) as u64
    }

    /// `|{y : |x - y| <= r}|` in grid units.
    pub fn count(&self, x: [u64; 2], r: u64) -> u64 {
        if self.dim == 1 {
            return Self::count_sorted(&self.line, x[0].saturating_sub(r), x[0] + r);
        }
        let r2 = r * r;
        let lo_row = self.rows.partition_point(|&y| y < x[1].saturating_sub(r));
        let hi_row = self.rows.partition_point(|&y| y <= x[1] + r);
        let mut total = 0u64;
        for i in lo_row..hi_row {
            let dy = self.rows[i].abs_diff(x[1]);
            let w = isqrt(r2 - dy * dy);
            let lo = x[0].saturating_sub(w);
            let hi = (x[0] + w).min(self.side - 1);
            total += match &self.prefix {
                Some(pre) => (pre[i][hi as usize + 1] - pre[i][lo as usize]) as u64,
                None => Self::count_sorted(&self.row_xs[i], lo, hi),
            };
        }
        total
    }
}

/// Pins examined by the verifier: all points, or a seeded sample.
fn verifier_pins(set: &GridSet, opts: &VerifierOptions) -> (Vec<[u64; 2]>, bool) {
    if set.len() <= opts.sample_threshold {
        (set.points().to_vec(), false)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut idx = sample(&mut rng, set.len(), opts.sample_threshold).into_vec();
        idx.sort_unstable();
        (idx.into_iter().map(|i| set.points()[i]).collect(), true)
    }
}

pub fn regularity_constant(set: &GridSet, exponent: Exponent) -> Result<RegularityReport> {
    regularity_constant_with(set, exponent, &VerifierOptions::default())
}

pub fn regularity_constant_with(
    set: &GridSet,
    exponent: Exponent,
    opts: &VerifierOptions,
) -> Result<RegularityReport> {
    let n = set.scale();
    if n == 0 {
        return Err(LabError::invalid("regularity needs scale >= 1"));
    }
    let counter = BallCounter::new(set);
    let (pins, sampled) = verifier_pins(set, opts);
    let counts: Vec<Vec<u64>> = pins
        .par_iter()
        .map(|&p| (0..n).map(|k| counter.count(p, 1u64 << (n - k))).collect())
        .collect();
    let per_pin: Vec<(&[u64; 2], &Vec<u64>)> = pins.iter().zip(&counts).collect();
    let s = match exponent {
        Exponent::Fixed(s) => s,
        Exponent::Fit => fit_exponent(n, &counts)?,
    };
    Ok(summarize(n, s, &per_pin, sampled, opts.seed))
}

pub(crate) fn fit_exponent(n: u32, counts: &[Vec<u64>]) -> Result<f64> {
    let means: Vec<f64> = (0..n as usize)
        .map(|k| counts.iter().map(|c| c[k] as f64).sum::<f64>() / counts.len() as f64)
        .collect();
    let mut ks: Vec<u32> = (2..=n.saturating_sub(2)).collect();
    if ks.len() < 2 {
        ks = (0..n).collect();
    }
    if ks.len() < 2 {
        return Err(LabError::invalid("exponent fit needs scale >= 2"));
    }
    let xs: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let ys: Vec<f64> = ks.iter().map(|&k| means[k as usize].log2()).collect();
    Ok(-linear_fit(&xs, &ys)?.slope)
}

/// Per-scale extremes and the minimal constant, from per-pin count rows.
pub(crate) fn summarize(
    n: u32,
    s: f64,
    per_pin: &[(&[u64; 2], &Vec<u64>)],
    sampled: bool,
    seed: u64,
) -> RegularityReport {
    let mut per_k = Vec::with_capacity(n as usize);
    let mut c_star = 0.0f64;
    let mut worst = Witness {
        point: *per_pin[0].0,
        k: 0,
    };
    for k in 0..n {
        let ki = k as usize;
        let expected = ((n - k) as f64 * s).exp2();
        let (mut min_c, mut max_c) = (u64::MAX, 0u64);
        let (mut min_p, mut max_p) = (per_pin[0].0, per_pin[0].0);
        let mut sum = 0.0;
        for &(p, c) in per_pin {
            let v = c[ki];
            sum += v as f64;
            if v < min_c {
                min_c = v;
                min_p = p;
            }
            if v > max_c {
                max_c = v;
                max_p = p;
            }
        }
        let up = max_c as f64 / expected;
        let down = expected / min_c as f64;
        let constant = up.max(down);
        if constant > c_star {
            c_star = constant;
            worst = Witness {
                point: if up >= down { *max_p } else { *min_p },
                k,
            };
        }
        per_k.push(ScaleRow {
            k,
            expected,
            min_count: min_c,
            max_count: max_c,
            mean_count: sum / per_pin.len() as f64,
            constant,
        });
    }
    RegularityReport {
        s,
        c_star,
        worst,
        per_k,
        sampled,
        pins: per_pin.len(),
        seed,
    }
}
