//! Dyadic cells, the dyadic metric, dyadic measures and grid sets.
//!
//! Depth-`N` measures are stored as sorted `(code, mass)` pairs, where `code`
//! is the Z-order code of the cell (see [`crate::morton`]). Every coarser
//! cell owns a contiguous run of codes, so aggregation, restriction and
//! zooming are slice operations.

use crate::error::{LabError, Result};
use crate::morton;
use serde::{Deserialize, Serialize};

/// Tolerance on the total mass of a measure read from outside.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Deepest supported level for dimension `dim`.
pub fn max_depth(dim: usize) -> u32 {
    if dim == 1 {
        62
    } else {
        31
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(LabError::UnsupportedDimension(dim))
    }
}

fn check_point(x: &[f64]) -> Result<()> {
    check_dim(x.len())?;
    for (axis, &v) in x.iter().enumerate() {
        if !(0.0..1.0).contains(&v) {
            return Err(LabError::Domain { axis, value: v });
        }
    }
    Ok(())
}

/// Half-open dyadic cube `[j_1 2^-k, (j_1+1) 2^-k) x ...` of depth `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    dim: usize,
    depth: u32,
    index: [u64; 2],
}

impl DyadicCube {
    pub fn new(dim: usize, depth: u32, index: [u64; 2]) -> Result<Self> {
        check_dim(dim)?;
        if depth > max_depth(dim) {
            return Err(LabError::DepthExhausted {
                requested: depth,
                available: max_depth(dim),
            });
        }
        let side = 1u64 << depth;
        for (axis, &j) in index.iter().enumerate().take(dim) {
            if j >= side {
                return Err(LabError::invalid(format!(
                    "index {j} on axis {axis} out of range for depth {depth}"
                )));
            }
        }
        if dim == 1 && index[1] != 0 {
            return Err(LabError::invalid("second index must be 0 in dimension 1"));
        }
        Ok(DyadicCube { dim, depth, index })
    }

    pub fn from_code(dim: usize, depth: u32, code: u64) -> Result<Self> {
        DyadicCube::new(dim, depth, morton::decode(dim, code))
    }

    pub fn root(dim: usize) -> Self {
        DyadicCube {
            dim,
            depth: 0,
            index: [0, 0],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn index(&self) -> [u64; 2] {
        self.index
    }

    pub fn code(&self) -> u64 {
        morton::encode(self.dim, self.index)
    }

    pub fn side(&self) -> f64 {
        (-(self.depth as f64)).exp2()
    }

    /// Left endpoint (lower-left corner).
    pub fn corner(&self) -> [f64; 2] {
        let s = self.side();
        [self.index[0] as f64 * s, self.index[1] as f64 * s]
    }

    pub fn center(&self) -> [f64; 2] {
        let s = self.side();
        let c = [(self.index[0] as f64 + 0.5) * s, (self.index[1] as f64 + 0.5) * s];
        if self.dim == 1 {
            [c[0], 0.0]
        } else {
            c
        }
    }

    /// Whether `other` (same dimension, depth >= self.depth) lies inside this cube.
    pub fn contains(&self, other: &DyadicCube) -> bool {
        if other.dim != self.dim || other.depth < self.depth {
            return false;
        }
        let shift = self.dim as u32 * (other.depth - self.depth);
        (other.code() >> shift) == self.code()
    }

    /// Depth-`k` ancestor, `k <= depth`.
    pub fn ancestor(&self, k: u32) -> DyadicCube {
        let shift = self.depth - k.min(self.depth);
        DyadicCube {
            dim: self.dim,
            depth: self.depth - shift,
            index: [self.index[0] >> shift, self.index[1] >> shift],
        }
    }
}

/// `D_k(x)`: the depth-`k` cell containing `x`.
pub fn cell_of(x: &[f64], k: u32) -> Result<DyadicCube> {
    check_point(x)?;
    let dim = x.len();
    if k > max_depth(dim) {
        return Err(LabError::DepthExhausted {
            requested: k,
            available: max_depth(dim),
        });
    }
    let scale = (k as f64).exp2();
    let mut index = [0u64; 2];
    for (i, &v) in x.iter().enumerate() {
        index[i] = (v * scale).floor() as u64;
    }
    DyadicCube::new(dim, k, index)
}

/// Dyadic metric `2^-l`, with `l` the deepest level at which `x` and `y`
/// share a cell. Zero on the diagonal.
pub fn dyadic_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    check_point(x)?;
    check_point(y)?;
    if x.len() != y.len() {
        return Err(LabError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x == y {
        return Ok(0.0);
    }
    // Walk binary digits with the doubling map; both sides stay exact in f64.
    let mut a = [0.0f64; 2];
    let mut b = [0.0f64; 2];
    a[..x.len()].copy_from_slice(x);
    b[..y.len()].copy_from_slice(y);
    let mut level: i32 = 0;
    loop {
        let mut differ = false;
        for i in 0..x.len() {
            a[i] *= 2.0;
            b[i] *= 2.0;
            let (da, db) = (a[i].floor(), b[i].floor());
            differ |= da != db;
            a[i] -= da;
            b[i] -= db;
        }
        if differ {
            return Ok((-(level as f64)).exp2());
        }
        level += 1;
    }
}

/// The doubling map `S(x) = 2x mod 1`, coordinatewise.
pub fn doubling_map(x: &[f64]) -> Result<Vec<f64>> {
    check_point(x)?;
    Ok(x.iter()
        .map(|&v| {
            let w = 2.0 * v;
            w - w.floor()
        })
        .collect())
}

/// Probability measure on the depth-`N` dyadic cells of `[0,1)^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicMeasure {
    dim: usize,
    depth: u32,
    cells: Vec<(u64, f64)>,
}

impl DyadicMeasure {
    /// Builds a measure from `(code, mass)` pairs whose masses already sum to 1
    /// (within [`MASS_TOLERANCE`]). Zero masses are dropped.
    pub fn from_masses<I>(dim: usize, depth: u32, masses: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, f64)>,
    {
        let m = Self::build(dim, depth, masses)?;
        let total = m.raw_total();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(LabError::invalid(format!(
                "total mass {total} differs from 1 by more than {MASS_TOLERANCE}"
            )));
        }
        Ok(m.renormalized(total))
    }

    /// Builds a measure from nonnegative weights and normalizes them.
    pub fn from_weights<I>(dim: usize, depth: u32, weights: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, f64)>,
    {
        let m = Self::build(dim, depth, weights)?;
        let total = m.raw_total();
        if total <= 0.0 {
            return Err(LabError::EmptyRestriction);
        }
        Ok(m.renormalized(total))
    }

    fn build<I>(dim: usize, depth: u32, masses: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, f64)>,
    {
        check_dim(dim)?;
        if depth > max_depth(dim) {
            return Err(LabError::DepthExhausted {
                requested: depth,
                available: max_depth(dim),
            });
        }
        let limit = 1u128 << (dim as u32 * depth);
        let mut cells = Vec::new();
        for (code, mass) in masses {
            if (code as u128) >= limit {
                return Err(LabError::invalid(format!(
                    "cell code {code} out of range for depth {depth}"
                )));
            }
            if !mass.is_finite() || mass < 0.0 {
                return Err(LabError::invalid(format!("invalid mass {mass}")));
            }
            if mass > 0.0 {
                cells.push((code, mass));
            }
        }
        cells.sort_by_key(|c| c.0);
        if let Some(w) = cells.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(LabError::invalid(format!("duplicate cell code {}", w[0].0)));
        }
        Ok(DyadicMeasure { dim, depth, cells })
    }

    fn raw_total(&self) -> f64 {
        self.cells.iter().map(|c| c.1).sum()
    }

    fn renormalized(mut self, total: f64) -> Self {
        for c in &mut self.cells {
            c.1 /= total;
        }
        self
    }

    /// Sorted cells are assumed; masses are renormalized by their exact total.
    pub(crate) fn from_sorted_unchecked(dim: usize, depth: u32, cells: Vec<(u64, f64)>) -> Self {
        let m = DyadicMeasure { dim, depth, cells };
        let total = m.raw_total();
        m.renormalized(total)
    }

    /// Lebesgue measure discretized at depth `depth`.
    pub fn uniform(dim: usize, depth: u32) -> Result<Self> {
        check_dim(dim)?;
        let n = 1u64 << (dim as u32 * depth);
        let m = 1.0 / n as f64;
        Self::from_weights(dim, depth, (0..n).map(|c| (c, m)))
    }

    /// All mass in a single depth-`cube.depth()` cell.
    pub fn point_mass(cube: &DyadicCube) -> Self {
        DyadicMeasure {
            dim: cube.dim(),
            depth: cube.depth(),
            cells: vec![(cube.code(), 1.0)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Positive-mass cells, sorted by code.
    pub fn cells(&self) -> &[(u64, f64)] {
        &self.cells
    }

    pub fn support_size(&self) -> usize {
        self.cells.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.raw_total()
    }

    fn shift_to(&self, k: u32) -> u32 {
        self.dim as u32 * (self.depth - k)
    }

    /// Cells (at depth `N`) inside `cube`.
    pub fn cells_in(&self, cube: &DyadicCube) -> &[(u64, f64)] {
        debug_assert!(cube.depth() <= self.depth);
        let shift = self.shift_to(cube.depth());
        let lo = cube.code() << shift;
        let hi = (cube.code() as u128 + 1) << shift;
        let a = self.cells.partition_point(|c| c.0 < lo);
        let b = self.cells.partition_point(|c| (c.0 as u128) < hi);
        &self.cells[a..b]
    }

    pub fn mass_of(&self, cube: &DyadicCube) -> f64 {
        if cube.dim() != self.dim || cube.depth() > self.depth {
            return 0.0;
        }
        self.cells_in(cube).iter().map(|c| c.1).sum()
    }

    /// Masses of the depth-`k` cells, `k <= N`, as sorted `(code, mass)`.
    pub fn aggregate(&self, k: u32) -> Result<Vec<(u64, f64)>> {
        if k > self.depth {
            return Err(LabError::ResolutionExceeded {
                requested: k,
                depth: self.depth,
            });
        }
        Ok(group_runs(&self.cells, self.shift_to(k), 0))
    }

    /// `mu^Q` truncated to `q` levels: the normalized restriction to `cube`,
    /// rescaled to the unit cube and aggregated to depth `q`.
    pub fn view(&self, cube: &DyadicCube, q: u32) -> Result<DyadicMeasure> {
        if cube.dim() != self.dim {
            return Err(LabError::DimensionMismatch {
                expected: self.dim,
                got: cube.dim(),
            });
        }
        if cube.depth() + q > self.depth {
            return Err(LabError::DepthExhausted {
                requested: cube.depth() + q,
                available: self.depth,
            });
        }
        let inside = self.cells_in(cube);
        if inside.is_empty() {
            return Err(LabError::NotInSupport {
                depth: cube.depth(),
            });
        }
        let base = cube.code() << self.shift_to(cube.depth());
        let shift = self.dim as u32 * (self.depth - cube.depth() - q);
        let cells = group_runs(inside, shift, base);
        Ok(DyadicMeasure::from_sorted_unchecked(self.dim, q, cells))
    }

    /// Same as [`view`](Self::view) but for a cell given by its depth and code,
    /// skipping index decoding.
    pub(crate) fn view_code(&self, depth: u32, code: u64, q: u32) -> DyadicMeasure {
        let shift_q = self.shift_to(depth);
        let lo = code << shift_q;
        let hi = (code as u128 + 1) << shift_q;
        let a = self.cells.partition_point(|c| c.0 < lo);
        let b = self.cells.partition_point(|c| (c.0 as u128) < hi);
        let shift = self.dim as u32 * (self.depth - depth - q);
        let cells = group_runs(&self.cells[a..b], shift, lo);
        DyadicMeasure::from_sorted_unchecked(self.dim, q, cells)
    }

    /// Normalized restriction to the union of `cubes`.
    pub fn restrict_normalize(&self, cubes: &[DyadicCube]) -> Result<DyadicMeasure> {
        let mut ranges = Vec::with_capacity(cubes.len());
        for c in cubes {
            if c.dim() != self.dim {
                return Err(LabError::DimensionMismatch {
                    expected: self.dim,
                    got: c.dim(),
                });
            }
            if c.depth() > self.depth {
                return Err(LabError::ResolutionExceeded {
                    requested: c.depth(),
                    depth: self.depth,
                });
            }
            let shift = self.shift_to(c.depth());
            ranges.push((
                (c.code() as u128) << shift,
                (c.code() as u128 + 1) << shift,
            ));
        }
        ranges.sort();
        let mut merged: Vec<(u128, u128)> = Vec::with_capacity(ranges.len());
        for r in ranges {
            match merged.last_mut() {
                Some(last) if r.0 <= last.1 => last.1 = last.1.max(r.1),
                _ => merged.push(r),
            }
        }
        let kept: Vec<(u64, f64)> = self
            .cells
            .iter()
            .copied()
            .filter(|&(code, _)| {
                let i = merged.partition_point(|r| r.0 <= code as u128);
                i > 0 && (code as u128) < merged[i - 1].1
            })
            .collect();
        let total: f64 = kept.iter().map(|c| c.1).sum();
        if kept.is_empty() || total <= 0.0 {
            return Err(LabError::EmptyRestriction);
        }
        Ok(DyadicMeasure {
            dim: self.dim,
            depth: self.depth,
            cells: kept,
        }
        .renormalized(total))
    }

    /// `mu^{x,n}`: zoom into `D_n(x)` and rescale back to the unit cube.
    pub fn minicube(&self, x: &[f64], n: u32) -> Result<DyadicMeasure> {
        if x.len() != self.dim {
            return Err(LabError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if n >= self.depth {
            return Err(LabError::DepthExhausted {
                requested: n,
                available: self.depth.saturating_sub(1),
            });
        }
        let cube = cell_of(x, n)?;
        self.view(&cube, self.depth - n)
    }

    /// Positive-mass cells as cubes, with their masses.
    pub fn support(&self) -> impl Iterator<Item = (DyadicCube, f64)> + '_ {
        self.cells.iter().map(move |&(code, m)| {
            (
                DyadicCube {
                    dim: self.dim,
                    depth: self.depth,
                    index: morton::decode(self.dim, code),
                },
                m,
            )
        })
    }
}

/// Sums consecutive runs of `(code - base) >> shift` in a sorted slice.
fn group_runs(cells: &[(u64, f64)], shift: u32, base: u64) -> Vec<(u64, f64)> {
    let mut out: Vec<(u64, f64)> = Vec::new();
    for &(code, m) in cells {
        let key = if shift >= 64 { 0 } else { (code - base) >> shift };
        match out.last_mut() {
            Some(last) if last.0 == key => last.1 += m,
            _ => out.push((key, m)),
        }
    }
    out
}

/// Free-function form of [`DyadicMeasure::restrict_normalize`].
pub fn restrict_normalize(mu: &DyadicMeasure, cubes: &[DyadicCube]) -> Result<DyadicMeasure> {
    mu.restrict_normalize(cubes)
}

/// Free-function form of [`DyadicMeasure::minicube`].
pub fn minicube(mu: &DyadicMeasure, x: &[f64], n: u32) -> Result<DyadicMeasure> {
    mu.minicube(x, n)
}

/// Finite set of depth-`N` cells, identified with their left endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSet {
    dim: usize,
    scale: u32,
    points: Vec<[u64; 2]>,
}

impl GridSet {
    /// Points are integer indices in `[0, 2^scale)`; they are stored in
    /// Z-order. Duplicates are rejected.
    pub fn new(dim: usize, scale: u32, mut points: Vec<[u64; 2]>) -> Result<Self> {
        check_dim(dim)?;
        if scale > max_depth(dim) {
            return Err(LabError::DepthExhausted {
                requested: scale,
                available: max_depth(dim),
            });
        }
        if points.is_empty() {
            return Err(LabError::EmptySet);
        }
        let side = 1u64 << scale;
        for p in &points {
            if p[0] >= side || (dim == 2 && p[1] >= side) || (dim == 1 && p[1] != 0) {
                return Err(LabError::invalid(format!(
                    "point {p:?} outside the depth-{scale} grid"
                )));
            }
        }
        points.sort_by_key(|&p| morton::encode(dim, p));
        if let Some(w) = points.windows(2).find(|w| w[0] == w[1]) {
            return Err(LabError::invalid(format!("duplicate point {:?}", w[0])));
        }
        Ok(GridSet { dim, scale, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn points(&self) -> &[[u64; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: &[u64; 2]) -> bool {
        let code = morton::encode(self.dim, *p);
        self.points
            .binary_search_by_key(&code, |&q| morton::encode(self.dim, q))
            .is_ok()
    }

    /// Left endpoint of a point's cell in `[0,1)^d`.
    pub fn to_real(&self, p: &[u64; 2]) -> [f64; 2] {
        let s = (-(self.scale as f64)).exp2();
        [p[0] as f64 * s, p[1] as f64 * s]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_of_examples() {
        assert_eq!(cell_of(&[0.3, 0.7], 1).unwrap().index(), [0, 1]);
        assert_eq!(cell_of(&[0.0, 0.0], 5).unwrap().index(), [0, 0]);
        assert_eq!(cell_of(&[0.5, 0.5], 1).unwrap().index(), [1, 1]);
        assert!(matches!(
            cell_of(&[1.0, 0.2], 3),
            Err(LabError::Domain { axis: 0, .. })
        ));
        assert!(cell_of(&[-0.1], 3).is_err());
    }

    #[test]
    fn dyadic_distance_examples() {
        assert_eq!(dyadic_distance(&[0.49], &[0.51]).unwrap(), 1.0);
        assert_eq!(dyadic_distance(&[0.24], &[0.26]).unwrap(), 0.5);
        assert_eq!(dyadic_distance(&[0.3, 0.3], &[0.3, 0.3]).unwrap(), 0.0);
        // neighbouring tiny floats still resolve
        let a: f64 = 0.25;
        let b = f64::from_bits(a.to_bits() + 1);
        assert!(dyadic_distance(&[a], &[b]).unwrap() > 0.0);
    }

    #[test]
    fn restrict_examples() {
        let mu = DyadicMeasure::uniform(2, 3).unwrap();
        // left half = depth-1 cells (0,0) and (0,1)
        let left = [
            DyadicCube::new(2, 1, [0, 0]).unwrap(),
            DyadicCube::new(2, 1, [0, 1]).unwrap(),
        ];
        let r = mu.restrict_normalize(&left).unwrap();
        assert_eq!(r.support_size(), 32);
        assert!((r.total_mass() - 1.0).abs() < 1e-12);
        assert!(r.cells().iter().all(|c| (c.1 - 1.0 / 32.0).abs() < 1e-15));

        let root = [DyadicCube::root(2)];
        assert_eq!(mu.restrict_normalize(&root).unwrap(), mu);

        let m = DyadicMeasure::from_masses(2, 1, [(0, 0.5), (1, 0.25), (2, 0.25), (3, 0.0)])
            .unwrap();
        let r = m
            .restrict_normalize(&[
                DyadicCube::from_code(2, 1, 0).unwrap(),
                DyadicCube::from_code(2, 1, 1).unwrap(),
            ])
            .unwrap();
        assert_eq!(r.cells(), &[(0, 2.0 / 3.0), (1, 1.0 / 3.0)]);

        let z = m.restrict_normalize(&[DyadicCube::from_code(2, 1, 3).unwrap()]);
        assert!(matches!(z, Err(LabError::EmptyRestriction)));
    }

    #[test]
    fn minicube_uniform_and_identity() {
        let mu = DyadicMeasure::uniform(2, 5).unwrap();
        let v = mu.minicube(&[0.3, 0.9], 2).unwrap();
        assert_eq!(v, DyadicMeasure::uniform(2, 3).unwrap());
        assert_eq!(mu.minicube(&[0.3, 0.9], 0).unwrap(), mu);
        assert!(matches!(
            mu.minicube(&[0.3, 0.9], 5),
            Err(LabError::DepthExhausted { .. })
        ));
    }

    #[test]
    fn minicube_outside_support() {
        let m = DyadicMeasure::from_masses(1, 2, [(0, 0.5), (1, 0.5)]).unwrap();
        assert!(matches!(
            m.minicube(&[0.8], 1),
            Err(LabError::NotInSupport { depth: 1 })
        ));
    }

    #[test]
    fn masses_must_sum_to_one() {
        assert!(DyadicMeasure::from_masses(1, 1, [(0, 0.5), (1, 0.4)]).is_err());
        assert!(DyadicMeasure::from_masses(1, 1, [(0, 0.5), (0, 0.5)]).is_err());
        assert!(DyadicMeasure::from_masses(1, 1, [(2, 1.0)]).is_err());
    }

    #[test]
    fn grid_set_rejects_bad_points() {
        assert!(GridSet::new(2, 2, vec![]).is_err());
        assert!(GridSet::new(2, 2, vec![[4, 0]]).is_err());
        assert!(GridSet::new(2, 2, vec![[1, 1], [1, 1]]).is_err());
        let g = GridSet::new(2, 2, vec![[3, 1], [0, 0]]).unwrap();
        assert!(g.contains(&[3, 1]));
        assert!(!g.contains(&[1, 3]));
    }
}
