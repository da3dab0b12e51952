//! Sceneries: empirical distributions of zoomed-in views of a measure.
//!
//! A view `mu^Q` of a depth-`n` cell `Q` is truncated to `q_view` levels, so a
//! scenery over depths `[A, B)` needs `B <= N - q_view`. Identical truncated
//! views are merged; their masses are compared after rounding to `2^-40`.

use crate::dyadic::{cell_of, doubling_map, DyadicMeasure};
use crate::entropy::{normalized_entropy, shannon_entropy};
use crate::error::{LabError, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

const KEY_SCALE: f64 = (1u64 << 40) as f64;

/// Canonical hash key of a view: codes with quantized masses.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ViewKey(Vec<(u64, i64)>);

impl ViewKey {
    pub fn of(view: &DyadicMeasure) -> Self {
        ViewKey(
            view.cells()
                .iter()
                .map(|&(c, m)| (c, (m * KEY_SCALE).round() as i64))
                .collect(),
        )
    }

    /// Stable 64-bit digest (FNV-1a), used as the atom id in CSV output.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &(c, m) in &self.0 {
            for b in c.to_le_bytes().into_iter().chain(m.to_le_bytes()) {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub view: DyadicMeasure,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dim: usize,
    pub source_depth: u32,
    /// Depth window `[A, B)`.
    pub window: [u32; 2],
    /// Base point for point sceneries.
    pub pin: Option<Vec<f64>>,
    /// Share of the full depth range `[A, N)` left out of the window.
    pub tail_weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneryDistribution {
    q_view: u32,
    atoms: Vec<Atom>,
    provenance: Provenance,
}

#[derive(Default)]
struct Merger {
    index: HashMap<ViewKey, usize>,
    atoms: Vec<Atom>,
}

impl Merger {
    fn add(&mut self, view: DyadicMeasure, weight: f64) {
        self.add_keyed(ViewKey::of(&view), view, weight);
    }

    fn add_keyed(&mut self, key: ViewKey, view: DyadicMeasure, weight: f64) {
        match self.index.get(&key) {
            Some(&i) => self.atoms[i].weight += weight,
            None => {
                self.index.insert(key, self.atoms.len());
                self.atoms.push(Atom { view, weight });
            }
        }
    }

    fn finish(self) -> Vec<Atom> {
        let total: f64 = self.atoms.iter().map(|a| a.weight).sum();
        self.atoms
            .into_iter()
            .map(|a| Atom {
                weight: a.weight / total,
                view: a.view,
            })
            .collect()
    }
}

impl SceneryDistribution {
    pub fn q_view(&self) -> u32 {
        self.q_view
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// `∫ f dP` over the atoms.
    pub fn expectation<F: Fn(&DyadicMeasure) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|a| a.weight * f(&a.view)).sum()
    }

    /// Weights keyed by canonical view, for exact distribution comparisons.
    pub fn weight_map(&self) -> std::collections::BTreeMap<ViewKey, f64> {
        let mut out = std::collections::BTreeMap::new();
        for a in &self.atoms {
            *out.entry(ViewKey::of(&a.view)).or_insert(0.0) += a.weight;
        }
        out
    }

    /// Convex combination of sceneries with the same view depth.
    pub fn mixture(parts: &[(f64, &SceneryDistribution)]) -> Result<SceneryDistribution> {
        let first = parts
            .first()
            .ok_or_else(|| LabError::invalid("empty mixture"))?
            .1;
        let mut merger = Merger::default();
        for (w, scn) in parts {
            if scn.q_view != first.q_view || scn.provenance.dim != first.provenance.dim {
                return Err(LabError::invalid("mixture parts differ in view depth or dimension"));
            }
            for a in &scn.atoms {
                merger.add(a.view.clone(), w * a.weight);
            }
        }
        Ok(SceneryDistribution {
            q_view: first.q_view,
            atoms: merger.finish(),
            provenance: first.provenance.clone(),
        })
    }
}

fn check_window(mu: &DyadicMeasure, a: u32, b: u32, q_view: u32) -> Result<()> {
    if q_view == 0 {
        return Err(LabError::invalid("view depth must be positive"));
    }
    if a >= b {
        return Err(LabError::invalid(format!("empty depth window [{a}, {b})")));
    }
    if b + q_view > mu.depth() {
        return Err(LabError::DepthExhausted {
            requested: b + q_view,
            available: mu.depth(),
        });
    }
    Ok(())
}

fn tail_weight(mu: &DyadicMeasure, a: u32, b: u32) -> f64 {
    (mu.depth() - b) as f64 / (mu.depth() - a) as f64
}

/// CP magnification: `(mu, x) -> (mu^{x,1}, 2x mod 1)`.
pub fn magnify(mu: &DyadicMeasure, x: &[f64]) -> Result<(DyadicMeasure, Vec<f64>)> {
    let zoomed = mu.minicube(x, 1)?;
    Ok((zoomed, doubling_map(x)?))
}

/// `<mu, x>_[A,B)`: uniform weights on the truncated views `mu^{x,n}`.
pub fn point_scenery(
    mu: &DyadicMeasure,
    x: &[f64],
    a: u32,
    b: u32,
    q_view: u32,
) -> Result<SceneryDistribution> {
    check_window(mu, a, b, q_view)?;
    if x.len() != mu.dim() {
        return Err(LabError::DimensionMismatch {
            expected: mu.dim(),
            got: x.len(),
        });
    }
    let w = 1.0 / (b - a) as f64;
    let mut merger = Merger::default();
    for n in a..b {
        let cube = cell_of(x, n)?;
        merger.add(mu.view(&cube, q_view)?, w);
    }
    Ok(SceneryDistribution {
        q_view,
        atoms: merger.finish(),
        provenance: Provenance {
            dim: mu.dim(),
            source_depth: mu.depth(),
            window: [a, b],
            pin: Some(x.to_vec()),
            tail_weight: tail_weight(mu, a, b),
        },
    })
}

type DepthViews = Vec<(ViewKey, DyadicMeasure, f64)>;

fn views_at_depth(mu: &DyadicMeasure, n: u32, q_view: u32, w: f64) -> DepthViews {
    let mut local: HashMap<ViewKey, usize> = HashMap::new();
    let mut out: DepthViews = Vec::new();
    for (code, m) in mu.aggregate(n).expect("depth checked") {
        let view = mu.view_code(n, code, q_view);
        let key = ViewKey::of(&view);
        match local.get(&key) {
            Some(&i) => out[i].2 += m * w,
            None => {
                local.insert(key.clone(), out.len());
                out.push((key, view, m * w));
            }
        }
    }
    out
}

/// `<mu>_[A,B) = (B-A)^-1 sum_n sum_Q mu(Q) δ(mu^Q)`, with merged views.
pub fn measure_scenery(mu: &DyadicMeasure, a: u32, b: u32, q_view: u32) -> Result<SceneryDistribution> {
    check_window(mu, a, b, q_view)?;
    let w = 1.0 / (b - a) as f64;
    let per_depth: Vec<DepthViews> = (a..b)
        .into_par_iter()
        .map(|n| views_at_depth(mu, n, q_view, w))
        .collect();
    let mut merger = Merger::default();
    for depth in per_depth {
        for (key, view, weight) in depth {
            merger.add_keyed(key, view, weight);
        }
    }
    Ok(SceneryDistribution {
        q_view,
        atoms: merger.finish(),
        provenance: Provenance {
            dim: mu.dim(),
            source_depth: mu.depth(),
            window: [a, b],
            pin: None,
            tail_weight: tail_weight(mu, a, b),
        },
    })
}

fn check_resolution(mu: &DyadicMeasure, n_prime: u32, q: u32) -> Result<()> {
    if q == 0 || q >= n_prime {
        return Err(LabError::invalid(format!(
            "need 0 < q < N' (got q = {q}, N' = {n_prime})"
        )));
    }
    if n_prime + q > mu.depth() {
        return Err(LabError::DepthExhausted {
            requested: n_prime + q,
            available: mu.depth(),
        });
    }
    Ok(())
}

/// `H_{N'}(mu) - ∫ H_q d<mu>_[0,N')`.
pub fn local_global_gap(mu: &DyadicMeasure, n_prime: u32, q: u32) -> Result<f64> {
    check_resolution(mu, n_prime, q)?;
    let scn = measure_scenery(mu, 0, n_prime, q)?;
    let local = scn.expectation(|eta| normalized_entropy(eta, q).expect("view has depth q"));
    Ok(normalized_entropy(mu, n_prime)? - local)
}

/// `local_global_gap` for several `N'` at once.
///
/// Uses `sum_Q mu(Q) H_q(mu^Q) = (H(mu, D_{n+q}) - H(mu, D_n)) / q` over the
/// depth-`n` cells, so no views are built.
pub fn local_global_gaps(mu: &DyadicMeasure, q: u32, n_primes: &[u32]) -> Result<Vec<f64>> {
    for &n in n_primes {
        check_resolution(mu, n, q)?;
    }
    let top = n_primes.iter().max().map_or(0, |&n| n + q);
    let h: Vec<f64> = (0..=top)
        .map(|k| shannon_entropy(mu, k).map(|e| e.bits))
        .collect::<Result<_>>()?;
    Ok(n_primes
        .iter()
        .map(|&n| {
            let local: f64 = (0..n as usize).map(|i| h[i + q as usize] - h[i]).sum::<f64>() / q as f64;
            (h[n as usize] - local) / n as f64
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RichnessVerdict {
    pub n: u32,
    pub q: u32,
    pub delta: f64,
    /// Scenery mass of `{eta : H_q(eta) < s - delta}`.
    pub defect_mass: f64,
    pub is_rich: bool,
}

fn check_exponent(mu: &DyadicMeasure, s: f64) -> Result<()> {
    if !(s > 0.0 && s <= mu.dim() as f64) {
        return Err(LabError::invalid(format!("exponent {s} outside (0, {}]", mu.dim())));
    }
    Ok(())
}

/// `(H_q, weight)` of every atom of `<mu>_[0,N')`.
pub fn scenery_entropies(mu: &DyadicMeasure, n_prime: u32, q: u32) -> Result<Vec<(f64, f64)>> {
    check_resolution(mu, n_prime, q)?;
    let scn = measure_scenery(mu, 0, n_prime, q)?;
    Ok(scn
        .atoms()
        .iter()
        .map(|a| (normalized_entropy(&a.view, q).expect("view depth q"), a.weight))
        .collect())
}

fn defect(entropies: &[(f64, f64)], threshold: f64) -> f64 {
    entropies
        .iter()
        .filter(|(h, _)| *h < threshold)
        .map(|(_, w)| w)
        .sum()
}

/// s-richness at resolution `(N', q, δ)`: `<mu>_[0,N'){H_q < s - δ} < δ`.
pub fn richness(mu: &DyadicMeasure, n_prime: u32, q: u32, delta: f64, s: f64) -> Result<RichnessVerdict> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(LabError::invalid(format!("delta {delta} outside (0,1)")));
    }
    check_exponent(mu, s)?;
    let entropies = scenery_entropies(mu, n_prime, q)?;
    let defect_mass = defect(&entropies, s - delta);
    Ok(RichnessVerdict {
        n: n_prime,
        q,
        delta,
        defect_mass,
        is_rich: defect_mass < delta,
    })
}

/// Smallest `δ` (to `1e-9`) at which the richness condition holds, given the
/// scenery entropies. Richness is monotone in `δ`: the defect only shrinks
/// while the allowance grows. Returns `None` if not rich for any `δ < 1`.
pub fn minimal_rich_delta(entropies: &[(f64, f64)], s: f64) -> Option<f64> {
    let rich = |d: f64| defect(entropies, s - d) < d;
    let top = 1.0 - 1e-12;
    if !rich(top) {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, top);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if rich(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub delta: f64,
    pub q: u32,
    /// Largest `N' <= N - q` at which the measure is rich, if any.
    pub largest_rich_depth: Option<u32>,
}

/// Finite-scale weak-regularity diagnostic over a `(δ, q)` grid.
pub fn weak_regularity_profile(
    mu: &DyadicMeasure,
    s: f64,
    deltas: &[f64],
    qs: &[u32],
) -> Result<Vec<ProfileRow>> {
    if deltas.is_empty() || qs.is_empty() {
        return Err(LabError::invalid("profile grids must be nonempty"));
    }
    check_exponent(mu, s)?;
    let mut rows = Vec::with_capacity(deltas.len() * qs.len());
    for &q in qs {
        if q == 0 || 2 * q + 1 > mu.depth() {
            for &delta in deltas {
                rows.push(ProfileRow {
                    delta,
                    q,
                    largest_rich_depth: None,
                });
            }
            continue;
        }
        let top = mu.depth() - q;
        // per-depth (H_q, mass) lists; <mu>_[0,N') averages the first N' of them
        let per_depth: Vec<Vec<(f64, f64)>> = (0..top)
            .into_par_iter()
            .map(|n| {
                views_at_depth(mu, n, q, 1.0)
                    .into_iter()
                    .map(|(_, v, w)| (normalized_entropy(&v, q).expect("depth q"), w))
                    .collect()
            })
            .collect();
        for &delta in deltas {
            let mut running = 0.0;
            let mut best = None;
            for (n, views) in per_depth.iter().enumerate() {
                running += defect(views, s - delta);
                let n_prime = n as u32 + 1;
                if n_prime > q && running / (n_prime as f64) < delta {
                    best = Some(n_prime);
                }
            }
            rows.push(ProfileRow {
                delta,
                q,
                largest_rich_depth: best,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::DyadicCube;

    #[test]
    fn uniform_scenery_is_single_atom() {
        let mu = DyadicMeasure::uniform(2, 6).unwrap();
        let scn = measure_scenery(&mu, 0, 4, 2).unwrap();
        assert_eq!(scn.len(), 1);
        assert!((scn.atoms()[0].weight - 1.0).abs() < 1e-12);
        assert_eq!(scn.atoms()[0].view, DyadicMeasure::uniform(2, 2).unwrap());

        let p = point_scenery(&mu, &[0.3, 0.6], 1, 4, 2).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p.total_weight() - 1.0).abs() < 1e-12);
        assert!((p.provenance().tail_weight - 2.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn single_depth_point_scenery() {
        let mu = crate::regular::set_to_measure(
            &crate::regular::generate_pattern_set(&crate::regular::PatternSpec::three_quadrant(6))
                .unwrap(),
        );
        let x = [0.3, 0.1];
        let scn = point_scenery(&mu, &x, 2, 3, 3).unwrap();
        assert_eq!(scn.len(), 1);
        let direct = mu.view(&cell_of(&x, 2).unwrap(), 3).unwrap();
        assert_eq!(scn.atoms()[0].view, direct);
    }

    #[test]
    fn window_errors() {
        let mu = DyadicMeasure::uniform(1, 6).unwrap();
        assert!(measure_scenery(&mu, 0, 5, 2).is_err());
        assert!(measure_scenery(&mu, 3, 3, 2).is_err());
        assert!(point_scenery(&mu, &[0.2], 0, 4, 0).is_err());
        let pm = DyadicMeasure::point_mass(&DyadicCube::new(1, 6, [0, 0]).unwrap());
        assert!(matches!(
            point_scenery(&pm, &[0.9], 0, 3, 2),
            Err(LabError::NotInSupport { .. })
        ));
    }

    #[test]
    fn magnify_uniform() {
        let mu = DyadicMeasure::uniform(2, 5).unwrap();
        let (v, y) = magnify(&mu, &[0.3, 0.7]).unwrap();
        assert_eq!(v, DyadicMeasure::uniform(2, 4).unwrap());
        assert!((y[0] - 0.6).abs() < 1e-15 && (y[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn gap_trivial_cases() {
        let mu = DyadicMeasure::uniform(2, 8).unwrap();
        assert!(local_global_gap(&mu, 5, 2).unwrap().abs() < 1e-9);
        let pm = DyadicMeasure::point_mass(&DyadicCube::new(2, 8, [3, 200]).unwrap());
        assert!(local_global_gap(&pm, 6, 2).unwrap().abs() < 1e-12);
        assert!(local_global_gap(&mu, 2, 2).is_err());
        assert!(local_global_gap(&mu, 7, 2).is_err());
    }

    #[test]
    fn fast_gaps_match_scenery() {
        let a = crate::regular::generate_random_regular(&crate::regular::RandomRegularSpec {
            dim: 2,
            scale: 9,
            s: 1.4,
            c_target: 4.0,
            seed: 3,
        })
        .unwrap();
        let mu = crate::regular::set_to_measure(&a);
        for q in [1, 2, 3] {
            let ns: Vec<u32> = (q + 1..=9 - q).collect();
            let fast = local_global_gaps(&mu, q, &ns).unwrap();
            for (n, g) in ns.iter().zip(fast) {
                let slow = local_global_gap(&mu, *n, q).unwrap();
                assert!((g - slow).abs() < 1e-9, "q={q} N'={n}: {g} vs {slow}");
            }
        }
    }

    #[test]
    fn richness_trivial_cases() {
        let mu = DyadicMeasure::uniform(2, 8).unwrap();
        for delta in [0.05, 0.3, 0.9] {
            let v = richness(&mu, 5, 2, delta, 2.0).unwrap();
            assert_eq!(v.defect_mass, 0.0);
            assert!(v.is_rich);
        }
        let pm = DyadicMeasure::point_mass(&DyadicCube::new(2, 8, [3, 200]).unwrap());
        let v = richness(&pm, 5, 2, 0.1, 1.0).unwrap();
        assert!((v.defect_mass - 1.0).abs() < 1e-12);
        assert!(!v.is_rich);
        assert!(richness(&mu, 5, 2, 1.0, 1.0).is_err());
    }

    #[test]
    fn profile_trivial_cases() {
        let mu = DyadicMeasure::uniform(2, 8).unwrap();
        let rows = weak_regularity_profile(&mu, 2.0, &[0.1, 0.3], &[2, 3]).unwrap();
        assert!(rows.iter().all(|r| r.largest_rich_depth == Some(8 - r.q)));
        let pm = DyadicMeasure::point_mass(&DyadicCube::new(2, 8, [3, 200]).unwrap());
        let rows = weak_regularity_profile(&pm, 1.0, &[0.1, 0.5, 0.9], &[2]).unwrap();
        assert!(rows.iter().all(|r| r.largest_rich_depth.is_none()));
        assert!(weak_regularity_profile(&mu, 2.0, &[], &[2]).is_err());
    }

    #[test]
    fn profile_agrees_with_richness() {
        let a = crate::regular::generate_random_regular(&crate::regular::RandomRegularSpec {
            dim: 2,
            scale: 9,
            s: 1.4,
            c_target: 4.0,
            seed: 7,
        })
        .unwrap();
        let mu = crate::regular::set_to_measure(&a);
        let rows = weak_regularity_profile(&mu, 1.4, &[0.2], &[2]).unwrap();
        let best = rows[0].largest_rich_depth;
        for n_prime in 3..=7 {
            let v = richness(&mu, n_prime, 2, 0.2, 1.4).unwrap();
            if Some(n_prime) == best {
                assert!(v.is_rich);
            }
            if best.is_some_and(|b| n_prime > b) {
                assert!(!v.is_rich);
            }
        }
    }

    #[test]
    fn minimal_delta_is_threshold() {
        let entropies = vec![(1.0, 0.5), (1.5, 0.5)];
        // s = 1.5: defect(δ) = 0.5 for δ <= 0.5, 0 beyond, so the infimum is 0.5
        let d = minimal_rich_delta(&entropies, 1.5).unwrap();
        assert!((d - 0.5).abs() < 1e-8, "{d}");
    }
}
