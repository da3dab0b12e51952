//! Empirical constants for the `O(·)` bounds, fitted on the calibration
//! battery and frozen in a JSON file that the checks load.

use crate::battery::{self, cone_sets, Member, Stage};
use crate::error::{LabError, Result};
use crate::geometry::conical::empty_cone_ratio;
use crate::inequalities::{
    continuity_records, corollary_record, gap_pairs, gap_records, pinched_configs, richness_record,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const TOOL_VERSION: &str = env!("DYADIC_LAB_GIT_VERSION");

/// Multiplier applied to every fitted maximum (divisor for `C'`).
pub const HEADROOM: f64 = 1.5;

/// Cone openings of the empty-cone table.
pub const CONE_BETAS: [f64; 4] = [
    std::f64::consts::PI / 32.0,
    std::f64::consts::PI / 16.0,
    std::f64::consts::PI / 8.0,
    std::f64::consts::PI / 4.0,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeConstant {
    pub beta: f64,
    /// `None` when no calibration set has an empty cone at every point.
    pub c: Option<f64>,
    pub sets_used: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fitted {
    pub raw: f64,
    pub frozen: f64,
    /// Instance attaining the raw value.
    pub witness: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub tool_version: String,
    pub headroom: f64,
    /// `|H_{N'} - ∫H_q| N'/q <= c_d`, for d = 1 and d = 2.
    pub local_global: [Fitted; 2],
    /// `q |ℰ_q(v) - ℰ_q(v')| <= c`.
    pub continuity: Fitted,
    /// Richness at `(N', q, √ε / C')`; `raw` is the smallest per-member maximum.
    pub richness_c_prime: Fitted,
    /// `c_1 = c_2 = c` in the distance-entropy lower bound.
    pub corollary: Fitted,
    pub cone: Vec<ConeConstant>,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub battery_depths: [u32; 2],
    pub members: Vec<String>,
    pub gap_instances: usize,
    pub continuity_depth: u32,
    pub continuity_qs: Vec<u32>,
    pub corollary_depth: u32,
    pub corollary_qs: Vec<u32>,
    pub corollary_instances: usize,
    pub richness_qs: Vec<u32>,
    pub richness_skipped: Vec<String>,
    pub cone_scales: Vec<u32>,
    pub notes: String,
}

fn fitted<I: IntoIterator<Item = (f64, String)>>(items: I, scale: f64) -> Fitted {
    let (raw, witness) = items
        .into_iter()
        .fold((0.0, String::from("none")), |acc, (v, w)| if v > acc.0 { (v, w) } else { acc });
    Fitted {
        raw,
        frozen: raw * scale,
        witness,
    }
}

/// Local-global maxima for one dimension.
pub fn fit_local_global(members: &[Member]) -> Result<(Fitted, usize)> {
    let mut items = Vec::new();
    for m in members {
        for r in gap_records(m, &gap_pairs(m.measure.depth()))? {
            items.push((r.normalized, format!("{} q={} N'={}", r.member, r.q, r.n_prime)));
        }
    }
    let n = items.len();
    Ok((fitted(items, HEADROOM), n))
}

/// Runs every fit on the calibration battery.
pub fn calibrate() -> Result<Calibration> {
    let d1 = battery::battery(Stage::Calibration, 1)?;
    let d2 = battery::battery(Stage::Calibration, 2)?;
    let (lg1, n1) = fit_local_global(&d1)?;
    let (lg2, n2) = fit_local_global(&d2)?;

    let stage = Stage::Calibration;
    let cont_battery = battery::battery_at(stage, 2, stage.continuity_depth())?;
    let mut cont = Vec::new();
    for m in &cont_battery {
        for q in stage.continuity_qs() {
            for r in continuity_records(m, q)? {
                cont.push((r.normalized, format!("{} q={} θ={:.4}", r.member, q, r.theta)));
            }
        }
    }
    let continuity = fitted(cont, HEADROOM);

    let cor_battery = battery::battery_at(stage, 2, stage.corollary_depth())?;
    let mut cor = Vec::new();
    for m in &cor_battery {
        for cfg in pinched_configs(m, &[1], &stage.corollary_qs(), &stage.corollary_thetas())? {
            let rec = corollary_record(&m.measure, &cfg)?;
            cor.push((
                rec.required_constant(),
                format!("{} D={:?}@{} q={} θ={}", cfg.member, cfg.cell_index, cfg.cell_depth, cfg.q, cfg.direction),
            ));
        }
    }
    let corollary_instances = cor.len();
    let corollary = fitted(cor, HEADROOM);

    let mut rich: Option<(f64, String)> = None;
    let mut skipped = Vec::new();
    for m in d1.iter().chain(&d2) {
        for q in stage.richness_qs() {
            let Some(r) = richness_record(m, q)? else { continue };
            match r.c_prime_max {
                Some(c) if rich.as_ref().is_none_or(|(best, _)| c < *best) => {
                    rich = Some((c, format!("{} q={}", r.member, q)));
                }
                Some(_) => {}
                None => skipped.push(format!("{} q={}", r.member, q)),
            }
        }
    }
    let (rc, rw) = rich.ok_or_else(|| LabError::invalid("no battery member is rich at any δ"))?;
    let richness_c_prime = Fitted {
        raw: rc,
        frozen: rc / HEADROOM,
        witness: rw,
    };

    let mut cone = Vec::new();
    for beta in CONE_BETAS {
        let mut best: Option<f64> = None;
        let mut used = 0;
        for k in stage.cone_scales() {
            for (_, set) in cone_sets(k)? {
                if let Some(r) = empty_cone_ratio(&set, beta)? {
                    used += 1;
                    best = Some(best.map_or(r, |b| b.max(r)));
                }
            }
        }
        cone.push(ConeConstant {
            beta,
            c: best.map(|b| b * HEADROOM),
            sets_used: used,
        });
    }

    Ok(Calibration {
        tool_version: TOOL_VERSION.to_string(),
        headroom: HEADROOM,
        local_global: [lg1, lg2],
        continuity,
        richness_c_prime,
        corollary,
        cone,
        provenance: Provenance {
            battery_depths: [Stage::Calibration.depth(1), Stage::Calibration.depth(2)],
            members: d1.iter().chain(&d2).map(|m| m.name.clone()).collect(),
            gap_instances: n1 + n2,
            continuity_depth: stage.continuity_depth(),
            continuity_qs: stage.continuity_qs(),
            corollary_depth: stage.corollary_depth(),
            corollary_qs: stage.corollary_qs(),
            corollary_instances,
            richness_qs: stage.richness_qs(),
            richness_skipped: skipped,
            cone_scales: stage.cone_scales(),
            notes: format!(
                "maxima over the calibration battery (seeds 101, 102); frozen = raw x {HEADROOM}, \
                 except C' = raw / {HEADROOM}"
            ),
        },
    })
}

impl Calibration {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Loads a constants file and returns it with the SHA-256 of its bytes.
    pub fn load(path: &Path) -> Result<(Calibration, String)> {
        let bytes = std::fs::read(path).map_err(|e| {
            LabError::MissingCalibration(format!(
                "{}: {e}; run `lab-cli calibrate --out {}` first",
                path.display(),
                path.display()
            ))
        })?;
        let cal = serde_json::from_slice(&bytes)?;
        Ok((cal, hex::encode(Sha256::digest(&bytes))))
    }

    pub fn local_global_constant(&self, dim: usize) -> f64 {
        self.local_global[dim - 1].frozen
    }

    pub fn cone_constant(&self, beta: f64) -> Option<f64> {
        self.cone
            .iter()
            .find(|c| (c.beta - beta).abs() < 1e-12)
            .and_then(|c| c.c)
    }
}

/// Path of the committed constants file.
pub fn default_path() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("calibration/constants.json")
}
