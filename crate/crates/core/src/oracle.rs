//! Brute-force leave-one-out validation of the analytic removal error.
//!
//! Every id is removed in turn and all views are re-rendered in 64-bit; the summed squared
//! pixel change is the ground truth for the accumulated analytic error. This costs one full
//! render per Gaussian per view, so it is only meant for small scenes.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::ViewSet;
use crate::error::Error;
use crate::model::GaussianScene;
use crate::quant::{quantify_scene, Execution, QuantConstants};
use crate::raster::{render, PixelContribution, RenderOptions};
use crate::real::Real;

pub const DEFAULT_MAX_GAUSSIANS: usize = 200;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("unknown gaussian id {id} (scene has {len})")]
    UnknownId { id: usize, len: usize },
    #[error("scene has {len} gaussians, audit limit is {limit}")]
    TooLarge { len: usize, limit: usize },
}

fn options(consts: &QuantConstants) -> RenderOptions {
    RenderOptions {
        background: consts.background,
        sh_degree: consts.sh_degree,
        ..Default::default()
    }
}

fn squared_change(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (0..3).map(|c| (p[c] - q[c]) * (p[c] - q[c])).sum::<f64>())
        .sum()
}

/// Σ over all pixels of all views of `‖C − C'‖²`, where `C'` is rendered without `id`.
/// Unclamped linear values, 64-bit.
pub fn leave_one_out_se(
    scene: &GaussianScene,
    views: &ViewSet,
    id: usize,
    consts: &QuantConstants,
) -> Result<f64, Error> {
    if id >= scene.len() {
        return Err(OracleError::UnknownId { id, len: scene.len() }.into());
    }
    let opts = options(consts);
    let baselines: Vec<Vec<[f64; 3]>> = views
        .views()
        .iter()
        .map(|v| render::<f64>(scene, v, &opts).image)
        .collect();
    leave_one_out_with(scene, views, id, &opts, &baselines)
}

fn leave_one_out_with(
    scene: &GaussianScene,
    views: &ViewSet,
    id: usize,
    opts: &RenderOptions,
    baselines: &[Vec<[f64; 3]>],
) -> Result<f64, Error> {
    if scene.len() == 1 {
        // nothing left: every pixel falls back to the background
        let bg = opts.background;
        return Ok(baselines.iter().map(|b| squared_change(b, &vec![bg; b.len()])).sum());
    }
    let (reduced, _) = scene.without(&BTreeSet::from([id]))?;
    Ok(views
        .views()
        .iter()
        .zip(baselines)
        .map(|(v, base)| squared_change(base, &render::<f64>(&reduced, v, opts).image))
        .sum())
}

/// Unattenuated color behind contributor `k` (one-based) by direct summation:
/// `Σ_{j>k} (T_j / T_{k+1}) α_j c_j + (T_{N+1} / T_{k+1}) · background`.
///
/// The transmittance ratios are formed as running products of `1 − α_j`, so no division
/// (and no ε) is involved.
pub fn background_direct<T: Real>(h: &[PixelContribution<T>], k: usize, background: [f64; 3]) -> [f64; 3] {
    assert!(k >= 1 && k <= h.len(), "k = {k} out of 1..={}", h.len());
    let mut sum = [0.0f64; 3];
    let mut ratio = 1.0f64;
    for e in &h[k..] {
        let a = e.alpha.as_f64();
        for ch in 0..3 {
            sum[ch] += ratio * a * e.color[ch].as_f64();
        }
        ratio *= 1.0 - a;
    }
    [0, 1, 2].map(|ch| sum[ch] + ratio * background[ch])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub id: usize,
    pub brute_se: f64,
    pub analytic_se: f64,
    pub rel_discrepancy: f64,
    /// The id appears in a capped or terminated pixel, where exact agreement is not expected.
    pub affected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub precision: String,
    pub gaussians: usize,
    pub views: usize,
    pub rows: Vec<OracleRow>,
    /// Over all ids.
    pub max_rel_discrepancy: f64,
    pub mean_rel_discrepancy: f64,
    /// Over ids not touching any flagged pixel.
    pub max_rel_discrepancy_exact: f64,
    pub flagged_pixels: u64,
    pub affected_gaussians: usize,
}

/// `|a − b| / |b|`, zero when both vanish.
pub fn relative_discrepancy(analytic: f64, brute: f64) -> f64 {
    if analytic == brute {
        0.0
    } else {
        (analytic - brute).abs() / brute.abs()
    }
}

/// Compares the accumulated analytic errors of the `T` pipeline with leave-one-out
/// re-renders for every id.
pub fn audit<T: Real>(
    scene: &GaussianScene,
    views: &ViewSet,
    consts: &QuantConstants,
    max_gaussians: usize,
) -> Result<OracleReport, Error> {
    if scene.len() > max_gaussians {
        return Err(OracleError::TooLarge {
            len: scene.len(),
            limit: max_gaussians,
        }
        .into());
    }
    let analytic = quantify_scene::<T>(scene, views, consts, Execution::Sequential);

    let mut affected = vec![false; scene.len()];
    let mut flagged_pixels = 0u64;
    let tracking = RenderOptions {
        track_overflow: true,
        ..consts.render_options()
    };
    for view in views.views() {
        flagged_pixels += mark_affected(&render::<T>(scene, view, &tracking), &mut affected);
        mark_affected(&render::<f64>(scene, view, &tracking), &mut affected);
    }

    let opts = options(consts);
    let baselines: Vec<Vec<[f64; 3]>> = views
        .views()
        .iter()
        .map(|v| render::<f64>(scene, v, &opts).image)
        .collect();
    let brute: Vec<f64> = (0..scene.len())
        .into_par_iter()
        .map(|id| leave_one_out_with(scene, views, id, &opts, &baselines))
        .collect::<Result<_, _>>()?;

    let rows: Vec<OracleRow> = (0..scene.len())
        .map(|id| OracleRow {
            id,
            brute_se: brute[id],
            analytic_se: analytic.delta_se[id],
            rel_discrepancy: relative_discrepancy(analytic.delta_se[id], brute[id]),
            affected: affected[id],
        })
        .collect();
    let max = rows.iter().map(|r| r.rel_discrepancy).fold(0.0, f64::max);
    let mean = rows.iter().map(|r| r.rel_discrepancy).sum::<f64>() / rows.len() as f64;
    let max_exact = rows
        .iter()
        .filter(|r| !r.affected)
        .map(|r| r.rel_discrepancy)
        .fold(0.0, f64::max);
    Ok(OracleReport {
        precision: T::NAME.to_string(),
        gaussians: scene.len(),
        views: views.len(),
        max_rel_discrepancy: max,
        mean_rel_discrepancy: mean,
        max_rel_discrepancy_exact: max_exact,
        flagged_pixels,
        affected_gaussians: affected.iter().filter(|&&a| a).count(),
        rows,
    })
}

fn mark_affected<T: Real>(out: &crate::raster::RenderOutput<T>, affected: &mut [bool]) -> u64 {
    let h = out.contributions.as_ref().expect("recording render");
    let mut flagged = 0;
    for i in 0..h.pixel_count() {
        if h.flags(i).any() {
            flagged += 1;
            for e in h.pixel(i) {
                affected[e.id as usize] = true;
            }
            for &id in h.overflow(i) {
                affected[id as usize] = true;
            }
        }
    }
    flagged
}

impl OracleReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gaussian_id,brute_se,analytic_se,rel_discrepancy,affected\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{}",
                r.id, r.brute_se, r.analytic_se, r.rel_discrepancy, r.affected as u8
            );
        }
        out
    }

    /// Summary without the per-id rows.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "precision": self.precision,
            "gaussians": self.gaussians,
            "views": self.views,
            "max_rel_discrepancy": self.max_rel_discrepancy,
            "mean_rel_discrepancy": self.mean_rel_discrepancy,
            "max_rel_discrepancy_exact": self.max_rel_discrepancy_exact,
            "flagged_pixels": self.flagged_pixels,
            "affected_gaussians": self.affected_gaussians,
        })
    }

    pub fn write(&self, csv_path: impl AsRef<Path>, json_path: impl AsRef<Path>) -> Result<(), Error> {
        let (csv_path, json_path) = (csv_path.as_ref(), json_path.as_ref());
        std::fs::write(csv_path, self.to_csv()).map_err(|e| Error::io(csv_path, e))?;
        let json = serde_json::to_string_pretty(&self.summary_json())?;
        std::fs::write(json_path, json).map_err(|e| Error::io(json_path, e))
    }
}
