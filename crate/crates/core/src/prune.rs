//! Ranking and pruning policies driven by accumulated removal error.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::ViewSet;
use crate::error::Error;
use crate::model::GaussianScene;
use crate::quant::{quantify_scene_timed, ErrorBuffer, Execution, QuantConstants};
use crate::real::Real;

#[derive(Debug, Error, PartialEq)]
pub enum PruneError {
    #[error("prune ratio must lie in (0, 1), got {0}")]
    Ratio(f64),
    #[error("budget must be finite and non-negative, got {0}")]
    Budget(f64),
    #[error("cycle count must be at least 1")]
    Cycles,
    #[error("error buffer covers {buffer} ids but the scene has {scene}")]
    SizeMismatch { buffer: usize, scene: usize },
}

/// Pruning policy. Exactly one of ratio or budget per run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PruneConfig {
    /// Remove the fraction `ratio` of Gaussians with the lowest error.
    Ratio { ratio: f64 },
    /// Remove low-error prefixes whose cumulative error stays within `budget / cycles`,
    /// re-quantifying before every cycle.
    Budget { budget: f64, cycles: usize },
}

impl PruneConfig {
    pub fn validate(&self) -> Result<(), PruneError> {
        match *self {
            PruneConfig::Ratio { ratio } if !(ratio > 0.0 && ratio < 1.0) => Err(PruneError::Ratio(ratio)),
            PruneConfig::Budget { budget, .. } if !(budget >= 0.0 && budget.is_finite()) => {
                Err(PruneError::Budget(budget))
            }
            PruneConfig::Budget { cycles: 0, .. } => Err(PruneError::Cycles),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub cycle: usize,
    /// Ids in the numbering of the scene given to the pruning call.
    pub removed_ids: Vec<usize>,
    /// Sum of the quantified errors of the removed ids.
    pub removed_delta_se: f64,
    pub before: usize,
    pub after: usize,
    pub quant_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub config: PruneConfig,
    pub initial_count: usize,
    pub final_count: usize,
    pub cycles: Vec<CycleReport>,
}

impl PruneReport {
    pub fn removed(&self) -> BTreeSet<usize> {
        self.cycles.iter().flat_map(|c| c.removed_ids.iter().copied()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Ids in ascending error order, ties by ascending id.
pub fn rank(buffer: &ErrorBuffer) -> Vec<usize> {
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    order.sort_by(|&a, &b| buffer.delta_se[a].total_cmp(&buffer.delta_se[b]).then(a.cmp(&b)));
    order
}

/// The `floor(ratio · M)` lowest-ranked ids.
pub fn ratio_selection(buffer: &ErrorBuffer, ratio: f64) -> Vec<usize> {
    // relative slack so that e.g. 0.29 · 100 counts as 29
    let n = (ratio * buffer.len() as f64 * (1.0 + 1e-12)).floor() as usize;
    let mut ids = rank(buffer);
    ids.truncate(n.min(buffer.len().saturating_sub(1)));
    ids
}

/// Longest ascending-rank prefix whose cumulative error is within `budget`, keeping at least
/// one Gaussian.
pub fn budget_selection(buffer: &ErrorBuffer, budget: f64) -> Vec<usize> {
    let mut ids = Vec::new();
    let mut sum = 0.0;
    for id in rank(buffer) {
        if ids.len() + 1 >= buffer.len() {
            break;
        }
        sum += buffer.delta_se[id];
        if sum > budget {
            break;
        }
        ids.push(id);
    }
    ids
}

fn check_size(scene: &GaussianScene, buffer: &ErrorBuffer) -> Result<(), PruneError> {
    if buffer.len() != scene.len() {
        return Err(PruneError::SizeMismatch {
            buffer: buffer.len(),
            scene: scene.len(),
        });
    }
    Ok(())
}

fn apply(
    scene: &GaussianScene,
    buffer: &ErrorBuffer,
    removed: Vec<usize>,
    config: PruneConfig,
) -> Result<(GaussianScene, PruneReport), Error> {
    let removed_set: BTreeSet<usize> = removed.iter().copied().collect();
    let (pruned, _) = scene.without(&removed_set)?;
    let cycle = CycleReport {
        cycle: 0,
        removed_delta_se: removed.iter().map(|&i| buffer.delta_se[i]).sum(),
        removed_ids: removed_set.into_iter().collect(),
        before: scene.len(),
        after: pruned.len(),
        quant_seconds: None,
    };
    let report = PruneReport {
        config,
        initial_count: scene.len(),
        final_count: pruned.len(),
        cycles: vec![cycle],
    };
    Ok((pruned, report))
}

pub fn prune_ratio(scene: &GaussianScene, buffer: &ErrorBuffer, ratio: f64) -> Result<(GaussianScene, PruneReport), Error> {
    let config = PruneConfig::Ratio { ratio };
    config.validate()?;
    check_size(scene, buffer)?;
    apply(scene, buffer, ratio_selection(buffer, ratio), config)
}

pub fn prune_budget(scene: &GaussianScene, buffer: &ErrorBuffer, budget: f64) -> Result<(GaussianScene, PruneReport), Error> {
    let config = PruneConfig::Budget { budget, cycles: 1 };
    config.validate()?;
    check_size(scene, buffer)?;
    apply(scene, buffer, budget_selection(buffer, budget), config)
}

/// Splits `budget` evenly over `cycles`; each cycle re-quantifies the surviving scene and
/// removes a budget prefix of `budget / cycles`.
pub fn iterative_prune<T: Real>(
    scene: &GaussianScene,
    views: &ViewSet,
    budget: f64,
    cycles: usize,
    consts: &QuantConstants,
    execution: Execution,
) -> Result<(GaussianScene, PruneReport), Error> {
    let config = PruneConfig::Budget { budget, cycles };
    config.validate()?;
    let partial = budget / cycles as f64;
    let mut current = scene.clone();
    // current id -> id in `scene`
    let mut origin: Vec<usize> = (0..scene.len()).collect();
    let mut reports = Vec::with_capacity(cycles);
    for cycle in 0..cycles {
        let (buffer, seconds) = quantify_scene_timed::<T>(&current, views, consts, execution);
        let removed = budget_selection(&buffer, partial);
        let removed_set: BTreeSet<usize> = removed.iter().copied().collect();
        let (next, _) = current.without(&removed_set)?;
        reports.push(CycleReport {
            cycle,
            removed_delta_se: removed.iter().map(|&i| buffer.delta_se[i]).sum(),
            removed_ids: removed_set.iter().map(|&i| origin[i]).collect(),
            before: current.len(),
            after: next.len(),
            quant_seconds: Some(seconds),
        });
        origin = origin
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !removed_set.contains(i))
            .map(|(_, o)| o)
            .collect();
        current = next;
    }
    let report = PruneReport {
        config,
        initial_count: scene.len(),
        final_count: current.len(),
        cycles: reports,
    };
    Ok((current, report))
}
