//! Stochastic cell allocation: the expander and patcher operators, per-step
//! quota planning and the multi-step simulation driver.
//!
//! The expander grows existing destination-class patches along their
//! frontier; the patcher opens new patches away from existing ones. Both
//! rank candidate cells by transition probability (plus an infinitesimal
//! seeded jitter for reproducible tie-breaking) and draw patch sizes from a
//! lognormal with the configured mean and variance.

mod expander;
mod growth;
mod patcher;
mod rng;
mod step;

pub use expander::expander;
pub use patcher::patcher;
pub use rng::{Operator, OperatorRng, RngStream, JITTER_EPSILON};
pub use step::{
    run_simulation, run_step, RunManifest, SimulationJob, SimulationOutput, StepPlan,
    StepPlanItem, StepReport, TransitionReport,
};

use serde::{Deserialize, Serialize};

use crate::calibrate::TransitionMatrix;
use crate::error::{Error, Result};

/// Geometry knobs for patch growth.
///
/// `mean_patch_size` and `patch_size_variance` parameterize the lognormal
/// patch-size draw (in cells and cells squared). `isometry` biases growth
/// toward cells touching more of the growing patch: each candidate's
/// probability is scaled by `isometry^(k/8)` where `k` counts its
/// already-in-patch 8-neighbors, so 1 is neutral and larger values favor
/// rounder patches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchParams {
    pub mean_patch_size: f64,
    pub patch_size_variance: f64,
    pub isometry: f64,
}

impl Default for PatchParams {
    fn default() -> Self {
        PatchParams {
            mean_patch_size: 1.0,
            patch_size_variance: 0.0,
            isometry: 1.0,
        }
    }
}

impl PatchParams {
    pub fn validate(&self) -> Result<()> {
        if !self.mean_patch_size.is_finite() || self.mean_patch_size < 1.0 {
            return Err(Error::InvalidInput(format!(
                "mean_patch_size must be at least 1 cell, got {}",
                self.mean_patch_size
            )));
        }
        if !self.patch_size_variance.is_finite() || self.patch_size_variance < 0.0 {
            return Err(Error::InvalidInput(format!(
                "patch_size_variance must be non-negative, got {}",
                self.patch_size_variance
            )));
        }
        if !self.isometry.is_finite() || self.isometry < 0.0 {
            return Err(Error::InvalidInput(format!(
                "isometry must be non-negative, got {}",
                self.isometry
            )));
        }
        Ok(())
    }
}

/// Per-transition allocation configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationSettings {
    /// Share of the quota handed to the expander; the rest seeds new patches.
    pub expander_fraction: f64,
    pub expander: PatchParams,
    pub patcher: PatchParams,
}

impl Default for AllocationSettings {
    fn default() -> Self {
        AllocationSettings {
            expander_fraction: 0.5,
            expander: PatchParams::default(),
            patcher: PatchParams::default(),
        }
    }
}

impl AllocationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.expander_fraction) {
            return Err(Error::InvalidInput(format!(
                "expander_fraction must lie in [0, 1], got {}",
                self.expander_fraction
            )));
        }
        self.expander.validate()?;
        self.patcher.validate()
    }
}

/// Decompose interval rates into per-step rates such that applying the step
/// rate `steps` times reproduces the interval rate:
/// `r_step = 1 - (1 - r)^(1/steps)`. An absorbing rate of 1 stays 1 and is
/// reported in the run log.
pub fn annualize_rates(matrix: &TransitionMatrix, steps: usize) -> Result<TransitionMatrix> {
    if steps < 1 {
        return Err(Error::InvalidInput(
            "rate decomposition needs at least one step".into(),
        ));
    }
    let exponent = 1.0 / steps as f64;
    let rates = matrix
        .rates
        .iter()
        .map(|(&key, &rate)| {
            if rate == 1.0 && steps > 1 {
                log::warn!(
                    "transition {key} has rate 1; it stays absorbing in every step"
                );
            }
            (key, 1.0 - (1.0 - rate).powf(exponent))
        })
        .collect();
    Ok(TransitionMatrix {
        rates,
        interval_years: matrix.interval_years / steps as f64,
    })
}

/// Round half-to-even, for turning fractional cell quotas into counts.
pub(crate) fn round_half_even(x: f64) -> usize {
    debug_assert!(x >= 0.0);
    let floor = x.floor();
    let base = floor as usize;
    let diff = x - floor;
    if diff > 0.5 || (diff == 0.5 && base % 2 == 1) {
        base + 1
    } else {
        base
    }
}

/// Result of one operator invocation.
#[derive(Debug, Clone)]
pub struct OperatorRun {
    pub raster: crate::raster::CategoricalRaster,
    pub converted: usize,
    /// Cells that started a new patch (patcher only; empty for the expander).
    pub seeds: Vec<usize>,
}
