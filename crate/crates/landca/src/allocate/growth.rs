//! Shared internals of the two allocation operators: candidate ranking,
//! patch-size draws and the mutable per-step landscape view.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};

use crate::allocate::{OperatorRng, PatchParams};
use crate::calibrate::TransitionKey;
use crate::raster::{neighbors8, CategoricalRaster};

/// Max-heap entry. Higher score wins; exact score ties break toward the
/// lower linear cell index. `k` records the in-group neighbor count the
/// score was computed with, so stale entries can be detected and re-scored.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    pub score: f64,
    pub k: u8,
    pub idx: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

pub(crate) type CandidateHeap = BinaryHeap<Candidate>;

/// The working landscape while a step executes. `changed` spans the whole
/// step so a cell converts at most once even across transitions.
pub(crate) struct StepState<'a> {
    pub raster: &'a mut CategoricalRaster,
    pub changed: &'a mut [bool],
}

impl StepState<'_> {
    pub fn nrows(&self) -> usize {
        self.raster.header.nrows
    }

    pub fn ncols(&self) -> usize {
        self.raster.header.ncols
    }

    pub fn cell_count(&self) -> usize {
        self.raster.header.cell_count()
    }

    /// Candidate for conversion under `transition`: still the source class,
    /// untouched this step, and covered by the probability surface.
    pub fn eligible(&self, idx: usize, transition: TransitionKey, prob: &[Option<f64>]) -> bool {
        !self.changed[idx]
            && self.raster.get_linear(idx) == Some(transition.from)
            && prob[idx].is_some()
    }

    pub fn is_destination(&self, idx: usize, transition: TransitionKey) -> bool {
        self.raster.get_linear(idx) == Some(transition.to)
    }

    pub fn has_destination_neighbor(&self, idx: usize, transition: TransitionKey) -> bool {
        neighbors8(idx, self.nrows(), self.ncols()).any(|n| self.is_destination(n, transition))
    }

    pub fn convert(&mut self, idx: usize, transition: TransitionKey) {
        debug_assert_eq!(self.raster.get_linear(idx), Some(transition.from));
        self.raster.set_linear(idx, Some(transition.to));
        self.changed[idx] = true;
    }
}

/// Number of 8-neighbors of `idx` whose group tag equals `group`.
pub(crate) fn group_neighbor_count(
    membership: &[u32],
    group: u32,
    idx: usize,
    nrows: usize,
    ncols: usize,
) -> u8 {
    neighbors8(idx, nrows, ncols)
        .filter(|&n| membership[n] == group)
        .count() as u8
}

/// Candidate score: probability biased by the isometry weighting for cells
/// already touching the growing group, plus the cell's tie-breaking jitter.
pub(crate) fn score(prob: f64, k: u8, params: &PatchParams, rng: &OperatorRng, idx: usize) -> f64 {
    let bias = if params.isometry == 1.0 || k == 0 {
        1.0
    } else {
        params.isometry.powf(f64::from(k) / 8.0)
    };
    prob * bias + rng.jitter(idx)
}

/// Lognormal patch-size draw with the configured mean and variance
/// (method of moments), rounded and truncated to `[1, remaining]`. Zero
/// variance degenerates to the mean without consuming randomness.
pub(crate) fn draw_patch_size(
    rng: &mut OperatorRng,
    params: &PatchParams,
    remaining: usize,
) -> usize {
    let size = if params.patch_size_variance == 0.0 {
        params.mean_patch_size
    } else {
        let mean = params.mean_patch_size;
        let sigma2 = (1.0 + params.patch_size_variance / (mean * mean)).ln();
        let mu = mean.ln() - sigma2 / 2.0;
        match LogNormal::new(mu, sigma2.sqrt()) {
            Ok(dist) => dist.sample(rng.rng()),
            // Unreachable for validated params; fall back to a uniform pick
            // so the draw still consumes one value.
            Err(_) => rng.rng().gen_range(1.0..=mean.max(1.0)),
        }
    };
    (size.round() as usize).clamp(1, remaining.max(1))
}
