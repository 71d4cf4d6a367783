//! Model calibration from a dated raster pair: per-transition rates,
//! weights of evidence per variable bin, posterior probability surfaces and
//! a variable-association diagnostic.

mod independence;
mod model;
mod posterior;
mod weights;

pub use independence::cramers_v;
pub use model::{Model, RateEntry};
pub use posterior::{posterior_probability_map, probability_surface, ProbabilityRaster};
pub use weights::{compute_weights, WeightEntry};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{
    require_aligned, BinningSpec, CategoricalRaster, ClassId, GridHeader, Legend,
};

/// Zone restriction: only cells where `zone == keep` enter any count.
#[derive(Debug, Clone, Copy)]
pub struct ZoneMask<'a> {
    pub zone: &'a CategoricalRaster,
    pub keep: ClassId,
}

impl<'a> ZoneMask<'a> {
    pub fn includes(&self, idx: usize) -> bool {
        self.zone.get_linear(idx) == Some(self.keep)
    }

    fn check_aligned(&self, header: &GridHeader, context: &str) -> Result<()> {
        require_aligned(&self.zone.header, header, context)
    }
}

fn mask_includes(mask: Option<&ZoneMask<'_>>, idx: usize) -> bool {
    mask.is_none_or(|m| m.includes(idx))
}

/// Two observations of the same landscape, `years` apart.
#[derive(Debug, Clone)]
pub struct CalibrationPair {
    pub map_t0: CategoricalRaster,
    pub map_t1: CategoricalRaster,
    pub years: f64,
}

impl CalibrationPair {
    pub fn new(map_t0: CategoricalRaster, map_t1: CategoricalRaster, years: f64) -> Result<Self> {
        require_aligned(&map_t0.header, &map_t1.header, "calibration pair")?;
        if !years.is_finite() || years <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "calibration interval must be a positive number of years, got {years}"
            )));
        }
        Ok(CalibrationPair {
            map_t0,
            map_t1,
            years,
        })
    }
}

/// An ordered class change `from` -> `to`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct TransitionKey {
    pub from: ClassId,
    pub to: ClassId,
}

impl TransitionKey {
    pub fn new(from: ClassId, to: ClassId) -> Result<Self> {
        if from == to {
            return Err(Error::InvalidInput(format!(
                "transition source and destination must differ, got {from}->{to}"
            )));
        }
        Ok(TransitionKey { from, to })
    }
}

impl fmt::Display for TransitionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

/// Fraction of each source class converted to each destination over the
/// calibration interval. Rows (fixed source class) sum to at most 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub rates: BTreeMap<TransitionKey, f64>,
    pub interval_years: f64,
}

impl TransitionMatrix {
    pub fn rate(&self, key: TransitionKey) -> Option<f64> {
        self.rates.get(&key).copied()
    }

    /// Sum of outgoing rates per source class.
    pub fn row_sums(&self) -> BTreeMap<ClassId, f64> {
        let mut sums = BTreeMap::new();
        for (key, rate) in &self.rates {
            *sums.entry(key.from).or_insert(0.0) += rate;
        }
        sums
    }

    pub fn validate(&self) -> Result<()> {
        if !self.interval_years.is_finite() || self.interval_years <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "interval_years must be positive, got {}",
                self.interval_years
            )));
        }
        for (key, rate) in &self.rates {
            if !(0.0..=1.0).contains(rate) {
                return Err(Error::InvalidInput(format!(
                    "rate for {key} is {rate}, outside [0, 1]"
                )));
            }
        }
        for (class, sum) in self.row_sums() {
            // Tolerate float accumulation right at the boundary.
            if sum > 1.0 + 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "outgoing rates for class {class} sum to {sum} > 1"
                )));
            }
        }
        Ok(())
    }
}

/// How posterior probabilities combine the per-bin weights.
///
/// `WeightsOnly` applies the logistic to the bare weight sum, so an
/// all-zero-weight cell scores 0.5. `PriorLogit` first shifts the logit by
/// the transition's overall rate, so an all-zero-weight cell scores the rate
/// itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorMode {
    WeightsOnly,
    PriorLogit,
}

impl Default for PriorMode {
    fn default() -> Self {
        PriorMode::WeightsOnly
    }
}

/// Per-transition weight entries plus the binning that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightsTable {
    #[serde(rename = "weights")]
    pub entries: Vec<WeightEntry>,
    pub binning: BTreeMap<String, BinningSpec>,
    pub prior_mode: PriorMode,
}

impl WeightsTable {
    /// Variable names carrying entries for `transition`, ascending.
    pub fn variables_for(&self, transition: TransitionKey) -> BTreeSet<&str> {
        self.entries
            .iter()
            .filter(|e| e.transition == transition)
            .map(|e| e.variable.as_str())
            .collect()
    }

    /// bin -> w_plus lookup for one (transition, variable).
    pub fn bin_weights(&self, transition: TransitionKey, variable: &str) -> BTreeMap<i32, f64> {
        self.entries
            .iter()
            .filter(|e| e.transition == transition && e.variable == variable)
            .map(|e| (e.bin, e.w_plus))
            .collect()
    }
}

/// Fraction of class-`i` cells at t0 that hold class `j` at t1, for every
/// ordered pair of observed classes. Cells that are NODATA in either map or
/// fall outside the mask are skipped; source classes with no cells at t0 get
/// no row at all.
pub fn compute_transition_matrix(
    pair: &CalibrationPair,
    mask: Option<&ZoneMask<'_>>,
) -> Result<TransitionMatrix> {
    if let Some(m) = mask {
        m.check_aligned(&pair.map_t0.header, "transition matrix mask")?;
    }

    let mut source_counts: BTreeMap<ClassId, u64> = BTreeMap::new();
    let mut pair_counts: BTreeMap<(ClassId, ClassId), u64> = BTreeMap::new();
    let mut classes: BTreeSet<ClassId> = BTreeSet::new();

    for idx in 0..pair.map_t0.header.cell_count() {
        if !mask_includes(mask, idx) {
            continue;
        }
        let (Some(c0), Some(c1)) = (pair.map_t0.get_linear(idx), pair.map_t1.get_linear(idx))
        else {
            continue;
        };
        classes.insert(c0);
        classes.insert(c1);
        *source_counts.entry(c0).or_insert(0) += 1;
        if c0 != c1 {
            *pair_counts.entry((c0, c1)).or_insert(0) += 1;
        }
    }

    let mut rates = BTreeMap::new();
    for (&from, &n_from) in &source_counts {
        for &to in &classes {
            if to == from {
                continue;
            }
            let n = pair_counts.get(&(from, to)).copied().unwrap_or(0);
            rates.insert(
                TransitionKey { from, to },
                n as f64 / n_from as f64,
            );
        }
    }

    let matrix = TransitionMatrix {
        rates,
        interval_years: pair.years,
    };
    matrix.validate()?;
    Ok(matrix)
}

/// A variable layer already reduced to bin ids, plus the spec that did it.
#[derive(Debug, Clone)]
pub struct BinnedVariable {
    pub raster: CategoricalRaster,
    pub spec: BinningSpec,
}

/// Everything `calibrate` needs for one period.
pub struct CalibrationJob<'a> {
    pub pair: &'a CalibrationPair,
    pub transitions: &'a [TransitionKey],
    pub variables: &'a BTreeMap<String, BinnedVariable>,
    pub mask: Option<ZoneMask<'a>>,
    pub prior_mode: PriorMode,
    pub legend: &'a Legend,
    pub period: String,
}

/// Association warning threshold for the pairwise variable diagnostic.
const ASSOCIATION_WARN_THRESHOLD: f64 = 0.7;

/// Learn a full model: transition rates plus weights of evidence for every
/// requested (transition, variable) pair, bundled into one serializable
/// artifact. Pairs of variables with Cramer's V at or above 0.7 are reported
/// via a warning; nothing is removed automatically.
pub fn calibrate(job: CalibrationJob<'_>) -> Result<Model> {
    let header = &job.pair.map_t0.header;
    for (name, var) in job.variables {
        require_aligned(header, &var.raster.header, &format!("variable {name}"))?;
        var.spec.validate()?;
    }
    job.legend.check_covers(&job.pair.map_t0, "the t0 map")?;
    job.legend.check_covers(&job.pair.map_t1, "the t1 map")?;

    let matrix = compute_transition_matrix(job.pair, job.mask.as_ref())?;

    let mut entries = Vec::new();
    for &transition in job.transitions {
        for (name, var) in job.variables {
            let mut batch = compute_weights(
                job.pair,
                transition,
                name,
                &var.raster,
                job.mask.as_ref(),
            )?;
            entries.append(&mut batch);
        }
    }

    warn_on_associated_variables(job.variables, job.mask.as_ref());

    let binning = job
        .variables
        .iter()
        .map(|(name, var)| (name.clone(), var.spec.clone()))
        .collect();

    Ok(Model {
        period: job.period,
        legend: job.legend.clone(),
        interval_years: job.pair.years,
        rates: model::rates_vec(&matrix),
        weights: WeightsTable {
            entries,
            binning,
            prior_mode: job.prior_mode,
        },
    })
}

fn warn_on_associated_variables(
    variables: &BTreeMap<String, BinnedVariable>,
    mask: Option<&ZoneMask<'_>>,
) {
    let names: Vec<&String> = variables.keys().collect();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let va = &variables[*a].raster;
            let vb = &variables[*b].raster;
            match cramers_v(va, vb, mask) {
                Ok(v) if v >= ASSOCIATION_WARN_THRESHOLD => {
                    log::warn!(
                        "variables {a:?} and {b:?} are strongly associated (Cramer's V = {v:.3}); \
                         their weights are estimated independently"
                    );
                }
                Ok(_) => {}
                Err(err) => {
                    log::debug!("association check {a:?}/{b:?} skipped: {err}");
                }
            }
        }
    }
}
