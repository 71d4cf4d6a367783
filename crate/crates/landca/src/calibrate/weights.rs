//! Weights of evidence for one (transition, variable) pair.
//!
//! For transition i -> j, the eligible population is the set of class-i cells
//! at t0 (NODATA-free in every involved layer, inside the mask). Cells that
//! hold class j at t1 are the events D; the rest persisted. For a variable
//! bin k the weight is the log likelihood ratio
//!
//! ```text
//! w_plus(k) = ln[ (n(k and D) / n(D)) / (n(k and not-D) / n(not-D)) ]
//! ```
//!
//! Positive weights mark bins where conversion concentrates; a bin occupying
//! the same fraction of D and not-D weighs exactly zero. When any quadrant of
//! the 2x2 contingency table is empty, 0.5 is added to all four counts so the
//! weight stays finite; the stored audit counts are always the raw ones.

use serde::{Deserialize, Serialize};

use crate::calibrate::{mask_includes, CalibrationPair, TransitionKey, ZoneMask};
use crate::error::{Error, Result};
use crate::raster::{require_aligned, CategoricalRaster};

/// One bin's weight plus the audit counts that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    #[serde(flatten)]
    pub transition: TransitionKey,
    pub variable: String,
    pub bin: i32,
    pub w_plus: f64,
    /// Eligible cells falling in this bin.
    pub n_bin: u64,
    /// Eligible cells in this bin that transitioned.
    pub n_bin_and_event: u64,
}

pub(crate) fn weight_from_quadrants(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let (a, b, c, d) = if a == 0.0 || b == 0.0 || c == 0.0 || d == 0.0 {
        (a + 0.5, b + 0.5, c + 0.5, d + 0.5)
    } else {
        (a, b, c, d)
    };
    ((a / (a + c)) / (b / (b + d))).ln()
}

/// Weights of evidence of `variable` (already binned) on `transition`.
/// Returns one entry per bin value present in the variable layer, ascending.
pub fn compute_weights(
    pair: &CalibrationPair,
    transition: TransitionKey,
    variable_name: &str,
    variable: &CategoricalRaster,
    mask: Option<&ZoneMask<'_>>,
) -> Result<Vec<WeightEntry>> {
    require_aligned(
        &pair.map_t0.header,
        &variable.header,
        &format!("variable {variable_name}"),
    )?;
    if let Some(m) = mask {
        m.check_aligned(&pair.map_t0.header, "weights mask")?;
    }

    // The bin universe is everything the layer can ever present, so later
    // probability lookups cannot miss.
    let bins = variable.classes();

    let mut n_event: u64 = 0;
    let mut n_persist: u64 = 0;
    let mut per_bin: std::collections::BTreeMap<i32, (u64, u64)> =
        bins.iter().map(|b| (b.0, (0u64, 0u64))).collect();

    for idx in 0..pair.map_t0.header.cell_count() {
        if !mask_includes(mask, idx) {
            continue;
        }
        if pair.map_t0.get_linear(idx) != Some(transition.from) {
            continue;
        }
        let (Some(c1), Some(bin)) = (pair.map_t1.get_linear(idx), variable.get_linear(idx))
        else {
            continue;
        };
        let slot = per_bin
            .get_mut(&bin.0)
            .expect("bin universe covers every cell");
        slot.0 += 1;
        if c1 == transition.to {
            slot.1 += 1;
            n_event += 1;
        } else {
            n_persist += 1;
        }
    }

    let eligible = n_event + n_persist;
    if eligible == 0 {
        return Err(Error::NoEligibleCells { transition });
    }
    if n_event == 0 {
        return Err(Error::NoTransitionedCells { transition });
    }

    Ok(per_bin
        .into_iter()
        .map(|(bin, (n_bin, n_bin_and_event))| {
            let a = n_bin_and_event as f64;
            let b = (n_bin - n_bin_and_event) as f64;
            let c = (n_event - n_bin_and_event) as f64;
            let d = (n_persist - (n_bin - n_bin_and_event)) as f64;
            WeightEntry {
                transition,
                variable: variable_name.to_string(),
                bin,
                w_plus: weight_from_quadrants(a, b, c, d),
                n_bin,
                n_bin_and_event,
            }
        })
        .collect())
}
