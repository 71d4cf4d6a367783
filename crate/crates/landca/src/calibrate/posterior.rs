//! Posterior transition-probability surfaces.
//!
//! Per cell, the weight of the cell's bin in every variable is summed and
//! pushed through the logistic; in prior-logit mode the transition's overall
//! rate enters as a logit offset first. Variables are visited in ascending
//! name order so the floating-point sum is reproducible.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::calibrate::{
    mask_includes, PriorMode, TransitionKey, TransitionMatrix, WeightsTable, ZoneMask,
};
use crate::error::{Error, Result};
use crate::raster::{require_aligned, CategoricalRaster, GridHeader};

/// Per-cell probability of one transition. NODATA everywhere the transition
/// does not apply.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityRaster {
    pub header: GridHeader,
    pub transition: TransitionKey,
    values: Vec<Option<f64>>,
}

impl ProbabilityRaster {
    pub fn new(
        header: GridHeader,
        transition: TransitionKey,
        values: Vec<Option<f64>>,
    ) -> Result<Self> {
        if values.len() != header.cell_count() {
            return Err(Error::InvalidInput(format!(
                "expected {} probability values, got {}",
                header.cell_count(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().flatten().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidInput(format!(
                "probability {bad} lies outside [0, 1]"
            )));
        }
        Ok(ProbabilityRaster {
            header,
            transition,
            values,
        })
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn get_linear(&self, idx: usize) -> Option<f64> {
        self.values[idx]
    }
}

/// Numerically stable logistic; maps -inf to 0 and +inf to 1.
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Weight-sum surface over the whole grid, before any eligibility masking:
/// `Some(p)` wherever every variable is defined, independent of the land-use
/// class at the cell. The allocation step uses these surfaces directly since
/// eligibility changes as cells convert.
pub fn probability_surface(
    weights: &WeightsTable,
    transition: TransitionKey,
    variables: &BTreeMap<String, CategoricalRaster>,
    header: &GridHeader,
    prior: Option<&TransitionMatrix>,
) -> Result<Vec<Option<f64>>> {
    let names = weights.variables_for(transition);
    let mut lookups: Vec<(&str, &CategoricalRaster, BTreeMap<i32, f64>)> =
        Vec::with_capacity(names.len());
    for name in names {
        let raster = variables.get(name).ok_or_else(|| {
            Error::InvalidInput(format!(
                "variable {name:?} carries weights for {transition} but no layer was supplied"
            ))
        })?;
        require_aligned(header, &raster.header, &format!("variable {name}"))?;
        lookups.push((name, raster, weights.bin_weights(transition, name)));
    }

    let offset = match weights.prior_mode {
        PriorMode::WeightsOnly => 0.0,
        PriorMode::PriorLogit => {
            let matrix = prior.ok_or_else(|| {
                Error::InvalidInput(
                    "prior-logit mode needs a transition matrix for the prior".into(),
                )
            })?;
            let rate = matrix
                .rate(transition)
                .ok_or(Error::MissingPrior { transition })?;
            logit(rate)
        }
    };

    (0..header.cell_count())
        .into_par_iter()
        .map(|idx| {
            let mut sum = offset;
            for (name, raster, bin_weights) in &lookups {
                let Some(bin) = raster.get_linear(idx) else {
                    return Ok(None);
                };
                match bin_weights.get(&bin.0) {
                    Some(w) => sum += w,
                    None => {
                        return Err(Error::MissingWeightBin {
                            transition,
                            variable: (*name).to_string(),
                            bin: bin.0,
                        })
                    }
                }
            }
            Ok(Some(logistic(sum)))
        })
        .collect()
}

/// The probability map for one transition over a concrete landscape: cells
/// whose class differs from the transition source, masked-out cells and cells
/// with any undefined variable are NODATA.
pub fn posterior_probability_map(
    weights: &WeightsTable,
    transition: TransitionKey,
    variables: &BTreeMap<String, CategoricalRaster>,
    map_t0: &CategoricalRaster,
    mask: Option<&ZoneMask<'_>>,
    prior: Option<&TransitionMatrix>,
) -> Result<ProbabilityRaster> {
    let header = map_t0.header;
    if let Some(m) = mask {
        require_aligned(&header, &m.zone.header, "probability mask")?;
    }
    let surface = probability_surface(weights, transition, variables, &header, prior)?;
    let values = surface
        .into_iter()
        .enumerate()
        .map(|(idx, p)| {
            if map_t0.get_linear(idx) == Some(transition.from) && mask_includes(mask, idx) {
                p
            } else {
                None
            }
        })
        .collect();
    Ok(ProbabilityRaster {
        header,
        transition,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::test_support::{categorical, key};
    use crate::calibrate::WeightEntry;
    use crate::raster::BinningSpec;

    fn table(entries: Vec<WeightEntry>, prior_mode: PriorMode) -> WeightsTable {
        let mut binning = BTreeMap::new();
        for e in &entries {
            binning.insert(e.variable.clone(), BinningSpec::CategoricalPassthrough);
        }
        WeightsTable {
            entries,
            binning,
            prior_mode,
        }
    }

    fn entry(variable: &str, bin: i32, w: f64) -> WeightEntry {
        WeightEntry {
            transition: key(1, 2),
            variable: variable.into(),
            bin,
            w_plus: w,
            n_bin: 1,
            n_bin_and_event: 1,
        }
    }

    #[test]
    fn all_zero_weights_give_one_half() {
        let weights = table(
            vec![entry("v", 0, 0.0), entry("v", 1, 0.0)],
            PriorMode::WeightsOnly,
        );
        let map_t0 = categorical(2, 1, &[1, 1]);
        let mut vars = BTreeMap::new();
        vars.insert("v".to_string(), categorical(2, 1, &[0, 1]));
        let prob =
            posterior_probability_map(&weights, key(1, 2), &vars, &map_t0, None, None).unwrap();
        assert_eq!(prob.get_linear(0), Some(0.5));
        assert_eq!(prob.get_linear(1), Some(0.5));
    }

    #[test]
    fn ln4_weight_maps_to_four_fifths() {
        let weights = table(vec![entry("v", 0, 4.0f64.ln())], PriorMode::WeightsOnly);
        let map_t0 = categorical(1, 1, &[1]);
        let mut vars = BTreeMap::new();
        vars.insert("v".to_string(), categorical(1, 1, &[0]));
        let prob =
            posterior_probability_map(&weights, key(1, 2), &vars, &map_t0, None, None).unwrap();
        assert!((prob.get_linear(0).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn prior_logit_with_zero_weights_returns_the_prior() {
        let weights = table(vec![entry("v", 0, 0.0)], PriorMode::PriorLogit);
        let map_t0 = categorical(1, 1, &[1]);
        let mut vars = BTreeMap::new();
        vars.insert("v".to_string(), categorical(1, 1, &[0]));
        let mut rates = BTreeMap::new();
        rates.insert(key(1, 2), 0.08);
        let matrix = TransitionMatrix {
            rates,
            interval_years: 9.0,
        };
        let prob =
            posterior_probability_map(&weights, key(1, 2), &vars, &map_t0, None, Some(&matrix))
                .unwrap();
        assert!((prob.get_linear(0).unwrap() - 0.08).abs() < 1e-15);
    }

    #[test]
    fn ineligible_cells_are_nodata() {
        let weights = table(vec![entry("v", 0, 1.0)], PriorMode::WeightsOnly);
        let map_t0 = categorical(3, 1, &[1, 2, -1]);
        let mut vars = BTreeMap::new();
        vars.insert("v".to_string(), categorical(3, 1, &[0, 0, 0]));
        let prob =
            posterior_probability_map(&weights, key(1, 2), &vars, &map_t0, None, None).unwrap();
        assert!(prob.get_linear(0).is_some());
        assert_eq!(prob.get_linear(1), None);
        assert_eq!(prob.get_linear(2), None);
    }

    #[test]
    fn missing_bin_is_a_hard_error_naming_variable_and_bin() {
        let weights = table(vec![entry("v", 0, 1.0)], PriorMode::WeightsOnly);
        let map_t0 = categorical(1, 1, &[1]);
        let mut vars = BTreeMap::new();
        vars.insert("v".to_string(), categorical(1, 1, &[5]));
        let err = posterior_probability_map(&weights, key(1, 2), &vars, &map_t0, None, None)
            .unwrap_err();
        match err {
            Error::MissingWeightBin { variable, bin, .. } => {
                assert_eq!(variable, "v");
                assert_eq!(bin, 5);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn variable_nodata_propagates() {
        let weights = table(vec![entry("v", 0, 1.0)], PriorMode::WeightsOnly);
        let map_t0 = categorical(2, 1, &[1, 1]);
        let mut vars = BTreeMap::new();
        vars.insert("v".to_string(), categorical(2, 1, &[0, -1]));
        let prob =
            posterior_probability_map(&weights, key(1, 2), &vars, &map_t0, None, None).unwrap();
        assert!(prob.get_linear(0).is_some());
        assert_eq!(prob.get_linear(1), None);
    }

    #[test]
    fn probabilities_stay_in_open_unit_interval() {
        for w in [-30.0, -5.0, 0.0, 5.0, 30.0] {
            let weights = table(vec![entry("v", 0, w)], PriorMode::WeightsOnly);
            let map_t0 = categorical(1, 1, &[1]);
            let mut vars = BTreeMap::new();
            vars.insert("v".to_string(), categorical(1, 1, &[0]));
            let prob =
                posterior_probability_map(&weights, key(1, 2), &vars, &map_t0, None, None)
                    .unwrap();
            let p = prob.get_linear(0).unwrap();
            assert!(p > 0.0 && p < 1.0, "w = {w} gave p = {p}");
        }
    }
}
