//! The serialized model artifact.
//!
//! A calibrated model is one JSON document with these fields, all of which
//! are part of the file contract:
//!
//! - `period`       label of the calibration interval (e.g. "2004-2013")
//! - `legend`       list of `{id, label}` classes
//! - `interval_years` length of the calibration interval
//! - `rates`        list of `{from, to, rate}` transition rates
//! - `prior_mode`   `"weights-only"` or `"prior-logit"`
//! - `binning`      per-variable binning spec (`mode`, `breaks`)
//! - `weights`      list of `{from, to, variable, bin, w_plus, n_bin,
//!                  n_bin_and_event}` records, audit counts included

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibrate::{TransitionKey, TransitionMatrix, WeightsTable};
use crate::error::{Error, Result};
use crate::raster::Legend;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEntry {
    #[serde(flatten)]
    pub transition: TransitionKey,
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Model {
    pub period: String,
    pub legend: Legend,
    pub interval_years: f64,
    pub rates: Vec<RateEntry>,
    #[serde(flatten)]
    pub weights: WeightsTable,
}

pub(crate) fn rates_vec(matrix: &TransitionMatrix) -> Vec<RateEntry> {
    matrix
        .rates
        .iter()
        .map(|(&transition, &rate)| RateEntry { transition, rate })
        .collect()
}

impl Model {
    pub fn transition_matrix(&self) -> TransitionMatrix {
        TransitionMatrix {
            rates: self
                .rates
                .iter()
                .map(|r| (r.transition, r.rate))
                .collect(),
            interval_years: self.interval_years,
        }
    }

    /// Transitions that carry weight entries, in first-appearance order.
    pub fn weighted_transitions(&self) -> Vec<TransitionKey> {
        let mut seen = Vec::new();
        for e in &self.weights.entries {
            if !seen.contains(&e.transition) {
                seen.push(e.transition);
            }
        }
        seen
    }

    pub fn validate(&self) -> Result<()> {
        self.transition_matrix().validate()?;
        Legend::new(self.legend.entries().to_vec())?;
        for (name, spec) in &self.weights.binning {
            spec.validate()
                .map_err(|e| Error::InvalidInput(format!("binning for {name:?}: {e}")))?;
        }
        let mut bins_seen: BTreeMap<(TransitionKey, &str), Vec<i32>> = BTreeMap::new();
        for e in &self.weights.entries {
            if e.n_bin_and_event > e.n_bin {
                return Err(Error::InvalidInput(format!(
                    "weight entry {} {}/bin {} has n_bin_and_event {} > n_bin {}",
                    e.transition, e.variable, e.bin, e.n_bin_and_event, e.n_bin
                )));
            }
            if !e.w_plus.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "weight entry {} {}/bin {} has non-finite w_plus",
                    e.transition, e.variable, e.bin
                )));
            }
            let bins = bins_seen
                .entry((e.transition, e.variable.as_str()))
                .or_default();
            if bins.contains(&e.bin) {
                return Err(Error::InvalidInput(format!(
                    "duplicate weight entry for {} {}/bin {}",
                    e.transition, e.variable, e.bin
                )));
            }
            bins.push(e.bin);
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let model: Model = serde_json::from_str(&text)?;
        model.validate()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::test_support::key;
    use crate::calibrate::{PriorMode, WeightEntry};
    use crate::raster::{BinningSpec, ClassId, LegendEntry};
    use tempfile::tempdir;

    fn sample_model() -> Model {
        let legend = Legend::new(vec![
            LegendEntry {
                id: ClassId(1),
                label: "forest".into(),
            },
            LegendEntry {
                id: ClassId(2),
                label: "pasture".into(),
            },
        ])
        .unwrap();
        let mut binning = BTreeMap::new();
        binning.insert(
            "dist_roads".to_string(),
            BinningSpec::ContinuousBreaks {
                breaks: vec![500.0, 2000.0],
            },
        );
        Model {
            period: "2004-2013".into(),
            legend,
            interval_years: 9.0,
            rates: vec![RateEntry {
                transition: key(1, 2),
                rate: 0.08,
            }],
            weights: WeightsTable {
                entries: vec![WeightEntry {
                    transition: key(1, 2),
                    variable: "dist_roads".into(),
                    bin: 0,
                    w_plus: 4.0f64.ln(),
                    n_bin: 30,
                    n_bin_and_event: 15,
                }],
                binning,
                prior_mode: PriorMode::WeightsOnly,
            },
        }
    }

    #[test]
    fn round_trips_through_json() {
        let model = sample_model();
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let loaded = Model::load(&path).unwrap();
        assert_eq!(loaded.period, model.period);
        assert_eq!(loaded.rates, model.rates);
        assert_eq!(loaded.weights.entries, model.weights.entries);
        assert_eq!(loaded.weights.prior_mode, PriorMode::WeightsOnly);
    }

    #[test]
    fn json_contract_field_names() {
        let text = sample_model().to_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        for field in [
            "period",
            "legend",
            "interval_years",
            "rates",
            "prior_mode",
            "binning",
            "weights",
        ] {
            assert!(value.get(field).is_some(), "missing field {field}");
        }
        assert_eq!(value["prior_mode"], "weights-only");
        assert_eq!(value["rates"][0]["from"], 1);
        assert_eq!(value["rates"][0]["to"], 2);
        assert_eq!(value["weights"][0]["variable"], "dist_roads");
        assert_eq!(value["weights"][0]["n_bin"], 30);
        assert_eq!(
            value["binning"]["dist_roads"]["mode"],
            "continuous-breaks"
        );
    }

    #[test]
    fn invalid_rate_rejected_on_load() {
        let mut model = sample_model();
        model.rates[0].rate = 1.5;
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        fs::write(&path, serde_json::to_string(&model).unwrap()).unwrap();
        assert!(Model::load(&path).is_err());
    }

    #[test]
    fn inconsistent_counts_rejected() {
        let mut model = sample_model();
        model.weights.entries[0].n_bin_and_event = 99;
        assert!(model.validate().is_err());
    }
}
