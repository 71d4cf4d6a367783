//! Per-step quota planning, transition sequencing and the multi-step
//! simulation driver.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::allocate::expander::run_expander;
use crate::allocate::growth::StepState;
use crate::allocate::patcher::run_patcher;
use crate::allocate::{
    annualize_rates, round_half_even, AllocationSettings, Operator, RngStream,
};
use crate::calibrate::{probability_surface, Model, TransitionKey, TransitionMatrix};
use crate::error::{Error, Result};
use crate::raster::CategoricalRaster;

/// Full-grid probability values per transition, `None` where any variable is
/// undefined. Eligibility against the evolving landscape is applied later.
pub type Surfaces = BTreeMap<TransitionKey, Vec<Option<f64>>>;

/// One transition's share of a step.
#[derive(Debug, Clone)]
pub struct StepPlanItem {
    pub transition: TransitionKey,
    /// Source-class cells with a defined probability at planning time.
    pub eligible: usize,
    /// Cells to convert this step.
    pub quota: usize,
    pub settings: AllocationSettings,
}

/// All transitions of one step. Execution order is fixed inside `run_step`:
/// descending quota, ties by ascending (from, to); the order matters because
/// a cell converts at most once per step.
#[derive(Debug, Clone)]
pub struct StepPlan {
    pub items: Vec<StepPlanItem>,
}

/// Quotas for one step: `round(rate x eligible)` with half-to-even rounding.
pub fn plan_step(
    current: &CategoricalRaster,
    rates_step: &TransitionMatrix,
    transitions: &[TransitionKey],
    surfaces: &Surfaces,
    settings_for: impl Fn(TransitionKey) -> AllocationSettings,
) -> Result<StepPlan> {
    let mut items = Vec::with_capacity(transitions.len());
    for &transition in transitions {
        let rate = rates_step
            .rate(transition)
            .ok_or(Error::MissingPrior { transition })?;
        let surface = surfaces
            .get(&transition)
            .ok_or_else(|| Error::InvalidInput(format!("no probability surface for {transition}")))?;
        let eligible = (0..current.header.cell_count())
            .filter(|&idx| {
                current.get_linear(idx) == Some(transition.from) && surface[idx].is_some()
            })
            .count();
        let settings = settings_for(transition);
        settings.validate()?;
        items.push(StepPlanItem {
            transition,
            eligible,
            quota: round_half_even(rate * eligible as f64),
            settings,
        });
    }
    Ok(StepPlan { items })
}

/// What one transition actually did in one step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionReport {
    #[serde(flatten)]
    pub transition: TransitionKey,
    pub eligible: usize,
    pub quota: usize,
    pub expander_quota: usize,
    pub patcher_quota: usize,
    /// Includes any reflow pass.
    pub expander_converted: usize,
    pub patcher_converted: usize,
    pub patches_seeded: usize,
    pub converted: usize,
    pub shortfall: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u32,
    pub transitions: Vec<TransitionReport>,
}

/// Execute one step: for each planned transition in fixed order, split the
/// quota between the operators, run the expander, hand its shortfall to the
/// patcher, and give the patcher's shortfall one reflow pass back through
/// the expander. A cell converts at most once per step.
pub fn run_step(
    current: &CategoricalRaster,
    surfaces: &Surfaces,
    plan: &StepPlan,
    rng: &RngStream,
    step_index: u32,
) -> Result<(CategoricalRaster, StepReport)> {
    let mut raster = current.clone();
    let report = run_step_in_place(&mut raster, surfaces, plan, rng, step_index)?;
    Ok((raster, report))
}

pub(crate) fn run_step_in_place(
    raster: &mut CategoricalRaster,
    surfaces: &Surfaces,
    plan: &StepPlan,
    rng: &RngStream,
    step_index: u32,
) -> Result<StepReport> {
    let mut changed = vec![false; raster.header.cell_count()];

    let mut items = plan.items.clone();
    items.sort_by(|a, b| {
        b.quota
            .cmp(&a.quota)
            .then_with(|| a.transition.cmp(&b.transition))
    });

    let mut reports = Vec::with_capacity(items.len());
    for item in &items {
        let prob = surfaces
            .get(&item.transition)
            .ok_or_else(|| Error::InvalidInput(format!("no probability surface for {}", item.transition)))?;

        let expander_quota =
            round_half_even(item.settings.expander_fraction * item.quota as f64);
        let patcher_quota = item.quota - expander_quota;

        let mut rng_expander = rng.operator_rng(step_index, item.transition, Operator::Expander);
        let mut rng_patcher = rng.operator_rng(step_index, item.transition, Operator::Patcher);

        let mut state = StepState {
            raster,
            changed: &mut changed,
        };

        let expander_first = run_expander(
            &mut state,
            prob,
            item.transition,
            expander_quota,
            &item.settings.expander,
            &mut rng_expander,
        );
        let patcher_total_quota = patcher_quota + (expander_quota - expander_first);
        let (patcher_converted, seeds) = run_patcher(
            &mut state,
            prob,
            item.transition,
            patcher_total_quota,
            &item.settings.patcher,
            &mut rng_patcher,
        );
        let leftover = patcher_total_quota - patcher_converted;
        let expander_reflow = if leftover > 0 {
            run_expander(
                &mut state,
                prob,
                item.transition,
                leftover,
                &item.settings.expander,
                &mut rng_expander,
            )
        } else {
            0
        };

        let converted = expander_first + patcher_converted + expander_reflow;
        reports.push(TransitionReport {
            transition: item.transition,
            eligible: item.eligible,
            quota: item.quota,
            expander_quota,
            patcher_quota,
            expander_converted: expander_first + expander_reflow,
            patcher_converted,
            patches_seeded: seeds.len(),
            converted,
            shortfall: item.quota - converted,
        });
    }

    Ok(StepReport {
        step: step_index,
        transitions: reports,
    })
}

/// Record of a whole run: the seed and every step's quotas, conversions and
/// shortfalls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub steps: usize,
    pub reports: Vec<StepReport>,
}

impl RunManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Everything a simulation needs.
pub struct SimulationJob<'a> {
    pub initial: &'a CategoricalRaster,
    pub model: &'a Model,
    /// Binned variable layers, aligned with the initial map; static for the
    /// whole run.
    pub variables: &'a BTreeMap<String, CategoricalRaster>,
    pub transitions: &'a [TransitionKey],
    pub steps: usize,
    pub settings: &'a BTreeMap<TransitionKey, AllocationSettings>,
    pub default_settings: AllocationSettings,
    pub seed: u64,
}

pub struct SimulationOutput {
    /// Index 0 is the initial map, then one map per step.
    pub maps: Vec<CategoricalRaster>,
    pub manifest: RunManifest,
}

/// Run the full simulation: decompose the model's interval rates over the
/// requested number of steps, build the static probability surfaces once,
/// and execute the steps. Deterministic given the job and seed.
pub fn run_simulation(job: &SimulationJob<'_>) -> Result<SimulationOutput> {
    let mut seen = Vec::new();
    for t in job.transitions {
        if seen.contains(t) {
            return Err(Error::InvalidInput(format!(
                "transition {t} is requested twice"
            )));
        }
        seen.push(*t);
    }
    job.default_settings.validate()?;
    for settings in job.settings.values() {
        settings.validate()?;
    }

    let mut maps = vec![job.initial.clone()];
    if job.steps == 0 {
        return Ok(SimulationOutput {
            maps,
            manifest: RunManifest {
                seed: job.seed,
                steps: 0,
                reports: Vec::new(),
            },
        });
    }

    let matrix = job.model.transition_matrix();
    matrix.validate()?;
    let rates_step = annualize_rates(&matrix, job.steps)?;

    let mut surfaces = Surfaces::new();
    for &transition in job.transitions {
        let surface = probability_surface(
            &job.model.weights,
            transition,
            job.variables,
            &job.initial.header,
            Some(&matrix),
        )?;
        surfaces.insert(transition, surface);
    }

    let stream = RngStream::new(job.seed);
    let mut current = job.initial.clone();
    let mut reports = Vec::with_capacity(job.steps);
    for step in 1..=job.steps {
        let plan = plan_step(&current, &rates_step, job.transitions, &surfaces, |t| {
            job.settings
                .get(&t)
                .copied()
                .unwrap_or(job.default_settings)
        })?;
        let report = run_step_in_place(&mut current, &surfaces, &plan, &stream, step as u32)?;
        maps.push(current.clone());
        reports.push(report);
    }

    Ok(SimulationOutput {
        maps,
        manifest: RunManifest {
            seed: job.seed,
            steps: job.steps,
            reports,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocate::test_support::uniform_prob;
    use crate::allocate::{expander, PatchParams};
    use crate::calibrate::test_support::{categorical, key};
    use crate::calibrate::{PriorMode, RateEntry, WeightsTable};
    use crate::raster::{ClassId, Legend, LegendEntry};

    fn legend(ids: &[(i32, &str)]) -> Legend {
        Legend::new(
            ids.iter()
                .map(|&(id, label)| LegendEntry {
                    id: ClassId(id),
                    label: label.into(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn model_with_rates(rates: &[(i32, i32, f64)], years: f64) -> Model {
        Model {
            period: "test".into(),
            legend: legend(&[(1, "a"), (2, "b"), (3, "c")]),
            interval_years: years,
            rates: rates
                .iter()
                .map(|&(f, t, rate)| RateEntry {
                    transition: key(f, t),
                    rate,
                })
                .collect(),
            weights: WeightsTable {
                entries: Vec::new(),
                binning: BTreeMap::new(),
                prior_mode: PriorMode::WeightsOnly,
            },
        }
    }

    #[test]
    fn zero_steps_returns_only_the_initial_map() {
        let initial = categorical(4, 4, &[1; 16]);
        let model = model_with_rates(&[(1, 2, 0.5)], 9.0);
        let vars = BTreeMap::new();
        let settings = BTreeMap::new();
        let job = SimulationJob {
            initial: &initial,
            model: &model,
            variables: &vars,
            transitions: &[key(1, 2)],
            steps: 0,
            settings: &settings,
            default_settings: AllocationSettings::default(),
            seed: 1,
        };
        let out = run_simulation(&job).unwrap();
        assert_eq!(out.maps.len(), 1);
        assert_eq!(out.maps[0], initial);
        assert!(out.manifest.reports.is_empty());
    }

    #[test]
    fn zero_rates_are_identity() {
        let initial = categorical(4, 4, &[1; 16]);
        let model = model_with_rates(&[(1, 2, 0.0)], 1.0);
        let vars = BTreeMap::new();
        let settings = BTreeMap::new();
        let job = SimulationJob {
            initial: &initial,
            model: &model,
            variables: &vars,
            transitions: &[key(1, 2)],
            steps: 3,
            settings: &settings,
            default_settings: AllocationSettings::default(),
            seed: 1,
        };
        let out = run_simulation(&job).unwrap();
        assert_eq!(out.maps.len(), 4);
        for map in &out.maps {
            assert_eq!(*map, initial);
        }
    }

    #[test]
    fn same_seed_reproduces_the_run() {
        let mut ids = vec![1i32; 100];
        ids[0] = 2;
        ids[55] = 2;
        let initial = categorical(10, 10, &ids);
        let model = model_with_rates(&[(1, 2, 0.4)], 2.0);
        let vars = BTreeMap::new();
        let settings = BTreeMap::new();
        let job = SimulationJob {
            initial: &initial,
            model: &model,
            variables: &vars,
            transitions: &[key(1, 2)],
            steps: 2,
            settings: &settings,
            default_settings: AllocationSettings::default(),
            seed: 42,
        };
        let a = run_simulation(&job).unwrap();
        let b = run_simulation(&job).unwrap();
        assert_eq!(a.maps, b.maps);
        assert_eq!(
            a.manifest.to_json().unwrap(),
            b.manifest.to_json().unwrap()
        );
    }

    #[test]
    fn expander_only_step_equals_calling_expander_alone() {
        // frontier: the 8 cells around the destination cell at center
        let mut ids = vec![1i32; 25];
        ids[12] = 2;
        let initial = categorical(5, 5, &ids);
        let prob = uniform_prob(&initial, key(1, 2));
        let mut surfaces = Surfaces::new();
        surfaces.insert(key(1, 2), prob.values().to_vec());

        let settings = AllocationSettings {
            expander_fraction: 1.0,
            expander: PatchParams::default(),
            patcher: PatchParams::default(),
        };
        let plan = StepPlan {
            items: vec![StepPlanItem {
                transition: key(1, 2),
                eligible: 24,
                quota: 8,
                settings,
            }],
        };
        let stream = RngStream::new(7);
        let (stepped, report) = run_step(&initial, &surfaces, &plan, &stream, 1).unwrap();

        let mut rng = stream.operator_rng(1, key(1, 2), Operator::Expander);
        let direct = expander(
            &initial,
            &prob,
            key(1, 2),
            8,
            &PatchParams::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(stepped, direct.raster);
        assert_eq!(report.transitions[0].converted, 8);
        assert_eq!(report.transitions[0].shortfall, 0);
    }

    #[test]
    fn competing_transitions_each_meet_their_quota() {
        // ample class-1 cells; transitions 1->2 and 1->3 with ample seeds
        let mut ids = vec![1i32; 400];
        ids[0] = 2;
        ids[399] = 3;
        let initial = categorical(20, 20, &ids);
        let model = model_with_rates(&[(1, 2, 0.1), (1, 3, 0.05)], 1.0);
        let vars = BTreeMap::new();
        let settings = BTreeMap::new();
        let job = SimulationJob {
            initial: &initial,
            model: &model,
            variables: &vars,
            transitions: &[key(1, 2), key(1, 3)],
            steps: 1,
            settings: &settings,
            default_settings: AllocationSettings::default(),
            seed: 3,
        };
        let out = run_simulation(&job).unwrap();
        let report = &out.manifest.reports[0];
        for t in &report.transitions {
            assert_eq!(t.shortfall, 0, "transition {} fell short", t.transition);
            assert_eq!(t.converted, t.quota);
        }
        // mass balance: class 1 lost exactly the sum of both quotas
        let lost: usize = report.transitions.iter().map(|t| t.converted).sum();
        assert_eq!(
            out.maps[1].count_class(ClassId(1)),
            initial.count_class(ClassId(1)) - lost
        );
    }

    #[test]
    fn a_cell_converts_at_most_once_per_step() {
        // 1->2 and 2->3 in the same step: cells converted to 2 must not
        // immediately convert to 3
        let mut ids = vec![1i32; 100];
        for id in ids.iter_mut().take(30) {
            *id = 2;
        }
        ids[99] = 3;
        let initial = categorical(10, 10, &ids);
        let model = model_with_rates(&[(1, 2, 0.3), (2, 3, 0.5)], 1.0);
        let vars = BTreeMap::new();
        let settings = BTreeMap::new();
        let job = SimulationJob {
            initial: &initial,
            model: &model,
            variables: &vars,
            transitions: &[key(1, 2), key(2, 3)],
            steps: 1,
            settings: &settings,
            default_settings: AllocationSettings::default(),
            seed: 11,
        };
        let out = run_simulation(&job).unwrap();
        let report = &out.manifest.reports[0];
        let quota_1_2 = report.transitions.iter().find(|t| t.transition == key(1, 2)).unwrap();
        let quota_2_3 = report.transitions.iter().find(|t| t.transition == key(2, 3)).unwrap();
        // class mass balance holds exactly
        let c1 = initial.count_class(ClassId(1)) - quota_1_2.converted;
        let c2 = initial.count_class(ClassId(2)) + quota_1_2.converted - quota_2_3.converted;
        let c3 = initial.count_class(ClassId(3)) + quota_2_3.converted;
        assert_eq!(out.maps[1].count_class(ClassId(1)), c1);
        assert_eq!(out.maps[1].count_class(ClassId(2)), c2);
        assert_eq!(out.maps[1].count_class(ClassId(3)), c3);
    }
}
