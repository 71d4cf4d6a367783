//! Frontier growth of existing destination-class patches.

use crate::allocate::growth::{
    draw_patch_size, group_neighbor_count, score, Candidate, CandidateHeap, StepState,
};
use crate::allocate::{OperatorRng, OperatorRun, PatchParams};
use crate::calibrate::{ProbabilityRaster, TransitionKey};
use crate::error::{Error, Result};
use crate::raster::{neighbors8, require_aligned, CategoricalRaster};

/// Convert up to `quota` source-class cells that touch (8-neighborhood) a
/// destination-class cell at the moment of conversion, best-scored first.
/// The frontier grows as cells convert. Returns the updated raster and the
/// number actually converted, which falls short of the quota only when the
/// frontier is exhausted.
pub fn expander(
    current: &CategoricalRaster,
    prob: &ProbabilityRaster,
    transition: TransitionKey,
    quota: usize,
    params: &PatchParams,
    rng: &mut OperatorRng,
) -> Result<OperatorRun> {
    require_aligned(&current.header, &prob.header, "expander probability map")?;
    if prob.transition != transition {
        return Err(Error::InvalidInput(format!(
            "probability map is for {} but the expander was asked for {transition}",
            prob.transition
        )));
    }
    params.validate()?;
    let mut raster = current.clone();
    let mut changed = vec![false; current.header.cell_count()];
    let mut state = StepState {
        raster: &mut raster,
        changed: &mut changed,
    };
    let converted = run_expander(&mut state, prob.values(), transition, quota, params, rng);
    Ok(OperatorRun {
        raster,
        converted,
        seeds: Vec::new(),
    })
}

/// In-place expander, shared with the step driver.
pub(crate) fn run_expander(
    state: &mut StepState<'_>,
    prob: &[Option<f64>],
    transition: TransitionKey,
    quota: usize,
    params: &PatchParams,
    rng: &mut OperatorRng,
) -> usize {
    if quota == 0 {
        return 0;
    }
    let (nrows, ncols) = (state.nrows(), state.ncols());

    // Growth episodes group conversions for the isometry bias; `episodes[i]`
    // holds the episode that converted cell i.
    let mut episodes = vec![0u32; state.cell_count()];
    let mut episode: u32 = 0;

    let mut heap = CandidateHeap::new();
    for idx in 0..state.cell_count() {
        if state.eligible(idx, transition, prob) && state.has_destination_neighbor(idx, transition)
        {
            heap.push(Candidate {
                score: score(prob[idx].unwrap(), 0, params, rng, idx),
                k: 0,
                idx,
            });
        }
    }

    let mut remaining = quota;
    let mut converted = 0usize;
    'quota: while remaining > 0 {
        episode += 1;
        let target = draw_patch_size(rng, params, remaining);
        let mut grown = 0usize;
        while grown < target {
            let cand = loop {
                let Some(c) = heap.pop() else {
                    break 'quota; // frontier exhausted
                };
                if !state.eligible(c.idx, transition, prob) {
                    continue;
                }
                let k_now = group_neighbor_count(&episodes, episode, c.idx, nrows, ncols);
                if k_now != c.k {
                    heap.push(Candidate {
                        score: score(prob[c.idx].unwrap(), k_now, params, rng, c.idx),
                        k: k_now,
                        idx: c.idx,
                    });
                    continue;
                }
                break c;
            };

            state.convert(cand.idx, transition);
            episodes[cand.idx] = episode;
            converted += 1;
            grown += 1;
            remaining -= 1;

            for n in neighbors8(cand.idx, nrows, ncols) {
                if state.eligible(n, transition, prob) {
                    let k = group_neighbor_count(&episodes, episode, n, nrows, ncols);
                    heap.push(Candidate {
                        score: score(prob[n].unwrap(), k, params, rng, n),
                        k,
                        idx: n,
                    });
                }
            }
            if remaining == 0 {
                break 'quota;
            }
        }
    }
    converted
}
