//! Formation of new destination-class patches away from existing ones.

use crate::allocate::growth::{
    draw_patch_size, group_neighbor_count, score, Candidate, CandidateHeap, StepState,
};
use crate::allocate::{OperatorRng, OperatorRun, PatchParams};
use crate::calibrate::{ProbabilityRaster, TransitionKey};
use crate::error::{Error, Result};
use crate::raster::{neighbors8, require_aligned, CategoricalRaster};

/// Repeatedly seed a new patch at the best-scored eligible cell that is not
/// 8-adjacent to any destination-class cell at seeding time, then grow it to
/// a lognormal-drawn target size. Stops when the quota is met or no valid
/// seed remains; shortfall is reported through the converted count.
pub fn patcher(
    current: &CategoricalRaster,
    prob: &ProbabilityRaster,
    transition: TransitionKey,
    quota: usize,
    params: &PatchParams,
    rng: &mut OperatorRng,
) -> Result<OperatorRun> {
    require_aligned(&current.header, &prob.header, "patcher probability map")?;
    if prob.transition != transition {
        return Err(Error::InvalidInput(format!(
            "probability map is for {} but the patcher was asked for {transition}",
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
    let (converted, seeds) =
        run_patcher(&mut state, prob.values(), transition, quota, params, rng);
    Ok(OperatorRun {
        raster,
        converted,
        seeds,
    })
}

/// In-place patcher, shared with the step driver. Returns the converted
/// count and the seed cell of every patch it opened.
pub(crate) fn run_patcher(
    state: &mut StepState<'_>,
    prob: &[Option<f64>],
    transition: TransitionKey,
    quota: usize,
    params: &PatchParams,
    rng: &mut OperatorRng,
) -> (usize, Vec<usize>) {
    if quota == 0 {
        return (0, Vec::new());
    }
    let (nrows, ncols) = (state.nrows(), state.ncols());

    // Cells adjacent to a destination cell now can never become seeds (the
    // destination set only grows within a step), so one scan suffices;
    // adjacency is re-checked at pop time for cells newly reached by growth.
    let mut seed_heap = CandidateHeap::new();
    for idx in 0..state.cell_count() {
        if state.eligible(idx, transition, prob)
            && !state.has_destination_neighbor(idx, transition)
        {
            seed_heap.push(Candidate {
                score: score(prob[idx].unwrap(), 0, params, rng, idx),
                k: 0,
                idx,
            });
        }
    }

    let mut patch_of = vec![0u32; state.cell_count()];
    let mut patch_id: u32 = 0;
    let mut remaining = quota;
    let mut converted = 0usize;
    let mut seeds = Vec::new();

    while remaining > 0 {
        let seed = loop {
            let Some(c) = seed_heap.pop() else {
                return (converted, seeds); // no seed supply left
            };
            if !state.eligible(c.idx, transition, prob) {
                continue;
            }
            if state.has_destination_neighbor(c.idx, transition) {
                continue; // permanently disqualified
            }
            break c;
        };

        patch_id += 1;
        let target = draw_patch_size(rng, params, remaining);
        state.convert(seed.idx, transition);
        patch_of[seed.idx] = patch_id;
        seeds.push(seed.idx);
        converted += 1;
        remaining -= 1;
        let mut grown = 1usize;

        let mut growth_heap = CandidateHeap::new();
        for n in neighbors8(seed.idx, nrows, ncols) {
            if state.eligible(n, transition, prob) {
                let k = group_neighbor_count(&patch_of, patch_id, n, nrows, ncols);
                growth_heap.push(Candidate {
                    score: score(prob[n].unwrap(), k, params, rng, n),
                    k,
                    idx: n,
                });
            }
        }

        while grown < target {
            let next = loop {
                let Some(c) = growth_heap.pop() else {
                    break None; // patch growth stalled; move to the next seed
                };
                if !state.eligible(c.idx, transition, prob) {
                    continue;
                }
                let k_now = group_neighbor_count(&patch_of, patch_id, c.idx, nrows, ncols);
                if k_now != c.k {
                    growth_heap.push(Candidate {
                        score: score(prob[c.idx].unwrap(), k_now, params, rng, c.idx),
                        k: k_now,
                        idx: c.idx,
                    });
                    continue;
                }
                break Some(c);
            };
            let Some(cand) = next else {
                break;
            };

            state.convert(cand.idx, transition);
            patch_of[cand.idx] = patch_id;
            converted += 1;
            grown += 1;
            remaining -= 1;
            for n in neighbors8(cand.idx, nrows, ncols) {
                if state.eligible(n, transition, prob) {
                    let k = group_neighbor_count(&patch_of, patch_id, n, nrows, ncols);
                    growth_heap.push(Candidate {
                        score: score(prob[n].unwrap(), k, params, rng, n),
                        k,
                        idx: n,
                    });
                }
            }
        }
    }
    (converted, seeds)
}
