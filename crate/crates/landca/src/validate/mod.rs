//! Map comparison by multiple-window similarity.
//!
//! Two categorical maps are compared at growing window sizes. Inside one
//! window the concordance is the per-class minimum of the two maps' cell
//! counts, summed over classes; a window scores 1 when both maps hold the
//! same class composition regardless of arrangement. The per-size similarity
//! is total concordance over total capacity across all windows, so the curve
//! starts at plain cell-by-cell agreement (window 1) and reveals at which
//! scale the two maps become comparable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{require_aligned, CategoricalRaster, ClassId};

/// Window placement strategy.
///
/// `Sliding` evaluates every fully contained placement (stride 1); `Tiled`
/// splits the grid into disjoint tiles, keeping clipped tiles at the edges.
/// Tiled similarity is exactly non-decreasing across nested window sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowMode {
    Sliding,
    Tiled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub window_cells: usize,
    pub similarity: f64,
}

/// Similarity per window size, with the grid's cell size for unit
/// conversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityCurve {
    pub entries: Vec<CurvePoint>,
    pub mode: WindowMode,
    pub cellsize: f64,
}

impl SimilarityCurve {
    /// CSV with the column contract `window_cells,window_map_units,similarity`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("window_cells,window_map_units,similarity\n");
        for point in &self.entries {
            out.push_str(&format!(
                "{},{},{}\n",
                point.window_cells,
                point.window_cells as f64 * self.cellsize,
                point.similarity
            ));
        }
        out
    }
}

/// Cumulative-count table for O(1) window sums.
struct Prefix {
    ncols: usize,
    table: Vec<u64>,
}

impl Prefix {
    fn build(nrows: usize, ncols: usize, mut included: impl FnMut(usize) -> bool) -> Prefix {
        let width = ncols + 1;
        let mut table = vec![0u64; (nrows + 1) * width];
        for row in 0..nrows {
            let mut row_sum = 0u64;
            for col in 0..ncols {
                if included(row * ncols + col) {
                    row_sum += 1;
                }
                table[(row + 1) * width + (col + 1)] = table[row * width + (col + 1)] + row_sum;
            }
        }
        Prefix { ncols, table }
    }

    /// Count within rows [r0, r1) x cols [c0, c1).
    fn count(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> u64 {
        let w = self.ncols + 1;
        self.table[r1 * w + c1] + self.table[r0 * w + c0]
            - self.table[r0 * w + c1]
            - self.table[r1 * w + c0]
    }
}

fn window_origins(extent: usize, window: usize, mode: WindowMode) -> Vec<usize> {
    match mode {
        WindowMode::Sliding => (0..=extent.saturating_sub(window)).collect(),
        WindowMode::Tiled => (0..extent).step_by(window).collect(),
    }
}

/// Compare two maps at each requested window size. Window sizes must fit the
/// grid; duplicates are collapsed and the curve comes back sorted.
pub fn multi_window_similarity(
    observed: &CategoricalRaster,
    simulated: &CategoricalRaster,
    windows: &[usize],
    mode: WindowMode,
) -> Result<SimilarityCurve> {
    require_aligned(&observed.header, &simulated.header, "similarity")?;
    let (nrows, ncols) = (observed.header.nrows, observed.header.ncols);

    if windows.is_empty() {
        return Err(Error::InvalidInput(
            "at least one window size is required".into(),
        ));
    }
    let mut sizes: Vec<usize> = windows.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes[0] == 0 {
        return Err(Error::InvalidInput("window size 0 is meaningless".into()));
    }
    if *sizes.last().unwrap() > nrows.min(ncols) {
        return Err(Error::InvalidInput(format!(
            "window size {} exceeds the grid extent {}x{}",
            sizes.last().unwrap(),
            nrows,
            ncols
        )));
    }

    let n = observed.header.cell_count();
    let both_valid = |idx: usize| {
        observed.get_linear(idx).is_some() && simulated.get_linear(idx).is_some()
    };
    if !(0..n).any(both_valid) {
        return Err(Error::InvalidInput(
            "the maps have no mutually defined cells to compare".into(),
        ));
    }

    let mut classes: Vec<ClassId> = observed
        .classes()
        .union(&simulated.classes())
        .copied()
        .collect();
    classes.sort_unstable();

    let valid = Prefix::build(nrows, ncols, both_valid);
    let per_class: Vec<(Prefix, Prefix)> = classes
        .iter()
        .map(|&class| {
            (
                Prefix::build(nrows, ncols, |idx| {
                    both_valid(idx) && observed.get_linear(idx) == Some(class)
                }),
                Prefix::build(nrows, ncols, |idx| {
                    both_valid(idx) && simulated.get_linear(idx) == Some(class)
                }),
            )
        })
        .collect();

    let mut entries = Vec::with_capacity(sizes.len());
    for &window in &sizes {
        let mut concordant: u64 = 0;
        let mut capacity: u64 = 0;
        for &r0 in &window_origins(nrows, window, mode) {
            let r1 = (r0 + window).min(nrows);
            for &c0 in &window_origins(ncols, window, mode) {
                let c1 = (c0 + window).min(ncols);
                let cap = valid.count(r0, r1, c0, c1);
                if cap == 0 {
                    continue;
                }
                capacity += cap;
                for (obs_prefix, sim_prefix) in &per_class {
                    concordant += obs_prefix
                        .count(r0, r1, c0, c1)
                        .min(sim_prefix.count(r0, r1, c0, c1));
                }
            }
        }
        entries.push(CurvePoint {
            window_cells: window,
            similarity: concordant as f64 / capacity as f64,
        });
    }

    Ok(SimilarityCurve {
        entries,
        mode,
        cellsize: observed.header.cellsize,
    })
}

/// Where the curve reaches `threshold`, in cells and map units. The crossing
/// is the smallest evaluated window at or above the threshold, linearly
/// interpolated when it falls between two evaluated sizes; infinite when the
/// curve never gets there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdCrossing {
    pub window_cells: f64,
    pub window_map_units: f64,
}

pub fn threshold_window(curve: &SimilarityCurve, threshold: f64) -> Result<ThresholdCrossing> {
    if curve.entries.is_empty() {
        return Err(Error::InvalidInput("the similarity curve is empty".into()));
    }
    if !(0.0 < threshold && threshold < 1.0) {
        return Err(Error::InvalidInput(format!(
            "threshold must lie strictly between 0 and 1, got {threshold}"
        )));
    }
    let crossing_cells = match curve
        .entries
        .iter()
        .position(|p| p.similarity >= threshold)
    {
        Some(0) => curve.entries[0].window_cells as f64,
        Some(i) => {
            let lo = &curve.entries[i - 1];
            let hi = &curve.entries[i];
            let t = (threshold - lo.similarity) / (hi.similarity - lo.similarity);
            lo.window_cells as f64 + t * (hi.window_cells - lo.window_cells) as f64
        }
        None => f64::INFINITY,
    };
    Ok(ThresholdCrossing {
        window_cells: crossing_cells,
        window_map_units: crossing_cells * curve.cellsize,
    })
}

/// Cell-by-cell disagreement map: 0 where the maps agree, 1 where they
/// differ, NODATA where either is NODATA.
pub fn difference_map(
    observed: &CategoricalRaster,
    simulated: &CategoricalRaster,
) -> Result<CategoricalRaster> {
    require_aligned(&observed.header, &simulated.header, "difference map")?;
    let cells = observed
        .cells()
        .iter()
        .zip(simulated.cells().iter())
        .map(|(o, s)| match (o, s) {
            (Some(a), Some(b)) => Some(ClassId(i32::from(a != b))),
            _ => None,
        })
        .collect();
    CategoricalRaster::new(observed.header, cells)
}
