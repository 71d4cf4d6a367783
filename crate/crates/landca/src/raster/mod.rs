//! Georeferenced grid containers and the map-algebra primitives the rest of
//! the crate consumes: ASCII grid I/O, exact Euclidean distance transform,
//! value binning and zone masking.
//!
//! Rasters are immutable value types. Cells are stored row-major with row 0
//! as the northernmost row, matching the on-disk layout. `None` marks NODATA;
//! every operation skips NODATA inputs and propagates NODATA to its output.

mod ascii;
mod distance;

pub use ascii::{
    read_categorical_grid, read_continuous_grid, write_categorical_grid, write_continuous_grid,
    write_continuous_grid_with_precision,
};
pub use distance::distance_transform;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A land-use / bin class identifier. Small non-negative integer in practice;
/// the raster layer itself accepts any integer value the file provides.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ClassId(pub i32);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<i32> for ClassId {
    fn from(id: i32) -> Self {
        ClassId(id)
    }
}

/// One class of a legend: numeric id plus a human-readable label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub id: ClassId,
    pub label: String,
}

/// The declared class set for a categorical layer. Ids are unique.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Legend {
    entries: Vec<LegendEntry>,
}

impl Legend {
    pub fn new(entries: Vec<LegendEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.id.0 < 0 {
                return Err(Error::InvalidInput(format!(
                    "legend id {} is negative",
                    e.id
                )));
            }
            if !seen.insert(e.id) {
                return Err(Error::InvalidInput(format!(
                    "legend id {} appears more than once",
                    e.id
                )));
            }
        }
        Ok(Legend { entries })
    }

    pub fn entries(&self) -> &[LegendEntry] {
        &self.entries
    }

    pub fn contains(&self, id: ClassId) -> bool {
        self.entries.iter().any(|e| e.id == id)
    }

    pub fn label(&self, id: ClassId) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.id == id)
            .map(|e| e.label.as_str())
    }

    /// Every class id occurring in `raster` must be declared here.
    pub fn check_covers(&self, raster: &CategoricalRaster, name: &str) -> Result<()> {
        for class in raster.classes() {
            if !self.contains(class) {
                return Err(Error::LegendMismatch(format!(
                    "class {class} occurs in {name} but is not declared in the legend"
                )));
            }
        }
        Ok(())
    }
}

/// Grid geometry and the NODATA sentinel, shared by all raster kinds.
///
/// Two rasters are aligned iff `ncols`, `nrows`, `xllcorner`, `yllcorner` and
/// `cellsize` are all equal; every multi-raster operation requires alignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub ncols: usize,
    pub nrows: usize,
    pub xllcorner: f64,
    pub yllcorner: f64,
    pub cellsize: f64,
    pub nodata: f64,
}

impl GridHeader {
    pub fn validate(&self) -> Result<()> {
        if self.ncols == 0 || self.nrows == 0 {
            return Err(Error::InvalidInput(
                "grid must have at least one row and one column".into(),
            ));
        }
        if !(self.cellsize > 0.0) || !self.cellsize.is_finite() {
            return Err(Error::InvalidInput(format!(
                "cellsize must be a positive finite number, got {}",
                self.cellsize
            )));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.ncols * self.nrows
    }

    /// Geometric equality over the five geometry fields (NODATA excluded).
    pub fn aligned_with(&self, other: &GridHeader) -> bool {
        self.ncols == other.ncols
            && self.nrows == other.nrows
            && self.xllcorner == other.xllcorner
            && self.yllcorner == other.yllcorner
            && self.cellsize == other.cellsize
    }
}

pub(crate) fn require_aligned(a: &GridHeader, b: &GridHeader, context: &str) -> Result<()> {
    if a.aligned_with(b) {
        Ok(())
    } else {
        Err(Error::misaligned(context))
    }
}

/// Gridded class-id layer. `None` is NODATA.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalRaster {
    pub header: GridHeader,
    cells: Vec<Option<ClassId>>,
}

/// Gridded real-valued layer. `None` is NODATA; stored values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousRaster {
    pub header: GridHeader,
    cells: Vec<Option<f64>>,
}

impl CategoricalRaster {
    pub fn new(header: GridHeader, cells: Vec<Option<ClassId>>) -> Result<Self> {
        header.validate()?;
        if cells.len() != header.cell_count() {
            return Err(Error::InvalidInput(format!(
                "expected {} cells for a {}x{} grid, got {}",
                header.cell_count(),
                header.nrows,
                header.ncols,
                cells.len()
            )));
        }
        Ok(CategoricalRaster { header, cells })
    }

    /// Uniform raster, useful for tests and synthetic landscapes.
    pub fn filled(header: GridHeader, class: ClassId) -> Result<Self> {
        let n = header.cell_count();
        Self::new(header, vec![Some(class); n])
    }

    pub fn cells(&self) -> &[Option<ClassId>] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> Option<ClassId> {
        self.cells[row * self.header.ncols + col]
    }

    pub fn get_linear(&self, idx: usize) -> Option<ClassId> {
        self.cells[idx]
    }

    pub fn set_linear(&mut self, idx: usize, value: Option<ClassId>) {
        self.cells[idx] = value;
    }

    /// Distinct class ids present among non-NODATA cells, ascending.
    pub fn classes(&self) -> BTreeSet<ClassId> {
        self.cells.iter().flatten().copied().collect()
    }

    /// Count of non-NODATA cells holding `class`.
    pub fn count_class(&self, class: ClassId) -> usize {
        self.cells.iter().filter(|c| **c == Some(class)).count()
    }

    /// Cells outside the kept zone become NODATA; kept cells are untouched.
    pub fn masked(&self, zone: &CategoricalRaster, keep: ClassId) -> Result<CategoricalRaster> {
        require_aligned(&self.header, &zone.header, "mask")?;
        let cells = self
            .cells
            .iter()
            .zip(zone.cells.iter())
            .map(|(v, z)| if *z == Some(keep) { *v } else { None })
            .collect();
        Ok(CategoricalRaster {
            header: self.header,
            cells,
        })
    }
}

impl ContinuousRaster {
    pub fn new(header: GridHeader, cells: Vec<Option<f64>>) -> Result<Self> {
        header.validate()?;
        if cells.len() != header.cell_count() {
            return Err(Error::InvalidInput(format!(
                "expected {} cells for a {}x{} grid, got {}",
                header.cell_count(),
                header.nrows,
                header.ncols,
                cells.len()
            )));
        }
        if let Some(bad) = cells.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "continuous raster holds a non-finite value {bad}"
            )));
        }
        Ok(ContinuousRaster { header, cells })
    }

    pub fn cells(&self) -> &[Option<f64>] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.header.ncols + col]
    }

    pub fn get_linear(&self, idx: usize) -> Option<f64> {
        self.cells[idx]
    }

    pub fn masked(&self, zone: &CategoricalRaster, keep: ClassId) -> Result<ContinuousRaster> {
        require_aligned(&self.header, &zone.header, "mask")?;
        let cells = self
            .cells
            .iter()
            .zip(zone.cells().iter())
            .map(|(v, z)| if *z == Some(keep) { *v } else { None })
            .collect();
        Ok(ContinuousRaster {
            header: self.header,
            cells,
        })
    }
}

/// How a variable layer is turned into discrete bins before weight
/// estimation.
///
/// Continuous layers are cut at the given break points; bin `k` covers
/// `[breaks[k-1], breaks[k])` with implicit open end bins, so `len(breaks)+1`
/// bins in total. Categorical layers pass through unchanged, their class ids
/// acting as bin ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum BinningSpec {
    ContinuousBreaks { breaks: Vec<f64> },
    CategoricalPassthrough,
}

impl BinningSpec {
    pub fn validate(&self) -> Result<()> {
        if let BinningSpec::ContinuousBreaks { breaks } = self {
            for w in breaks.windows(2) {
                if !(w[0] < w[1]) {
                    return Err(Error::InvalidInput(format!(
                        "breaks must be strictly ascending, got {} before {}",
                        w[0], w[1]
                    )));
                }
            }
            if let Some(bad) = breaks.iter().find(|b| !b.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "breaks must be finite, got {bad}"
                )));
            }
        }
        Ok(())
    }

    /// Number of bins for continuous mode; `None` for passthrough (bins are
    /// whatever class ids the layer holds).
    pub fn bin_count(&self) -> Option<usize> {
        match self {
            BinningSpec::ContinuousBreaks { breaks } => Some(breaks.len() + 1),
            BinningSpec::CategoricalPassthrough => None,
        }
    }
}

/// Bin index of `value`: the number of breaks at or below it, so values below
/// every break land in bin 0 and values at a break fall into the bin it opens.
pub fn bin_index(breaks: &[f64], value: f64) -> usize {
    breaks.partition_point(|b| *b <= value)
}

/// Map a continuous layer onto bin indices under `spec`. NODATA is preserved.
pub fn bin_continuous(raster: &ContinuousRaster, spec: &BinningSpec) -> Result<CategoricalRaster> {
    spec.validate()?;
    let breaks = match spec {
        BinningSpec::ContinuousBreaks { breaks } => breaks,
        BinningSpec::CategoricalPassthrough => {
            return Err(Error::InvalidInput(
                "categorical-passthrough does not apply to a continuous layer".into(),
            ))
        }
    };
    let cells = raster
        .cells
        .iter()
        .map(|v| v.map(|x| ClassId(bin_index(breaks, x) as i32)))
        .collect();
    Ok(CategoricalRaster {
        header: raster.header,
        cells,
    })
}

/// 8-neighborhood linear indices of `idx` on an `nrows` x `ncols` grid.
pub(crate) fn neighbors8(idx: usize, nrows: usize, ncols: usize) -> impl Iterator<Item = usize> {
    let row = (idx / ncols) as isize;
    let col = (idx % ncols) as isize;
    const OFFSETS: [(isize, isize); 8] = [
        (-1, -1),
        (-1, 0),
        (-1, 1),
        (0, -1),
        (0, 1),
        (1, -1),
        (1, 0),
        (1, 1),
    ];
    OFFSETS.into_iter().filter_map(move |(dr, dc)| {
        let r = row + dr;
        let c = col + dc;
        if r >= 0 && (r as usize) < nrows && c >= 0 && (c as usize) < ncols {
            Some(r as usize * ncols + c as usize)
        } else {
            None
        }
    })
}
