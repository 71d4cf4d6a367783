//! Exact Euclidean distance transform.
//!
//! Two-pass squared-distance transform (per-column nearest target row, then a
//! per-row lower envelope of parabolas). All intermediate squared distances
//! are integers represented exactly in f64, so the result is bit-identical to
//! a brute-force minimum over every target cell.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{CategoricalRaster, ClassId, ContinuousRaster};

const INF: f64 = f64::INFINITY;

/// 1D squared-distance lower envelope (the parabola sweep).
/// `f[i]` is the squared vertical distance at column offset `i`, INF where
/// the column holds no target.
fn envelope_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n]; // parabola apex positions
    let mut z = vec![0.0f64; n + 1]; // boundaries between parabolas
    let mut k = 0usize;
    let mut started = false;

    for q in 0..n {
        if f[q] == INF {
            continue;
        }
        if !started {
            v[0] = q;
            z[0] = -INF;
            z[1] = INF;
            started = true;
            continue;
        }
        let fq = f[q];
        let q_f = q as f64;
        loop {
            let p = v[k] as f64;
            let s = ((fq + q_f * q_f) - (f[v[k]] + p * p)) / (2.0 * q_f - 2.0 * p);
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[0] = -INF;
                    z[1] = INF;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = INF;
                break;
            }
        }
    }

    if !started {
        out.fill(INF);
        return;
    }

    let mut k = 0usize;
    for (q, slot) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *slot = d * d + f[v[k]];
    }
}

/// Distance, in map units, from every cell center to the nearest cell center
/// of `target_class`. Target cells get 0; NODATA cells stay NODATA. Fails if
/// the class is absent from the raster.
pub fn distance_transform(
    source: &CategoricalRaster,
    target_class: ClassId,
) -> Result<ContinuousRaster> {
    let header = source.header;
    let (nrows, ncols) = (header.nrows, header.ncols);

    if source.count_class(target_class) == 0 {
        return Err(Error::NoTargetCells {
            class: target_class,
        });
    }

    // Pass 1: squared distance to the nearest target row within each column.
    let mut column_sq = vec![INF; nrows * ncols];
    column_sq
        .par_chunks_mut(nrows)
        .enumerate()
        .for_each(|(col, chunk)| {
            // nearest target row above
            let mut nearest: Option<usize> = None;
            for row in 0..nrows {
                if source.get(row, col) == Some(target_class) {
                    nearest = Some(row);
                }
                if let Some(t) = nearest {
                    let d = (row - t) as f64;
                    chunk[row] = d * d;
                }
            }
            // nearest target row below
            nearest = None;
            for row in (0..nrows).rev() {
                if source.get(row, col) == Some(target_class) {
                    nearest = Some(row);
                }
                if let Some(t) = nearest {
                    let d = (t - row) as f64;
                    let sq = d * d;
                    if sq < chunk[row] {
                        chunk[row] = sq;
                    }
                }
            }
        });

    // Pass 2: lower envelope across columns within each row.
    let mut squared = vec![INF; nrows * ncols];
    squared
        .par_chunks_mut(ncols)
        .enumerate()
        .for_each(|(row, out_row)| {
            let f: Vec<f64> = (0..ncols).map(|col| column_sq[col * nrows + row]).collect();
            envelope_1d(&f, out_row);
        });

    let cells = (0..nrows * ncols)
        .map(|idx| {
            if source.get_linear(idx).is_none() {
                None
            } else {
                Some(squared[idx].sqrt() * header.cellsize)
            }
        })
        .collect();
    ContinuousRaster::new(header, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GridHeader;

    fn header(ncols: usize, nrows: usize, cellsize: f64) -> GridHeader {
        GridHeader {
            ncols,
            nrows,
            xllcorner: 0.0,
            yllcorner: 0.0,
            cellsize,
            nodata: -9999.0,
        }
    }

    /// All-pairs scan; shares only the final sqrt-and-scale with the
    /// transform under test.
    fn brute_force(source: &CategoricalRaster, target: ClassId) -> Vec<Option<f64>> {
        let h = source.header;
        let targets: Vec<(usize, usize)> = (0..h.nrows)
            .flat_map(|r| (0..h.ncols).map(move |c| (r, c)))
            .filter(|&(r, c)| source.get(r, c) == Some(target))
            .collect();
        (0..h.nrows)
            .flat_map(|r| (0..h.ncols).map(move |c| (r, c)))
            .map(|(r, c)| {
                source.get(r, c)?;
                let best = targets
                    .iter()
                    .map(|&(tr, tc)| {
                        let dr = r as i64 - tr as i64;
                        let dc = c as i64 - tc as i64;
                        (dr * dr + dc * dc) as f64
                    })
                    .fold(INF, f64::min);
                Some(best.sqrt() * h.cellsize)
            })
            .collect()
    }

    #[test]
    fn self_orthogonal_and_diagonal_distances() {
        // 2x2: target at (0,0)
        let raster = CategoricalRaster::new(
            header(2, 2, 250.0),
            vec![
                Some(ClassId(1)),
                Some(ClassId(0)),
                Some(ClassId(0)),
                Some(ClassId(0)),
            ],
        )
        .unwrap();
        let dist = distance_transform(&raster, ClassId(1)).unwrap();
        assert_eq!(dist.get(0, 0), Some(0.0));
        assert_eq!(dist.get(0, 1), Some(250.0));
        assert_eq!(dist.get(1, 0), Some(250.0));
        assert_eq!(dist.get(1, 1), Some(250.0 * 2.0f64.sqrt()));
    }

    #[test]
    fn missing_target_class_is_an_error() {
        let raster = CategoricalRaster::filled(header(3, 3, 250.0), ClassId(0)).unwrap();
        assert!(matches!(
            distance_transform(&raster, ClassId(9)),
            Err(Error::NoTargetCells { .. })
        ));
    }

    #[test]
    fn nodata_preserved_but_ignored_as_target() {
        let raster = CategoricalRaster::new(
            header(3, 1, 100.0),
            vec![Some(ClassId(1)), None, Some(ClassId(0))],
        )
        .unwrap();
        let dist = distance_transform(&raster, ClassId(1)).unwrap();
        assert_eq!(dist.get(0, 1), None);
        assert_eq!(dist.get(0, 2), Some(200.0));
    }

    #[test]
    fn matches_brute_force_on_random_grids() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..25 {
            let ncols = rng.gen_range(1..=40);
            let nrows = rng.gen_range(1..=40);
            let cells: Vec<Option<ClassId>> = (0..ncols * nrows)
                .map(|_| match rng.gen_range(0..10) {
                    0 => None,
                    v if v <= 3 => Some(ClassId(1)),
                    _ => Some(ClassId(0)),
                })
                .collect();
            let raster = match CategoricalRaster::new(header(ncols, nrows, 250.0), cells) {
                Ok(r) => r,
                Err(_) => continue,
            };
            if raster.count_class(ClassId(1)) == 0 {
                continue;
            }
            let fast = distance_transform(&raster, ClassId(1)).unwrap();
            let slow = brute_force(&raster, ClassId(1));
            for (idx, expected) in slow.iter().enumerate() {
                assert_eq!(
                    fast.get_linear(idx),
                    *expected,
                    "trial {trial}, cell {idx}: exact equality expected"
                );
            }
        }
    }
}
