//! Pairwise association diagnostic between binned variables.
//!
//! The weight sum treats variables as independent; Cramer's V over the
//! co-occurrence table of two binned layers quantifies how badly that
//! assumption is violated (0 = independent, 1 = one determines the other).

use std::collections::BTreeMap;

use crate::calibrate::{mask_includes, ZoneMask};
use crate::error::{Error, Result};
use crate::raster::{require_aligned, CategoricalRaster};

/// Cramer's V of the r x c contingency table of co-occurring bins, over
/// cells where both layers are defined (and inside the mask, if given).
/// Fails with `DegenerateContingency` when fewer than two rows or columns
/// are occupied.
pub fn cramers_v(
    var_a: &CategoricalRaster,
    var_b: &CategoricalRaster,
    mask: Option<&ZoneMask<'_>>,
) -> Result<f64> {
    require_aligned(&var_a.header, &var_b.header, "association check")?;
    if let Some(m) = mask {
        require_aligned(&var_a.header, &m.zone.header, "association mask")?;
    }

    let mut table: BTreeMap<(i32, i32), u64> = BTreeMap::new();
    let mut row_totals: BTreeMap<i32, u64> = BTreeMap::new();
    let mut col_totals: BTreeMap<i32, u64> = BTreeMap::new();
    let mut n: u64 = 0;

    for idx in 0..var_a.header.cell_count() {
        if !mask_includes(mask, idx) {
            continue;
        }
        let (Some(a), Some(b)) = (var_a.get_linear(idx), var_b.get_linear(idx)) else {
            continue;
        };
        *table.entry((a.0, b.0)).or_insert(0) += 1;
        *row_totals.entry(a.0).or_insert(0) += 1;
        *col_totals.entry(b.0).or_insert(0) += 1;
        n += 1;
    }

    let r = row_totals.len();
    let c = col_totals.len();
    if r < 2 || c < 2 || n == 0 {
        return Err(Error::DegenerateContingency);
    }

    let mut chi2 = 0.0;
    for (&row, &row_total) in &row_totals {
        for (&col, &col_total) in &col_totals {
            let expected = row_total as f64 * col_total as f64 / n as f64;
            let observed = table.get(&(row, col)).copied().unwrap_or(0) as f64;
            let diff = observed - expected;
            chi2 += diff * diff / expected;
        }
    }

    let k = r.min(c) as f64 - 1.0;
    Ok((chi2 / (n as f64 * k)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::test_support::categorical;

    #[test]
    fn identical_balanced_variables_score_one() {
        let a = categorical(4, 1, &[0, 0, 1, 1]);
        let v = cramers_v(&a, &a.clone(), None).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exactly_independent_table_scores_zero() {
        // 2x2 table [[25,25],[25,25]] over 100 cells
        let mut a_ids = Vec::new();
        let mut b_ids = Vec::new();
        for (bin_a, bin_b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            for _ in 0..25 {
                a_ids.push(bin_a);
                b_ids.push(bin_b);
            }
        }
        let a = categorical(100, 1, &a_ids);
        let b = categorical(100, 1, &b_ids);
        let v = cramers_v(&a, &b, None).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn hand_computed_half() {
        // 2x2 table [[30,10],[10,30]] over 80 cells: chi^2 = 20, V = 0.5
        let mut a_ids = Vec::new();
        let mut b_ids = Vec::new();
        for (bin_a, bin_b, count) in [(0, 0, 30), (0, 1, 10), (1, 0, 10), (1, 1, 30)] {
            for _ in 0..count {
                a_ids.push(bin_a);
                b_ids.push(bin_b);
            }
        }
        let a = categorical(80, 1, &a_ids);
        let b = categorical(80, 1, &b_ids);
        let v = cramers_v(&a, &b, None).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_bin_variable_is_degenerate() {
        let a = categorical(4, 1, &[0, 0, 0, 0]);
        let b = categorical(4, 1, &[0, 1, 0, 1]);
        assert!(matches!(
            cramers_v(&a, &b, None),
            Err(Error::DegenerateContingency)
        ));
    }
}
