use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_exponent, Result};
use crate::numeric::{dist2, CompensatedSum};

/// Riesz kernel `|x - y|^{-s}`; `+inf` on the diagonal.
pub fn riesz_kernel(x: &[f64], y: &[f64], s: f64) -> Result<f64> {
    check_exponent(s)?;
    let d2 = dist2(x, y);
    Ok(if d2 == 0.0 { f64::INFINITY } else { kernel_from_dist2(d2, s) })
}

#[inline]
pub(crate) fn kernel_from_dist2(d2: f64, s: f64) -> f64 {
    d2.powf(-0.5 * s)
}

/// Evaluation order for pairwise sums.
///
/// Every schedule sums tile-local values with compensated summation and
/// reduces tiles in index order, so the result does not depend on the number
/// of worker threads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Sequential,
    Tiled { rows: usize },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Tiled { rows: 32 }
    }
}

/// `sum_{i<j} f(i, j)`.
pub(crate) fn upper_pair_sum<F>(n: usize, schedule: Schedule, f: F) -> f64
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let row_sum = |i: usize, acc: &mut CompensatedSum| {
        for j in i + 1..n {
            acc.add(f(i, j));
        }
    };
    match schedule {
        Schedule::Sequential => {
            let mut acc = CompensatedSum::new();
            for i in 0..n {
                row_sum(i, &mut acc);
            }
            acc.value()
        }
        Schedule::Tiled { rows } => {
            let rows = rows.max(1);
            let tiles: Vec<f64> = (0..n.div_ceil(rows))
                .into_par_iter()
                .map(|t| {
                    let mut acc = CompensatedSum::new();
                    for i in t * rows..((t + 1) * rows).min(n) {
                        row_sum(i, &mut acc);
                    }
                    acc.value()
                })
                .collect();
            tiles.into_iter().collect::<CompensatedSum>().value()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert_eq!(riesz_kernel(&[0.0, 0.0], &[1.0, 0.0], 0.7).unwrap(), 1.0);
        assert_eq!(riesz_kernel(&[0.0], &[2.0], 1.0).unwrap(), 0.5);
        assert_eq!(riesz_kernel(&[0.3], &[0.3], 1.0).unwrap(), f64::INFINITY);
        assert!(riesz_kernel(&[0.0], &[1.0], 0.0).is_err());
        assert!(riesz_kernel(&[0.0], &[1.0], -1.0).is_err());
    }

    #[test]
    fn kernel_monotone_in_s() {
        for &r in &[0.1, 0.5, 0.9] {
            let a = riesz_kernel(&[0.0], &[r], 0.5).unwrap();
            let b = riesz_kernel(&[0.0], &[r], 1.5).unwrap();
            assert!(b > a);
        }
        for &r in &[1.1, 2.0, 10.0] {
            let a = riesz_kernel(&[0.0], &[r], 0.5).unwrap();
            let b = riesz_kernel(&[0.0], &[r], 1.5).unwrap();
            assert!(b < a);
        }
    }

    #[test]
    fn schedules_agree() {
        let n = 300;
        let f = |i: usize, j: usize| 1.0 / ((i + 2 * j + 1) as f64).sqrt();
        let seq = upper_pair_sum(n, Schedule::Sequential, f);
        for rows in [1, 7, 64, 1000] {
            let t = upper_pair_sum(n, Schedule::Tiled { rows }, f);
            assert!(((t - seq) / seq).abs() < 1e-14);
        }
    }
}
