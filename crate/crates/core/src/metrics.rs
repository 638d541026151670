//! Corner and pixel errors in the style of the LSUN room layout benchmark.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{LayoutState, RegionLabel};
use crate::raster::{rasterize_regions, RegionMap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Fraction of the image diagonal.
    pub e_corner: f64,
    /// Fraction of pixels.
    pub e_pixel: f64,
    /// `(pred index, gt index)` corner correspondences.
    pub matched_pairs: Vec<(usize, usize)>,
}

/// Minimum-cost assignment on a rectangular cost matrix (rows x cols).
///
/// Returns `(row, col)` pairs, `min(rows, cols)` of them, sorted by row.
/// Shortest augmenting path with potentials, O(n^2 m).
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    if cols == 0 {
        return Vec::new();
    }
    // the solver needs rows <= cols; transpose otherwise
    if rows > cols {
        let t: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| cost[r][c]).collect()).collect();
        let mut pairs: Vec<(usize, usize)> = min_cost_assignment(&t).into_iter().map(|(c, r)| (r, c)).collect();
        pairs.sort_unstable();
        return pairs;
    }
    let (n, m) = (rows, cols);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=m).filter(|&j| p[j] != 0).map(|j| (p[j] - 1, j - 1)).collect();
    pairs.sort_unstable();
    pairs
}

/// Corner error normalized by the image diagonal.
///
/// Conjunctions are matched by minimum total Euclidean distance. Each
/// unmatched conjunction (topologies of different size) costs one diagonal,
/// and the sum is divided by `max(n_pred, n_gt)` diagonals.
pub fn corner_error(pred: &LayoutState, gt: &LayoutState, w: usize, h: usize) -> (f64, Vec<(usize, usize)>) {
    let diag = ((w * w + h * h) as f64).sqrt();
    let (a, b) = (pred.points(), gt.points());
    let cost: Vec<Vec<f64>> = a.iter().map(|p| b.iter().map(|q| p.distance(*q)).collect()).collect();
    let pairs = min_cost_assignment(&cost);
    let matched: f64 = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
    let n = a.len().max(b.len());
    if n == 0 {
        return (0.0, pairs);
    }
    let unmatched = (n - pairs.len()) as f64;
    ((matched + diag * unmatched) / (n as f64 * diag), pairs)
}

/// `confusion[p][g]`: pixels labeled `p` in `pred` and `g` in `gt`.
pub fn confusion_matrix(pred: &RegionMap, gt: &RegionMap) -> Result<[[u64; RegionLabel::COUNT]; RegionLabel::COUNT]> {
    if pred.w != gt.w || pred.h != gt.h {
        return Err(Error::DimensionMismatch(format!(
            "pred is {}x{}, gt is {}x{}",
            pred.w, pred.h, gt.w, gt.h
        )));
    }
    let mut m = [[0u64; RegionLabel::COUNT]; RegionLabel::COUNT];
    for (&p, &g) in pred.data.iter().zip(&gt.data) {
        m[p as usize][g as usize] += 1;
    }
    Ok(m)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Fraction of mislabeled pixels under the label bijection that maximizes
/// agreement (exhaustive over the 5! assignments).
pub fn pixel_error(pred: &RegionMap, gt: &RegionMap) -> Result<f64> {
    let m = confusion_matrix(pred, gt)?;
    let best = permutations(RegionLabel::COUNT)
        .iter()
        .map(|perm| perm.iter().enumerate().map(|(p, &g)| m[p][g]).sum::<u64>())
        .max()
        .unwrap_or(0);
    let total = (pred.w * pred.h) as f64;
    Ok(1.0 - best as f64 / total)
}

pub fn evaluate(pred: &LayoutState, gt: &LayoutState, w: usize, h: usize) -> Result<EvalResult> {
    pred.validate(w, h)?;
    gt.validate(w, h)?;
    let (e_corner, matched_pairs) = corner_error(pred, gt, w, h);
    let e_pixel = pixel_error(&rasterize_regions(pred, w, h)?, &rasterize_regions(gt, w, h)?)?;
    Ok(EvalResult {
        e_corner,
        e_pixel,
        matched_pairs,
    })
}
