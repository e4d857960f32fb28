//! Exact greedy split search.

use crate::matrix::SortedColumns;
use crate::objective::split_gain;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitParams {
    pub lambda: f64,
    pub gamma: f64,
    /// Minimum hessian sum in each child.
    pub min_child_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    /// Midpoint between adjacent distinct values; rows with `x < threshold` go left.
    pub threshold: f64,
    pub gain: f64,
    pub(crate) left_rank_end: u32,
}

/// Best split of `rows` over `features`. Each feature's rows are visited in
/// ascending value order and every boundary between distinct values is a
/// candidate. Ties keep the lowest feature, then the lowest threshold.
/// `None` when no candidate has positive gain under the child weight limit.
pub fn best_split(
    cols: &SortedColumns,
    rows: &[usize],
    g: &[f64],
    h: &[f64],
    features: &[usize],
    p: &SplitParams,
) -> Option<Split> {
    if rows.len() < 2 {
        return None;
    }
    let (gt, ht) = rows.iter().fold((0.0, 0.0), |(a, b), &i| (a + g[i], b + h[i]));
    let mut best: Option<Split> = None;
    let mut sums: Vec<(f64, f64, u32)> = Vec::new();
    let mut present: Vec<usize> = Vec::new();
    let mut feats = features.to_vec();
    feats.sort_unstable();
    feats.dedup();
    for f in feats {
        let values = &cols.values[f];
        let rank = &cols.rank[f];
        sums.clear();
        sums.resize(values.len(), (0.0, 0.0, 0));
        for &i in rows {
            let s = &mut sums[rank[i] as usize];
            s.0 += g[i];
            s.1 += h[i];
            s.2 += 1;
        }
        present.clear();
        present.extend((0..values.len()).filter(|&r| sums[r].2 > 0));
        let (mut gl, mut hl) = (0.0, 0.0);
        for w in present.windows(2) {
            let (r, next) = (w[0], w[1]);
            gl += sums[r].0;
            hl += sums[r].1;
            let (gr, hr) = (gt - gl, ht - hl);
            if hl < p.min_child_weight || hr < p.min_child_weight {
                continue;
            }
            let gain = split_gain(gl, hl, gr, hr, p.lambda, p.gamma);
            if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                best = Some(Split {
                    feature: f,
                    threshold: 0.5 * (values[r] + values[next]),
                    gain,
                    left_rank_end: r as u32 + 1,
                });
            }
        }
    }
    best
}
