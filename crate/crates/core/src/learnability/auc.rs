use alloc::vec::Vec;

use crate::error::domain;
use crate::Result;

/// Rank-based (Mann-Whitney) ROC-AUC; tied scores count one half.
///
/// The rank sum is kept in exact integer arithmetic (ranks doubled so
/// midranks stay integral). The final ratio is taken from whichever side of
/// one half it lies on, so flipping every label yields exactly `1 - auc`.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(domain!("{} scores but {} labels", scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(domain!("scores contain NaN"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(domain!("AUC needs both classes (got {n_pos} positive, {n_neg} negative)"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of doubled 1-based midranks of the positives.
    let mut pos_rank_sum2: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let midrank2 = (start + 1 + end) as u128;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i]).count() as u128;
        pos_rank_sum2 += midrank2 * pos_in_group;
        start = end;
    }

    let numer = pos_rank_sum2 - n_pos * (n_pos + 1);
    let denom = 2 * n_pos * n_neg;
    Ok(if 2 * numer <= denom { numer as f64 / denom as f64 } else { 1.0 - (denom - numer) as f64 / denom as f64 })
}
