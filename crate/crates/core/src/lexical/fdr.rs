use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::domain;
use crate::Result;

/// Benjamini-Hochberg decisions, in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrResult {
    pub rejected: Vec<bool>,
    pub adjusted: Vec<f64>,
}

impl FdrResult {
    pub fn n_rejected(&self) -> usize {
        self.rejected.iter().filter(|&&r| r).count()
    }
}

/// Step-up Benjamini-Hochberg at level `alpha`.
///
/// With p sorted ascending, finds the largest rank `i` such that
/// `p(i) <= (i / m) * alpha` and rejects ranks `1..=i`. Adjusted values are
/// `min(1, min_{j >= i} p(j) * m / j)`.
pub fn bh_fdr(p_values: &[f64], alpha: f64) -> Result<FdrResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain!("alpha must lie in (0, 1), got {alpha}"));
    }
    if let Some(p) = p_values.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(domain!("p-value {p} outside (0, 1]"));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| p_values[x].total_cmp(&p_values[y]).then(x.cmp(&y)));

    let mf = m as f64;
    let cutoff = order
        .iter()
        .enumerate()
        .rev()
        .find(|&(rank0, &idx)| p_values[idx] <= ((rank0 + 1) as f64 / mf) * alpha)
        .map_or(0, |(rank0, _)| rank0 + 1);

    let mut rejected = vec![false; m];
    for &idx in &order[..cutoff] {
        rejected[idx] = true;
    }

    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank0, &idx) in order.iter().enumerate().rev() {
        let candidate = (p_values[idx] * mf / (rank0 + 1) as f64).min(1.0);
        running = running.min(candidate);
        adjusted[idx] = running;
    }
    Ok(FdrResult { rejected, adjusted })
}
