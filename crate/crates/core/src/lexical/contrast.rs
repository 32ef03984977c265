use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::sparse::SparseVector;
use crate::error::domain;
use crate::Result;

/// Per-term means of the two sets; `delta = mean_b - mean_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermContrast {
    pub term_index: u32,
    pub term: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub delta: f64,
}

/// Dense per-term arithmetic mean; absent terms count as zero.
pub fn mean_vector(vectors: &[SparseVector], dim: usize) -> Result<Vec<f64>> {
    if vectors.is_empty() {
        return Err(domain!("mean of an empty vector set"));
    }
    let mut sums = vec![0.0; dim];
    for v in vectors {
        for (i, w) in v.iter() {
            let slot = sums.get_mut(i as usize).ok_or_else(|| domain!("term index {i} outside dimension {dim}"))?;
            *slot += w;
        }
    }
    let n = vectors.len() as f64;
    for s in &mut sums {
        *s /= n;
    }
    Ok(sums)
}

/// Ranks vocabulary terms by `|mean_b - mean_a|`, largest first, ties in
/// lexicographic term order, and keeps the first `top_n`.
pub fn contrastive_diff(
    set_a: &[SparseVector],
    set_b: &[SparseVector],
    vocabulary: &[String],
    top_n: usize,
) -> Result<Vec<TermContrast>> {
    if top_n < 1 {
        return Err(domain!("top_n must be at least 1"));
    }
    if set_a.is_empty() || set_b.is_empty() {
        return Err(domain!("contrast needs two non-empty sets (got {} and {})", set_a.len(), set_b.len()));
    }
    let dim = vocabulary.len();
    let mean_a = mean_vector(set_a, dim)?;
    let mean_b = mean_vector(set_b, dim)?;
    let mut terms: Vec<TermContrast> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, term)| TermContrast {
            term_index: i as u32,
            term: term.clone(),
            mean_a: mean_a[i],
            mean_b: mean_b[i],
            delta: mean_b[i] - mean_a[i],
        })
        .collect();
    terms.sort_by(|x, y| y.delta.abs().total_cmp(&x.delta.abs()).then_with(|| x.term.cmp(&y.term)));
    terms.truncate(top_n);
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn one_hot(i: u32) -> SparseVector {
        SparseVector::new(vec![i], vec![1.0]).unwrap()
    }

    #[test]
    fn means() {
        let v = SparseVector::new(vec![0, 2], vec![0.6, 0.8]).unwrap();
        assert_eq!(mean_vector(core::slice::from_ref(&v), 3).unwrap(), [0.6, 0.0, 0.8]);
        assert_eq!(mean_vector(&[one_hot(0), one_hot(1)], 2).unwrap(), [0.5, 0.5]);
        assert!(mean_vector(&[], 2).is_err());
    }

    #[test]
    fn identical_sets_have_zero_delta() {
        let vocab: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let set = [one_hot(0), one_hot(1)];
        let out = contrastive_diff(&set, &set, &vocab, 10).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|t| t.delta == 0.0));
        assert_eq!(out[0].term, "a");
    }

    #[test]
    fn rejects_bad_arguments() {
        let vocab = vec!["a".to_string()];
        assert!(contrastive_diff(&[one_hot(0)], &[one_hot(0)], &vocab, 0).is_err());
        assert!(contrastive_diff(&[], &[one_hot(0)], &vocab, 1).is_err());
    }
}
