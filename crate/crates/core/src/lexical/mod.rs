//! Surface-lexical analysis of disagreement subsets.
//!
//! Documents become L2-normalized TF-IDF vectors over a fitted vocabulary.
//! The two directional disagreement sets are then compared term by term
//! (mean difference, permutation p-value, Benjamini-Hochberg control) and as
//! whole distributions (KL divergence of their smoothed mean vectors).

mod contrast;
mod fdr;
mod kl;
mod permutation;
mod sparse;
mod tokenize;
mod vectorizer;

pub use contrast::{contrastive_diff, mean_vector, TermContrast};
pub use fdr::{bh_fdr, FdrResult};
pub use kl::{kl_divergence, TermDistribution};
pub use permutation::{permutation_test, permutation_tests, PValueRule, PermutationConfig};
pub use sparse::SparseVector;
pub use tokenize::{is_stopword, stopwords, tokenize, STOPWORDS_V1};
pub use vectorizer::{FitScope, StopwordSet, TokenPattern, VectorizerConfig, VectorizerModel};
