//! Core algorithms for diagnosing where two LLM relevance filters disagree.
//!
//! Everything here is `no_std` and only needs `alloc`: text cleaning and
//! corpus bookkeeping, prompt rendering and response parsing, agreement
//! statistics, TF-IDF contrast analysis with permutation tests and FDR
//! control, cosine retrieval over disagreement pools, and a logistic
//! regression probe. File formats, HTTP backends and the command line live
//! in the `filterscope` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod agreement;
pub mod corpus;
mod error;
pub mod labeling;
pub mod learnability;
pub mod lexical;
pub mod retrieval;
pub mod seed;

pub use error::{Error, Result};
