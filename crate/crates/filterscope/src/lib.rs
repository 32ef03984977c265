//! IO, HTTP labeling, pipeline orchestration and reports on top of
//! [`filterscope_core`].

pub mod backend;
pub mod config;
pub mod corpus_io;
pub mod diagnose;
mod error;
pub mod labeling;
pub mod labels_io;
pub mod report;
pub mod synthetic;

pub use error::{Error, Result, EXIT_BACKEND, EXIT_VALIDATION};
pub use filterscope_core as core;
