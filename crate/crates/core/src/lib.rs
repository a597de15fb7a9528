//! Unsupervised answer ranking for complex questions over a fixed set of
//! retrieved documents: answer-type classification, typed entity candidates,
//! sentence-level semantic evidence, score combination with tie groups, and
//! tie-aware evaluation.

pub mod corpus;
pub mod entities;
pub mod error;
pub mod evaluation;
pub mod qtype;
pub mod ranking;
pub mod pipeline;
pub mod scoring;

pub use error::{Error, Result};
