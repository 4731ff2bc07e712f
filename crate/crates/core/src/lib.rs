//! Artificial-grammar benchmark generation for selective sequence models.
//!
//! * [`grammar`]: partially observable Markov chains with exact disambiguability.
//! * [`complexity`]: topological entropy of the Boolean transition graph.
//! * [`tasks`]: the four benchmark tasks, token encoding and accuracy.
//! * [`oracle`]: belief-tracking disambiguator that certifies datasets.
//! * [`kernels`]: forward-only linear recurrent memory cells and their checks.
//! * [`io`]: configuration profiles, dataset files and manifests.

pub mod complexity;
pub mod error;
pub mod grammar;
pub mod io;
pub mod kernels;
pub mod oracle;
pub mod rng;
pub mod tasks;

pub use error::{Error, Result};
