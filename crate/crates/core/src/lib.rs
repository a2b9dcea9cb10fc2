//! Language-side processing of recognizer N-best lists: speech-repair
//! expansion, parsing with a corpus-specialised unification grammar, and
//! trained preference-based selection of one analysis.

pub mod analysis;
pub mod error;
pub mod grammar;
pub mod lexicon;
pub mod pipeline;
pub mod preference;
pub mod repair;
pub mod specialize;

pub use error::{Error, Result};
