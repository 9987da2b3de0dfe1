//! Cold-start golf package recommendation: user segmentation, option and
//! price similarity, course co-occurrence filtering, fused ranking and a
//! temporal evaluation harness over synthetic booking corpora.

pub mod behavior;
pub mod coursecf;
pub mod domain;
pub mod error;
pub mod evalharness;
pub mod io;
pub mod optionsim;
pub mod pricesim;
pub mod ranker;
pub mod reference;
pub mod report;
pub mod stats;
pub mod store;
pub mod synthgen;

pub use error::{Error, Result};
