//! Learn to predict LLM benchmark scores from experiment-configuration
//! records, and search for a small subset of benchmark tasks whose results
//! recover performance on the remaining tasks for unseen model families.
//!
//! The pipeline is: ingest and filter experiment records ([`record`]),
//! encode them as feature vectors ([`featurize`]), split them under one of
//! several holdout protocols ([`splits`]), fit one of seven predictor
//! families ([`predict`]), score predictions ([`metrics`]), and search for
//! informative task subsets ([`smallbench`]). [`synth`] generates datasets
//! with known structure for testing, and [`driver`] wires everything into
//! the `capfore` command-line tool.

pub mod driver;
pub mod featurize;
pub mod metrics;
pub mod predict;
pub mod record;
pub mod seed;
pub mod smallbench;
pub mod splits;
pub mod synth;

mod error;

pub use error::{Error, Result};

// Guide chapters double as doctests: `cargo test --doc` compiles and runs
// every Rust snippet in book/src, so the book cannot drift from the code.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/records.md")]
    mod records {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/splits.md")]
    mod splits {}
    #[doc = include_str!("../../../book/src/predictors.md")]
    mod predictors {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/smallbench.md")]
    mod smallbench {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
