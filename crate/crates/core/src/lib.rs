//! Stress detection from wrist-worn sensor recordings.

pub mod dataset;
pub mod features;
pub mod gradcheck;
pub mod harness;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod seed;
pub mod signal;
pub mod synth;

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/signals.md")]
    mod signals {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/neural-core.md")]
    mod neural_core {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/synth-and-cli.md")]
    mod synth_and_cli {}
}
