//! Certified `ℓ0` robustness of top-k predictions for classifiers smoothed by
//! randomized ablation.

pub mod ablation;
pub mod beta_bounds;
pub mod certify;
pub mod cli;
pub mod error;
pub mod exact_prob;
pub mod oracle;
pub mod radius;

pub use error::{Error, Result};

// Keeps the guide's snippets compiling and passing.
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/exact-probabilities.md")]
mod book_exact_probabilities {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/confidence-bounds.md")]
mod book_confidence_bounds {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/certified-radius.md")]
mod book_certified_radius {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/ablation.md")]
mod book_ablation {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/certification.md")]
mod book_certification {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/oracles.md")]
mod book_oracles {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
