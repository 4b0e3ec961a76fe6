//! Static duplicate-step detection for Gherkin suites.
//!
//! The pipeline runs from parsing ([`gherkin`], [`scan`]) through step
//! identity ([`identity`]) and pairwise similarity ([`similarity`]) to
//! clustering ([`detect`]). [`calibration`] and [`relabel`] evaluate
//! detectors against labelled pairs, and [`savings`] turns clusters into
//! eliminable-occurrence estimates.

pub mod calibration;
pub mod detect;
pub mod error;
pub mod gherkin;
pub mod identity;
pub mod relabel;
pub mod savings;
pub mod scan;
pub mod similarity;

pub use error::{Error, Result};
