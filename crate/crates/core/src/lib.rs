//! Debiased machine learning for difference-in-differences with sensitivity
//! analysis for violations of conditional parallel trends.

pub mod cli;
pub mod did;
pub mod error;
pub mod learners;
pub mod multi;
pub mod panel;
pub mod sensitivity;
pub mod simulation;
pub mod stats;

pub use error::{Error, ErrorKind, Result};
