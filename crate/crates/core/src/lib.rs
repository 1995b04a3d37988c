//! Word-level prosodic prominence: acoustic annotation with a continuous
//! wavelet transform over composite pitch/energy/duration signals, and
//! text-only taggers that predict the resulting discrete labels.
//!
//! The annotation path runs
//! [`acoustics`] → [`conditioning`] → [`prominence`] → [`discretize`];
//! the prediction path is [`taggers`] scored by [`eval`]. [`corpus_io`]
//! owns every on-disk format.

pub mod acoustics;
pub mod conditioning;
pub mod config;
pub mod corpus_io;
pub mod discretize;
pub mod error;
pub mod eval;
pub mod prominence;
pub mod taggers;

pub use error::{Error, Result};
