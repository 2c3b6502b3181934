//! Monte-Carlo simulator of wavepacket reduction in single-quantum
//! interferometry.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod optics;
pub mod reduction;
pub mod stats;
pub mod wavepacket;

pub use error::{Error, Result};
