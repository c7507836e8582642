//! Wannier-Stark spectrum for rational field orientations.

pub mod chain;
pub mod monodromy;
pub mod sweep;

pub use chain::{central_bands, fold, ChainOptions, CentralLevels, WsChain};
pub use monodromy::{monodromy_spectrum, MonodromyResult};
