//! Wannier-Stark ladders of a quantum particle in a tilted two-sublattice
//! square lattice.
//!
//! The crate covers the Bloch problem ([`lattice`]), Wannier-Stark bands for
//! rational field orientations computed two ways ([`ws`]), their strong- and
//! weak-field asymptotics ([`asymptotics`]), real-space wave-packet spreading
//! ([`wavepacket`]) and interband Landau-Zener dynamics ([`lz`]).
//!
//! Units: hbar = 1, the nearest-neighbour distance of the square lattice is 1,
//! and the primary axes of the two-sublattice structure are rotated by 45
//! degrees with period `a = sqrt(2)`.

pub mod asymptotics;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod lz;
pub mod magnus;
pub mod special;
pub mod stats;
pub mod wavepacket;
pub mod ws;

pub use error::{Error, Result};
pub use lattice::{FieldSpec, LatticeParams, Orientation, Rational};

pub use num_complex::Complex64 as C64;

/// Period of the primary (rotated) lattice.
pub const PRIMARY_PERIOD: f64 = std::f64::consts::SQRT_2;
