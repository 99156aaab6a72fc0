//! Couplings of finitely supported measures: Monge and adapted
//! approximation, compatibility checks, extreme-point decompositions,
//! randomized stopping times, and causal transport as linear programs.

pub mod adapted;
pub mod cli;
pub mod compat;
pub mod control;
pub mod error;
pub mod extreme;
pub mod families;
pub mod io;
pub mod lp;
pub mod measure;
pub mod monge;
pub mod oracles;
pub mod path;
pub mod random;
pub mod scalar;
pub mod stable;
pub mod stopping;
pub mod suite;
pub mod transport;

pub use error::{Error, Result};
pub use measure::{Axis, Coupling, DiscreteMeasure, FiniteSpace, Kernel, SpaceRef};
pub use scalar::{Rational, Scalar};
