//! Exact moment bounds and anti-concentration certificates for balls thrown
//! into bins by limited-independence hash families, with the resulting
//! impossibility region for condensers.

pub mod anticoncentration;
pub mod asymptotics;
pub mod cache;
pub mod combinatorics;
pub mod condenser;
pub mod error;
pub mod gf2;
pub mod interval;
pub mod moments;
pub mod simulate;
pub mod wire;

pub use combinatorics::{BellSequence, Natural, StirlingTable};
pub use error::{Error, Result};
pub use interval::{Dyadic, FloatInterval};
