//! Best approximation along nested subspace chains: distances, separation
//! profiles, lethargy index machinery, witness construction and sandwich
//! verification in finite-dimensional normed spaces.

pub mod analytics;
pub mod demo;
pub mod distance;
pub mod error;
pub mod machinery;
pub mod report;
pub mod scenario;
pub mod simplex;
pub mod space;
pub mod witness;

pub use error::{Error, Result};
