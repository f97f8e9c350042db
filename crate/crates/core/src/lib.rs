//! Coherence of signal varieties and Monte Carlo checks of the sampling
//! rates that make a generic signal identifiable from random coordinates.
//!
//! * [`linflat`]: affine flats, leverage scores, maximally incoherent flats.
//! * [`variety`]: parameterized varieties, tangent flats, pointwise and
//!   closed-form coherence.
//! * [`sampling`]: Bernoulli coordinate masks and Gaussian linear maps.
//! * [`identify`]: rank-based identifiability verdicts and the contraction
//!   diagnostic.
//! * [`experiment`]: phase-transition sweeps, reference curves and the
//!   planar rigidity brute-force oracle.
//! * [`cli`]: the `cohlab` command line.

pub mod cli;
pub mod error;
pub mod experiment;
pub mod identify;
pub mod linalg;
pub mod linflat;
pub mod rng;
pub mod sampling;
pub mod variety;

pub use error::{Error, Result};
pub use linflat::Flat;
pub use sampling::{LinearMeasurement, SampleMask};
pub use variety::{Point, VarietyModel};
