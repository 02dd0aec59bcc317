//! Pricing engine for markets driven by sub-mixed fractional Brownian motion
//! with compound Poisson jumps.
//!
//! Three independent routes price the same contracts: a Grünwald-Letnikov
//! finite-difference solver for the fractional integro-PDE ([`pide`]), a
//! double transform inversion ([`transform`]) and Monte Carlo on the
//! underlying process ([`montecarlo`]). Calibration and Greeks sit on top.

pub mod calibration;
pub mod closed_form;
pub mod error;
pub mod greeks;
pub mod io;
pub mod linalg;
pub mod measure;
pub mod model;
pub mod montecarlo;
pub mod pide;
pub mod process;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod specialfn;
pub mod transform;

pub use error::{Error, Result};
pub use model::{Diagnostics, Method, ModelParams, OptionContract, OptionKind, Pricer, PricingResult};
pub use scalar::{HyperDual, Real};
