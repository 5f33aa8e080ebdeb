//! Phase-amplitude coordinates of limit-cycle dynamics, computed in the whole
//! basin of attraction.
//!
//! The library builds a truncated Fourier parametrization of a stable limit
//! cycle (harmonic balance or integrate-and-fit), extracts the cycle frequency
//! and Floquet exponents from the monodromy matrix, and evaluates the dominant
//! Koopman eigenfunctions through Fourier and Laplace averages along forward
//! trajectories. Level sets of those eigenfunctions are the isochrons and
//! isostables; their gradients (via the variational system) give the phase and
//! isostable response functions, which in turn drive reduced phase-amplitude
//! simulations under forcing.
//!
//! All numerical code is generic over the scalar type through the [`Real`]
//! trait (`f32` or `f64`); concrete `f64` aliases are exported at the crate
//! root.

pub mod angle;
pub mod averages;
pub mod chart;
pub mod cycle;
pub mod error;
pub mod fields;
pub mod flow;
pub mod fourier;
pub mod linalg;
pub mod models;
pub mod real;
pub mod reduction;
#[doc(hidden)]
pub mod testing;

pub use error::{Error, Result};
pub use real::Real;

/// Complex scalar used throughout.
pub type Complex<F> = num_complex::Complex<F>;

// Concrete f64 aliases for the main domain types.
pub type Model64 = models::Model<f64>;
pub type PolynomialField64 = models::PolynomialField<f64>;
pub type Trajectory64 = flow::Trajectory<f64>;
pub type KoopmanSpectrum64 = flow::KoopmanSpectrum<f64>;
pub type FourierOrbit64 = cycle::FourierOrbit<f64>;
pub type PolarChart64 = chart::PolarChart<f64>;
// placeholder until fields lands
// pub type GridField64 = fields::GridField<f64>;
// pub type InverseMap64 = fields::InverseMap<f64>;
