//! Floquet scattering analysis of flux-pumped SQUID resonator networks.
//!
//! `floqkit` models linear time-varying microwave networks built from
//! SQUID-based resonators whose inductance is modulated by sinusoidal flux
//! pumps. Periodic modulation at a base frequency couples an input tone to
//! the intermodulation ladder `f + k*f_base`, and the crate represents every
//! element as a matrix over that ladder (a conversion matrix). Two solver
//! engines share the representation:
//!
//! * [`twoport`] cascades spectral ABCD blocks for series-coupled resonator
//!   chains (isolators, directional amplifiers),
//! * [`mna`] stamps a block nodal system for arbitrary topologies
//!   (wye-coupled circulators, multi-layer networks),
//!
//! and [`tdoracle`] integrates the exact time-domain circuit equations to
//! verify both against an independent reference. [`devices`] provides
//! parameterized templates for the supported device families and [`sweep`]
//! drives parametric studies and derivative-free optimization of the
//! modulation parameters.
//!
//! Core math is generic over the real scalar type through [`Scalar`];
//! concrete `f64` aliases are exported at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::float::FloatConst;
use num_traits::{Float, FromPrimitive, NumAssign};

pub mod devices;
pub mod elements;
pub mod error;
pub mod grid;
pub mod matrix;
pub mod mna;
pub mod sparams;
pub mod sweep;
pub mod tdoracle;
pub mod twoport;

pub use error::Error;
pub use grid::FrequencyGrid;
pub use matrix::{SpectralAbcd, SpectralMatrix, SpectralVector};
pub use mna::DeviceGraph;
pub use sparams::FloquetSMatrix;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Real scalar type the solvers are generic over.
///
/// `f32` and `f64` both satisfy the bound; the published tolerances assume
/// `f64` precision.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Send + Sync + Debug + Display + 'static
{
    /// Lossy conversion from `f64`, for literals inside generic code.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Lossy conversion to `f64`, for diagnostics and output formatting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + NumAssign
        + Sum
        + Send
        + Sync
        + Debug
        + Display
        + 'static
{
}

/// Complex number over the crate scalar.
pub type C<T> = num_complex::Complex<T>;

/// `f64` frequency grid.
pub type Grid64 = FrequencyGrid<f64>;
/// `f64` spectral (conversion) matrix.
pub type SpectralMatrix64 = SpectralMatrix<f64>;
/// `f64` spectral ABCD block matrix.
pub type SpectralAbcd64 = SpectralAbcd<f64>;
/// `f64` Floquet scattering matrix.
pub type FloquetSMatrix64 = FloquetSMatrix<f64>;
/// `f64` device graph.
pub type DeviceGraph64 = DeviceGraph<f64>;

/// Magnetic flux quantum in webers.
pub const FLUX_QUANTUM: f64 = 2.067833848e-15;

/// Wave-amplitude magnitude in dB, floored to keep logs finite.
pub fn db<T: Scalar>(x: T) -> T {
    let floor = T::of(1e-300);
    T::of(20.0) * x.max(floor).log10()
}
