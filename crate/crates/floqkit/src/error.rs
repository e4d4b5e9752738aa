//! Error type shared by all solver modules.

use thiserror::Error;

/// Errors produced by grid construction, element models, solvers, and
/// device templates.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The modulation base frequency must be strictly positive.
    #[error("modulation base frequency must be positive, got {0} Hz")]
    NonPositiveBase(f64),

    /// A grid frequency fell inside the DC guard band, where the spectral
    /// integration matrix diverges.
    #[error("grid frequency at k = {k} is {f_hz} Hz, within {eps_hz} Hz of DC")]
    ZeroFrequencyOnGrid { k: i64, f_hz: f64, eps_hz: f64 },

    /// A block linear system was singular or too ill-conditioned to trust;
    /// usually a resonance landing exactly on a grid frequency.
    #[error("singular block system (condition estimate {cond:.3e})")]
    SingularSystem { cond: f64 },

    /// The requested flux bias drives `cos(pi * flux)` to zero and the SQUID
    /// inductance to infinity.
    #[error("flux {flux_phi0} Phi0 is at or beyond half a flux quantum")]
    FluxBeyondHalfQuantum { flux_phi0: f64 },

    /// The third-order Taylor coefficient model is single-tone only.
    #[error("taylor3 mode supports exactly one pump tone, got {0}")]
    UnsupportedPumpCount(usize),

    /// Resistors must have positive resistance.
    #[error("resistance must be positive, got {0} ohm")]
    NonPositiveResistance(f64),

    /// Admittance inverters must have positive characteristic admittance.
    #[error("inverter admittance must be positive, got {0} S")]
    NonPositiveJ(f64),

    /// Two spectral objects built against different grids were combined.
    #[error("spectral dimension mismatch: {0} vs {1}")]
    GridMismatch(usize, usize),

    /// A graph element references a node that does not exist.
    #[error("element `{element}` references unknown node `{node}`")]
    DanglingNode { element: String, node: String },

    /// The time-domain oracle has no model for this element.
    #[error("no time-domain model for element `{0}`")]
    UnsupportedElement(String),

    /// The oracle integration hit its period cap without settling.
    #[error("no steady state after {0} analysis windows")]
    NoSteadyState(usize),

    /// Harmonic extraction was asked to separate frequencies closer than
    /// the analysis window can resolve.
    #[error("harmonic projection ill-conditioned: grid spacing below window resolution")]
    IllConditionedProjection,

    /// A pump tone frequency is not an integer multiple of the grid base.
    #[error("pump at {f_hz} Hz is not an integer multiple of base {f_base} Hz")]
    IncommensuratePump { f_hz: f64, f_base: f64 },

    /// Absorbing a pi-realization shunt correction would leave a resonator
    /// capacitor non-positive.
    #[error("absorbing {c_absorb} F into {c_res} F capacitor leaves it non-positive")]
    NegativeAbsorbedCapacitance { c_res: f64, c_absorb: f64 },

    /// The optimizer failed to improve on the starting point within its
    /// restart budget.
    #[error("optimizer made no improvement within the restart budget")]
    NoImprovement,

    /// Catch-all for template and specification parameter validation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
