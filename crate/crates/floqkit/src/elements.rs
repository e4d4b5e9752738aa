//! Spectral-domain models of circuit elements.
//!
//! The only time-varying element is the flux-pumped SQUID array; capacitors,
//! resistors, and static inductors reduce to diagonal conversion matrices.
//! Inverse-inductance Fourier coefficients come in two flavors:
//!
//! * `Taylor3` - the closed-form third-order expansion for a single pump
//!   tone, kept because its truncation error against the quadrature route is
//!   itself a useful diagnostic;
//! * `Exact` - numerical quadrature of the closed-form `1/L(t)` over one
//!   base period, valid for up to two commensurate tones. This is the
//!   default for design work.

use num_complex::Complex;

use crate::grid::FrequencyGrid;
use crate::matrix::SpectralMatrix;
use crate::{Error, Result, Scalar, C, FLUX_QUANTUM};

/// Default flux margin keeping `cos(pi * flux)` bounded away from zero.
pub const FLUX_MARGIN: f64 = 0.01;

/// Default quadrature sample count for exact-mode coefficients.
pub const QUADRATURE_SAMPLES: usize = 4096;

/// One sinusoidal flux pump tone applied to a SQUID.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpTone<T> {
    /// Peak flux amplitude in units of the flux quantum.
    pub amplitude: T,
    /// Tone frequency as a multiple of the grid base frequency.
    pub harmonic: u32,
    /// Phase in radians.
    pub phase: T,
}

impl<T: Scalar> PumpTone<T> {
    pub fn new(amplitude: T, harmonic: u32, phase: T) -> Self {
        Self { amplitude, harmonic, phase }
    }
}

/// A stack of identical SQUIDs with a DC flux bias and up to two pump tones.
#[derive(Debug, Clone, PartialEq)]
pub struct SquidSpec<T> {
    /// Critical current per junction pair, amperes.
    pub i_c: T,
    /// Series stack count; inductance scales linearly with it.
    pub n_stack: u32,
    /// DC flux bias in units of the flux quantum.
    pub phi_dc: T,
    /// Flux pump tones (0, 1, or 2).
    pub pumps: Vec<PumpTone<T>>,
}

impl<T: Scalar> SquidSpec<T> {
    pub fn new(i_c: T, n_stack: u32, phi_dc: T) -> Self {
        Self { i_c, n_stack, phi_dc, pumps: Vec::new() }
    }

    pub fn with_pump(mut self, pump: PumpTone<T>) -> Self {
        self.pumps.push(pump);
        self
    }

    /// Validates positivity and the flux margin
    /// `|phi_dc| + sum(amplitudes) <= 0.5 - margin`.
    pub fn validate(&self) -> Result<()> {
        self.validate_with_margin(T::of(FLUX_MARGIN))
    }

    pub fn validate_with_margin(&self, margin: T) -> Result<()> {
        if self.i_c <= T::zero() {
            return Err(Error::InvalidParameter(format!(
                "critical current must be positive, got {}",
                self.i_c
            )));
        }
        if self.n_stack == 0 {
            return Err(Error::InvalidParameter("stack count must be >= 1".into()));
        }
        let mut excursion = self.phi_dc.abs();
        for p in &self.pumps {
            if p.amplitude < T::zero() || p.amplitude >= T::of(0.5) {
                return Err(Error::InvalidParameter(format!(
                    "pump amplitude {} outside [0, 0.5) Phi0",
                    p.amplitude
                )));
            }
            if p.harmonic == 0 {
                return Err(Error::InvalidParameter("pump harmonic must be >= 1".into()));
            }
            excursion += p.amplitude;
        }
        if excursion > T::of(0.5) - margin {
            return Err(Error::FluxBeyondHalfQuantum { flux_phi0: excursion.to_f64_lossy() });
        }
        Ok(())
    }

    /// Static stack inductance at the DC bias point, henries.
    pub fn static_inductance(&self) -> Result<T> {
        squid_inductance(self, self.phi_dc)
    }

    /// Instantaneous inverse inductance `1/L(t)` for the full stack, with
    /// every pump tone evaluated at its closed-form flux value.
    pub fn inverse_inductance_at(&self, t: T, f_base: T) -> T {
        let two_pi = T::of(2.0) * T::PI();
        let mut flux = self.phi_dc;
        for p in &self.pumps {
            flux += p.amplitude * (two_pi * T::of(p.harmonic as f64) * f_base * t + p.phase).cos();
        }
        let phi0 = T::of(FLUX_QUANTUM);
        T::of(4.0) * T::PI() * self.i_c / (T::of(self.n_stack as f64) * phi0)
            * (T::PI() * flux).cos()
    }
}

/// Stack inductance at an arbitrary flux (in flux-quantum units).
pub fn squid_inductance<T: Scalar>(spec: &SquidSpec<T>, flux_phi0: T) -> Result<T> {
    let cosine = (T::PI() * flux_phi0).cos();
    if cosine <= T::of(1e-6) {
        return Err(Error::FluxBeyondHalfQuantum { flux_phi0: flux_phi0.to_f64_lossy() });
    }
    let phi0 = T::of(FLUX_QUANTUM);
    Ok(T::of(spec.n_stack as f64) * phi0 / (T::of(4.0) * T::PI() * spec.i_c * cosine))
}

/// Which inverse-inductance expansion to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoefficientMode {
    /// Third-order Taylor expansion, single tone only.
    Taylor3,
    /// Quadrature of the closed form over one base period.
    #[default]
    Exact,
}

/// Fourier coefficients of `1/L(t)` on the base-harmonic ladder.
///
/// `coeff(q)` multiplies `exp(j q w_base t)` and already carries the pump
/// phase factors, so a tone at harmonic `m` with phase `theta` contributes
/// `F_p * exp(j p theta)` at `q = p * m`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierLCoefficients<T> {
    p_max: usize,
    coeffs: Vec<C<T>>,
}

impl<T: Scalar> FourierLCoefficients<T> {
    pub fn p_max(&self) -> usize {
        self.p_max
    }

    /// Coefficient at ladder offset `q`; zero outside the stored range.
    pub fn coeff(&self, q: i64) -> C<T> {
        if q.unsigned_abs() as usize > self.p_max {
            Complex::new(T::zero(), T::zero())
        } else {
            self.coeffs[(q + self.p_max as i64) as usize]
        }
    }

    /// Time-domain reconstruction `sum_q G_q exp(j q w_base t)`.
    pub fn reconstruct(&self, t: T, f_base: T) -> C<T> {
        let two_pi = T::of(2.0) * T::PI();
        let mut acc = Complex::new(T::zero(), T::zero());
        for q in -(self.p_max as i64)..=(self.p_max as i64) {
            let angle = two_pi * T::of(q as f64) * f_base * t;
            acc = acc + self.coeff(q) * Complex::from_polar(T::one(), angle);
        }
        acc
    }
}

/// Fourier coefficients of the stack inverse inductance.
///
/// `p_max` is the highest retained ladder offset; exact mode uses
/// [`QUADRATURE_SAMPLES`] uniform samples (the trapezoid rule for a periodic
/// integrand).
pub fn inverse_inductance_coefficients<T: Scalar>(
    spec: &SquidSpec<T>,
    mode: CoefficientMode,
    p_max: usize,
) -> Result<FourierLCoefficients<T>> {
    inverse_inductance_coefficients_sampled(spec, mode, p_max, QUADRATURE_SAMPLES)
}

/// Same as [`inverse_inductance_coefficients`] with an explicit sample count.
pub fn inverse_inductance_coefficients_sampled<T: Scalar>(
    spec: &SquidSpec<T>,
    mode: CoefficientMode,
    p_max: usize,
    samples: usize,
) -> Result<FourierLCoefficients<T>> {
    spec.validate()?;
    match mode {
        CoefficientMode::Taylor3 => taylor3_coefficients(spec, p_max),
        CoefficientMode::Exact => {
            if spec.pumps.len() > 2 {
                return Err(Error::UnsupportedPumpCount(spec.pumps.len()));
            }
            Ok(quadrature_coefficients(spec, p_max, samples))
        }
    }
}

fn taylor3_coefficients<T: Scalar>(
    spec: &SquidSpec<T>,
    p_max: usize,
) -> Result<FourierLCoefficients<T>> {
    if spec.pumps.len() > 1 {
        return Err(Error::UnsupportedPumpCount(spec.pumps.len()));
    }
    let phi0 = T::of(FLUX_QUANTUM);
    let amp = T::of(4.0) * T::PI() * spec.i_c / (T::of(spec.n_stack as f64) * phi0);
    let bias = T::PI() * spec.phi_dc;
    let (dphi, harmonic, theta) = match spec.pumps.first() {
        Some(p) => (p.amplitude, p.harmonic as i64, p.phase),
        None => (T::zero(), 1, T::zero()),
    };
    let z = T::PI() * dphi;
    let half = amp / T::of(2.0);
    // cosine-pump expansion through third order; magnitudes match the
    // quadrature route to O(z^4)
    let f = [
        amp * bias.cos() * (T::one() - z * z / T::of(4.0)),
        -half * bias.sin() * (z - z * z * z / T::of(8.0)),
        -half * bias.cos() * (z * z / T::of(4.0)),
        half * bias.sin() * (z * z * z / T::of(24.0)),
    ];
    let mut coeffs = vec![Complex::new(T::zero(), T::zero()); 2 * p_max + 1];
    for p in -3i64..=3 {
        let q = p * harmonic;
        if q.unsigned_abs() as usize > p_max {
            continue;
        }
        let phase = Complex::from_polar(T::one(), T::of(p as f64) * theta);
        coeffs[(q + p_max as i64) as usize] =
            coeffs[(q + p_max as i64) as usize] + phase * f[p.unsigned_abs() as usize];
    }
    Ok(FourierLCoefficients { p_max, coeffs })
}

fn quadrature_coefficients<T: Scalar>(
    spec: &SquidSpec<T>,
    p_max: usize,
    samples: usize,
) -> FourierLCoefficients<T> {
    let n = samples.max(4 * p_max + 4);
    let two_pi = T::of(2.0) * T::PI();
    // sample 1/L(t) over one base period at unit base frequency; only the
    // product f_base * t enters, so f_base scales out
    let values: Vec<T> =
        (0..n).map(|s| spec.inverse_inductance_at(T::of(s as f64 / n as f64), T::one())).collect();
    let mut coeffs = vec![Complex::new(T::zero(), T::zero()); 2 * p_max + 1];
    for q in -(p_max as i64)..=(p_max as i64) {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (s, &g) in values.iter().enumerate() {
            let angle = -two_pi * T::of(q as f64) * T::of(s as f64 / n as f64);
            acc = acc + Complex::from_polar(g, angle);
        }
        coeffs[(q + p_max as i64) as usize] = acc / T::of(n as f64);
    }
    FourierLCoefficients { p_max, coeffs }
}

/// Conversion matrix of a flux-pumped SQUID stack.
///
/// Entry `(k, k - q)` holds `G_q / (j w_{k-q})`: the coefficient ladder of
/// `1/L(t)` convolved with the spectral integration matrix, so the
/// denominator carries the input-column frequency.
pub fn squid_spectral_admittance<T: Scalar>(
    spec: &SquidSpec<T>,
    grid: &FrequencyGrid<T>,
    mode: CoefficientMode,
) -> Result<SpectralMatrix<T>> {
    let p_max = 2 * grid.k_max();
    let coeffs = inverse_inductance_coefficients(spec, mode, p_max)?;
    Ok(convolution_admittance(&coeffs, grid))
}

/// Assembles the admittance matrix from precomputed coefficients.
pub fn convolution_admittance<T: Scalar>(
    coeffs: &FourierLCoefficients<T>,
    grid: &FrequencyGrid<T>,
) -> SpectralMatrix<T> {
    let dim = grid.dim();
    let k_max = grid.k_max() as i64;
    let mut y = SpectralMatrix::zeros(dim);
    for col_k in -k_max..=k_max {
        let col = grid.index_of(col_k);
        let jw = Complex::new(T::zero(), grid.omega(col_k));
        for q in -(coeffs.p_max() as i64)..=(coeffs.p_max() as i64) {
            let row_k = col_k + q;
            if row_k.abs() > k_max {
                continue;
            }
            let g = coeffs.coeff(q);
            if g == Complex::new(T::zero(), T::zero()) {
                continue;
            }
            let row = grid.index_of(row_k);
            y[(row, col)] = y[(row, col)] + g / jw;
        }
    }
    y
}

/// Diagonal admittance of a (possibly negative) capacitor: `j w_k C`.
pub fn capacitor_spectral_admittance<T: Scalar>(
    c: T,
    grid: &FrequencyGrid<T>,
) -> SpectralMatrix<T> {
    let diag: Vec<C<T>> =
        grid.harmonics().map(|k| Complex::new(T::zero(), grid.omega(k) * c)).collect();
    SpectralMatrix::from_diag(&diag)
}

/// Diagonal admittance of a resistor: `1/R`.
pub fn resistor_spectral_admittance<T: Scalar>(
    r: T,
    grid: &FrequencyGrid<T>,
) -> Result<SpectralMatrix<T>> {
    if r <= T::zero() {
        return Err(Error::NonPositiveResistance(r.to_f64_lossy()));
    }
    let g = T::one() / r;
    let diag: Vec<C<T>> = grid.harmonics().map(|_| Complex::new(g, T::zero())).collect();
    Ok(SpectralMatrix::from_diag(&diag))
}

/// Diagonal admittance of a static inductor: `1 / (j w_k L)`.
pub fn inductor_spectral_admittance<T: Scalar>(
    l: T,
    grid: &FrequencyGrid<T>,
) -> SpectralMatrix<T> {
    let diag: Vec<C<T>> = grid
        .harmonics()
        .map(|k| Complex::new(T::one(), T::zero()) / Complex::new(T::zero(), grid.omega(k) * l))
        .collect();
    SpectralMatrix::from_diag(&diag)
}
