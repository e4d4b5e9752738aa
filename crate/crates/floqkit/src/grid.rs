//! Signed intermodulation frequency ladder.

use crate::{Error, Result, Scalar};

/// Default DC guard in Hz: grid frequencies closer to zero than this are
/// rejected because the spectral integration matrix has a `1/f` pole there.
pub const DC_GUARD_HZ: f64 = 1.0;

/// The intermodulation ladder `f_signal + k * f_base` for `k in -K..=K`.
///
/// Every spectral matrix in the crate is indexed by the signed harmonic
/// offset `k`, never by raw row offsets; conversion between the two lives
/// here and nowhere else. Frequencies may be negative (conjugate idlers for
/// three-wave mixing devices), but never inside the DC guard band.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid<T> {
    f_signal: T,
    f_base: T,
    k_max: usize,
    freqs: Vec<T>,
}

impl<T: Scalar> FrequencyGrid<T> {
    /// Builds the ladder with the default DC guard.
    pub fn build(f_signal: T, f_base: T, k_max: usize) -> Result<Self> {
        Self::build_with_guard(f_signal, f_base, k_max, T::of(DC_GUARD_HZ))
    }

    /// Builds the ladder, rejecting any `|f_k| < eps_f`.
    pub fn build_with_guard(f_signal: T, f_base: T, k_max: usize, eps_f: T) -> Result<Self> {
        if f_base <= T::zero() {
            return Err(Error::NonPositiveBase(f_base.to_f64_lossy()));
        }
        let mut freqs = Vec::with_capacity(2 * k_max + 1);
        for k in -(k_max as i64)..=(k_max as i64) {
            let f = f_signal + T::of(k as f64) * f_base;
            if f.abs() < eps_f {
                return Err(Error::ZeroFrequencyOnGrid {
                    k,
                    f_hz: f.to_f64_lossy(),
                    eps_hz: eps_f.to_f64_lossy(),
                });
            }
            freqs.push(f);
        }
        Ok(Self { f_signal, f_base, k_max, freqs })
    }

    /// Number of harmonics on the ladder, `2K + 1`.
    pub fn dim(&self) -> usize {
        2 * self.k_max + 1
    }

    /// Truncation order `K`.
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Analysis (input) frequency in Hz.
    pub fn f_signal(&self) -> T {
        self.f_signal
    }

    /// Base modulation frequency in Hz.
    pub fn f_base(&self) -> T {
        self.f_base
    }

    /// All ladder frequencies in Hz, ordered by `k`.
    pub fn freqs(&self) -> &[T] {
        &self.freqs
    }

    /// Row/column index of harmonic `k`.
    pub fn index_of(&self, k: i64) -> usize {
        debug_assert!(k.unsigned_abs() as usize <= self.k_max);
        (k + self.k_max as i64) as usize
    }

    /// Harmonic offset of row/column `idx`.
    pub fn harmonic_of(&self, idx: usize) -> i64 {
        idx as i64 - self.k_max as i64
    }

    /// Frequency of harmonic `k` in Hz.
    pub fn freq(&self, k: i64) -> T {
        self.freqs[self.index_of(k)]
    }

    /// Angular frequency of harmonic `k` in rad/s.
    pub fn omega(&self, k: i64) -> T {
        T::of(2.0) * T::PI() * self.freq(k)
    }

    /// Iterator over signed harmonic offsets `-K..=K`.
    pub fn harmonics(&self) -> impl Iterator<Item = i64> {
        let k = self.k_max as i64;
        -k..=k
    }

    /// Same ladder rebuilt at another analysis frequency.
    pub fn retuned(&self, f_signal: T) -> Result<Self> {
        Self::build(f_signal, self.f_base, self.k_max)
    }

    /// Same ladder rebuilt at another truncation order.
    pub fn with_k_max(&self, k_max: usize) -> Result<Self> {
        Self::build(self.f_signal, self.f_base, k_max)
    }
}
