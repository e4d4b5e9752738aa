//! Floquet scattering matrices indexed by (port, harmonic).

use crate::grid::FrequencyGrid;
use crate::matrix::SpectralMatrix;
use crate::{db, Scalar, C};

/// Scattering coefficients between every (port, harmonic) pair.
///
/// Entry `(p_out, k_out; p_in, k_in)` is the outgoing wave amplitude at port
/// `p_out` and ladder offset `k_out` for a unit incident wave at `p_in`,
/// `k_in`. Wave normalization uses the real port impedance at every
/// harmonic, including negative-frequency ones, so parametric gain simply
/// shows up as entries with magnitude above one.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetSMatrix<T> {
    n_ports: usize,
    k_max: usize,
    data: Vec<C<T>>,
}

impl<T: Scalar> FloquetSMatrix<T> {
    pub(crate) fn zeros(n_ports: usize, k_max: usize) -> Self {
        let dim = n_ports * (2 * k_max + 1);
        Self { n_ports, k_max, data: vec![C::new(T::zero(), T::zero()); dim * dim] }
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Harmonics per port, `2K + 1`.
    pub fn harmonic_dim(&self) -> usize {
        2 * self.k_max + 1
    }

    /// Total matrix dimension, `n_ports * (2K + 1)`.
    pub fn dim(&self) -> usize {
        self.n_ports * self.harmonic_dim()
    }

    fn flat(&self, port: usize, k: i64) -> usize {
        debug_assert!(port < self.n_ports);
        debug_assert!(k.unsigned_abs() as usize <= self.k_max);
        port * self.harmonic_dim() + (k + self.k_max as i64) as usize
    }

    /// Scattering entry for (output port, output harmonic, input port,
    /// input harmonic). Ports are zero-based.
    pub fn get(&self, p_out: usize, k_out: i64, p_in: usize, k_in: i64) -> C<T> {
        self.data[self.flat(p_out, k_out) * self.dim() + self.flat(p_in, k_in)]
    }

    pub(crate) fn set(&mut self, p_out: usize, k_out: i64, p_in: usize, k_in: i64, v: C<T>) {
        let (r, c) = (self.flat(p_out, k_out), self.flat(p_in, k_in));
        let dim = self.dim();
        self.data[r * dim + c] = v;
    }

    /// Magnitude of an entry in dB.
    pub fn mag_db(&self, p_out: usize, k_out: i64, p_in: usize, k_in: i64) -> T {
        db(self.get(p_out, k_out, p_in, k_in).norm())
    }

    /// The dense harmonic block coupling one port pair.
    pub fn port_block(&self, p_out: usize, p_in: usize) -> SpectralMatrix<T> {
        let d = self.harmonic_dim();
        let mut block = SpectralMatrix::zeros(d);
        let k = self.k_max as i64;
        for (ri, ko) in (-k..=k).enumerate() {
            for (ci, ki) in (-k..=k).enumerate() {
                block[(ri, ci)] = self.get(p_out, ko, p_in, ki);
            }
        }
        block
    }

    pub(crate) fn set_port_block(&mut self, p_out: usize, p_in: usize, block: &SpectralMatrix<T>) {
        let k = self.k_max as i64;
        for (ri, ko) in (-k..=k).enumerate() {
            for (ci, ki) in (-k..=k).enumerate() {
                self.set(p_out, ko, p_in, ki, block[(ri, ci)]);
            }
        }
    }

    /// Total scattered power for a unit drive at `(p_in, k_in = 0)`:
    /// `sum over (p_out, k_out) of |S|^2`. Equals one for a static lossless
    /// network.
    pub fn scattered_power(&self, p_in: usize) -> T {
        let mut acc = T::zero();
        let k = self.k_max as i64;
        for p_out in 0..self.n_ports {
            for k_out in -k..=k {
                acc += self.get(p_out, k_out, p_in, 0).norm_sqr();
            }
        }
        acc
    }

    /// Worst deviation of `S^H S` from the identity over the k_in = 0
    /// columns of every port (cheap unitarity check for lossless networks).
    pub fn unitarity_error(&self) -> T {
        let mut worst = T::zero();
        for p in 0..self.n_ports {
            worst = worst.max((self.scattered_power(p) - T::one()).abs());
        }
        worst
    }

    /// Checks the harmonic dimension matches a grid.
    pub fn matches(&self, grid: &FrequencyGrid<T>) -> bool {
        self.k_max == grid.k_max()
    }
}
