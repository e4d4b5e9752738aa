//! Dense complex block algebra shared by the spectral solvers.
//!
//! Matrices here are small (a few hundred rows at most), so storage is plain
//! dense row-major with no sparsity machinery. The one concession to speed
//! is a diagonal fast path in `mul` and a skip of exactly-zero entries in the
//! inner product loop, which turns banded conversion matrices into O(n^2 b)
//! work instead of O(n^3).

use num_complex::Complex;

use crate::grid::FrequencyGrid;
use crate::{Error, Result, Scalar, C};

/// Condition-estimate ceiling for [`block_solve`]; systems above it are
/// reported singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Square complex matrix over the harmonic ladder (or a node-stacked block
/// system built from ladder blocks).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatrix<T> {
    dim: usize,
    data: Vec<C<T>>,
}

/// Complex column vector of harmonic coefficients.
pub type SpectralVector<T> = Vec<C<T>>;

impl<T: Scalar> SpectralMatrix<T> {
    /// Zero matrix of the given dimension.
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C::new(T::zero(), T::zero()); dim * dim] }
    }

    /// Identity matrix of the given dimension.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C::new(T::one(), T::zero());
        }
        m
    }

    /// Diagonal matrix from the given entries.
    pub fn from_diag(diag: &[C<T>]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C<T>] {
        &self.data
    }

    fn zero_c() -> C<T> {
        C::new(T::zero(), T::zero())
    }

    /// Returns the diagonal if every off-diagonal entry is exactly zero.
    pub fn as_diagonal(&self) -> Option<Vec<C<T>>> {
        let n = self.dim;
        for r in 0..n {
            for c in 0..n {
                if r != c && self.data[r * n + c] != Self::zero_c() {
                    return None;
                }
            }
        }
        Some((0..n).map(|i| self.data[i * n + i]).collect())
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in mul");
        let n = self.dim;
        if let Some(d) = self.as_diagonal() {
            // diag * M scales rows
            let mut out = rhs.clone();
            for r in 0..n {
                for c in 0..n {
                    out.data[r * n + c] = d[r] * out.data[r * n + c];
                }
            }
            return out;
        }
        if let Some(d) = rhs.as_diagonal() {
            // M * diag scales columns
            let mut out = self.clone();
            for r in 0..n {
                for c in 0..n {
                    out.data[r * n + c] = out.data[r * n + c] * d[c];
                }
            }
            return out;
        }
        let mut out = Self::zeros(n);
        for i in 0..n {
            let arow = &self.data[i * n..(i + 1) * n];
            let orow = &mut out.data[i * n..(i + 1) * n];
            for (k, &aik) in arow.iter().enumerate() {
                if aik == Self::zero_c() {
                    continue;
                }
                let brow = &rhs.data[k * n..(k + 1) * n];
                for (o, &bkj) in orow.iter_mut().zip(brow) {
                    *o = *o + aik * bkj;
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[C<T>]) -> SpectralVector<T> {
        assert_eq!(self.dim, v.len());
        let n = self.dim;
        let mut out = vec![Self::zero_c(); n];
        for i in 0..n {
            let mut acc = Self::zero_c();
            for (a, b) in self.data[i * n..(i + 1) * n].iter().zip(v) {
                acc = acc + *a * *b;
            }
            out[i] = acc;
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a = *a + *b;
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a = *a - *b;
        }
        out
    }

    pub fn scale(&self, s: C<T>) -> Self {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a = *a * s;
        }
        out
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(C::new(s, T::zero()))
    }

    /// Maximum absolute column sum (operator 1-norm).
    pub fn norm_one(&self) -> T {
        let n = self.dim;
        let mut best = T::zero();
        for c in 0..n {
            let mut s = T::zero();
            for r in 0..n {
                s += self.data[r * n + c].norm();
            }
            best = best.max(s);
        }
        best
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.norm()))
    }

    /// True if every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for SpectralMatrix<T> {
    type Output = C<T>;
    fn index(&self, (r, c): (usize, usize)) -> &C<T> {
        &self.data[r * self.dim + c]
    }
}

impl<T: Scalar> std::ops::IndexMut<(usize, usize)> for SpectralMatrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C<T> {
        &mut self.data[r * self.dim + c]
    }
}

/// Identity block sized for the grid.
pub fn identity_block<T: Scalar>(grid: &FrequencyGrid<T>) -> SpectralMatrix<T> {
    SpectralMatrix::identity(grid.dim())
}

/// Zero block sized for the grid.
pub fn zero_block<T: Scalar>(grid: &FrequencyGrid<T>) -> SpectralMatrix<T> {
    SpectralMatrix::zeros(grid.dim())
}

/// Spectral integration matrix: `diag(1 / (j * 2 pi f_k))`.
///
/// Multiplying a voltage coefficient vector by this matrix integrates it in
/// time, which is how a time-varying inductor's current is assembled from
/// its flux.
pub fn omega_matrix<T: Scalar>(grid: &FrequencyGrid<T>) -> SpectralMatrix<T> {
    let diag: Vec<C<T>> = grid
        .harmonics()
        .map(|k| C::new(T::one(), T::zero()) / C::new(T::zero(), grid.omega(k)))
        .collect();
    SpectralMatrix::from_diag(&diag)
}

/// LU factorization with partial pivoting of a [`SpectralMatrix`].
pub struct LuFactors<T> {
    dim: usize,
    lu: Vec<C<T>>,
    // swaps[i] = row exchanged with i at elimination step i
    swaps: Vec<usize>,
}

impl<T: Scalar> LuFactors<T> {
    /// Factors the matrix; fails on an exactly-zero pivot.
    pub fn factor(m: &SpectralMatrix<T>) -> Result<Self> {
        let n = m.dim();
        let mut lu = m.data().to_vec();
        let mut swaps = vec![0usize; n];
        for col in 0..n {
            let mut piv = col;
            let mut best = lu[col * n + col].norm();
            for r in (col + 1)..n {
                let mag = lu[r * n + col].norm();
                if mag > best {
                    best = mag;
                    piv = r;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(Error::SingularSystem { cond: f64::INFINITY });
            }
            swaps[col] = piv;
            if piv != col {
                for c in 0..n {
                    lu.swap(col * n + c, piv * n + c);
                }
            }
            let inv_piv = C::new(T::one(), T::zero()) / lu[col * n + col];
            for r in (col + 1)..n {
                let factor = lu[r * n + col] * inv_piv;
                lu[r * n + col] = factor;
                if factor != C::new(T::zero(), T::zero()) {
                    for c in (col + 1)..n {
                        let sub = factor * lu[col * n + c];
                        lu[r * n + c] = lu[r * n + c] - sub;
                    }
                }
            }
        }
        Ok(Self { dim: n, lu, swaps })
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [C<T>]) {
        let n = self.dim;
        assert_eq!(b.len(), n);
        for i in 0..n {
            b.swap(i, self.swaps[i]);
        }
        // forward: L (unit diagonal)
        for i in 1..n {
            let mut acc = b[i];
            for k in 0..i {
                acc = acc - self.lu[i * n + k] * b[k];
            }
            b[i] = acc;
        }
        // back: U
        for i in (0..n).rev() {
            let mut acc = b[i];
            for k in (i + 1)..n {
                acc = acc - self.lu[i * n + k] * b[k];
            }
            b[i] = acc / self.lu[i * n + i];
        }
    }

    /// Solves `A^H x = b` in place (conjugate-transpose system).
    pub fn solve_adjoint_in_place(&self, b: &mut [C<T>]) {
        let n = self.dim;
        assert_eq!(b.len(), n);
        // A^H = (P^T L U)^H = U^H L^H P
        for i in 0..n {
            let mut acc = b[i];
            for k in 0..i {
                acc = acc - self.lu[k * n + i].conj() * b[k];
            }
            b[i] = acc / self.lu[i * n + i].conj();
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for k in (i + 1)..n {
                acc = acc - self.lu[k * n + i].conj() * b[k];
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            b.swap(i, self.swaps[i]);
        }
    }

    /// Solves for a full matrix right-hand side.
    pub fn solve_matrix(&self, rhs: &SpectralMatrix<T>) -> SpectralMatrix<T> {
        let n = self.dim;
        assert_eq!(rhs.dim(), n);
        let mut out = SpectralMatrix::zeros(n);
        let mut col = vec![C::new(T::zero(), T::zero()); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = rhs[(r, c)];
            }
            self.solve_in_place(&mut col);
            for r in 0..n {
                out[(r, c)] = col[r];
            }
        }
        out
    }

    /// Hager-style deterministic estimate of `||A^-1||_1`.
    pub fn inv_norm_one_estimate(&self) -> T {
        let n = self.dim;
        let mut x = vec![C::new(T::one() / T::of(n as f64), T::zero()); n];
        let mut est = T::zero();
        for _ in 0..5 {
            let mut y = x.clone();
            self.solve_in_place(&mut y);
            let new_est: T = y.iter().map(|v| v.norm()).sum();
            let mut xi: Vec<C<T>> = y
                .iter()
                .map(|v| {
                    let m = v.norm();
                    if m == T::zero() {
                        C::new(T::one(), T::zero())
                    } else {
                        *v / C::new(m, T::zero())
                    }
                })
                .collect();
            self.solve_adjoint_in_place(&mut xi);
            let (mut jbest, mut zbest) = (0usize, T::zero());
            for (j, z) in xi.iter().enumerate() {
                if z.norm() > zbest {
                    zbest = z.norm();
                    jbest = j;
                }
            }
            let zx: T = xi.iter().zip(&x).map(|(z, xv)| (z.conj() * xv).re).sum();
            if new_est <= est || zbest <= zx.abs() {
                est = est.max(new_est);
                break;
            }
            est = new_est;
            x = vec![C::new(T::zero(), T::zero()); n];
            x[jbest] = C::new(T::one(), T::zero());
        }
        est
    }
}

/// Solves `m * x = rhs` for a vector right-hand side, rejecting systems with
/// a 1-norm condition estimate above [`CONDITION_LIMIT`].
pub fn block_solve_vec<T: Scalar>(
    m: &SpectralMatrix<T>,
    rhs: &[C<T>],
) -> Result<SpectralVector<T>> {
    let lu = checked_factor(m)?;
    let mut x = rhs.to_vec();
    lu.solve_in_place(&mut x);
    Ok(x)
}

/// Solves `m * X = rhs` for a matrix right-hand side with the same
/// conditioning check as [`block_solve_vec`].
pub fn block_solve<T: Scalar>(
    m: &SpectralMatrix<T>,
    rhs: &SpectralMatrix<T>,
) -> Result<SpectralMatrix<T>> {
    if m.dim() != rhs.dim() {
        return Err(Error::GridMismatch(m.dim(), rhs.dim()));
    }
    let lu = checked_factor(m)?;
    Ok(lu.solve_matrix(rhs))
}

/// LU-factorize with the conditioning gate applied.
pub fn checked_factor<T: Scalar>(m: &SpectralMatrix<T>) -> Result<LuFactors<T>> {
    if !m.is_finite() {
        return Err(Error::SingularSystem { cond: f64::INFINITY });
    }
    let lu = LuFactors::factor(m)?;
    let cond = (m.norm_one() * lu.inv_norm_one_estimate()).to_f64_lossy();
    if !(cond.is_finite()) || cond > CONDITION_LIMIT {
        return Err(Error::SingularSystem { cond });
    }
    Ok(lu)
}

/// Four harmonic-ladder blocks of a spectral ABCD (transmission) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAbcd<T> {
    pub a: SpectralMatrix<T>,
    pub b: SpectralMatrix<T>,
    pub c: SpectralMatrix<T>,
    pub d: SpectralMatrix<T>,
}

impl<T: Scalar> SpectralAbcd<T> {
    /// Identity (ideal through) two-port.
    pub fn identity(dim: usize) -> Self {
        Self {
            a: SpectralMatrix::identity(dim),
            b: SpectralMatrix::zeros(dim),
            c: SpectralMatrix::zeros(dim),
            d: SpectralMatrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Block product `self * rhs` (self nearest port 1).
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        if self.dim() != rhs.dim() {
            return Err(Error::GridMismatch(self.dim(), rhs.dim()));
        }
        Ok(Self {
            a: self.a.mul(&rhs.a).add(&self.b.mul(&rhs.c)),
            b: self.a.mul(&rhs.b).add(&self.b.mul(&rhs.d)),
            c: self.c.mul(&rhs.a).add(&self.d.mul(&rhs.c)),
            d: self.c.mul(&rhs.b).add(&self.d.mul(&rhs.d)),
        })
    }
}
