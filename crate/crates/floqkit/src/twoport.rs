//! Spectral ABCD construction, cascading, and conversion to Floquet
//! scattering parameters for series-coupled networks.

use crate::grid::FrequencyGrid;
use crate::matrix::{checked_factor, SpectralAbcd, SpectralMatrix};
use crate::sparams::FloquetSMatrix;
use crate::{Error, Result, Scalar, C};

/// Shunt admittance as a spectral two-port: `[U 0; Y U]`.
pub fn shunt_abcd<T: Scalar>(y: SpectralMatrix<T>) -> SpectralAbcd<T> {
    let dim = y.dim();
    SpectralAbcd {
        a: SpectralMatrix::identity(dim),
        b: SpectralMatrix::zeros(dim),
        c: y,
        d: SpectralMatrix::identity(dim),
    }
}

/// Ideal admittance inverter: `A = D = 0`, `B = s*jU/J`, `C = s*jJU`.
///
/// Both off-diagonal blocks carry the same `+j`, which keeps the block
/// determinant `+1` (a reciprocal element, `(M_J)^2 = -U`) and gives the
/// textbook load transformation `Y_in = J^2 / Y_load`.
pub fn jinverter_abcd<T: Scalar>(
    j: T,
    grid: &FrequencyGrid<T>,
    sign: i8,
) -> Result<SpectralAbcd<T>> {
    if j <= T::zero() {
        return Err(Error::NonPositiveJ(j.to_f64_lossy()));
    }
    let dim = grid.dim();
    let s = if sign < 0 { -T::one() } else { T::one() };
    let jb = C::new(T::zero(), s / j);
    let jc = C::new(T::zero(), s * j);
    Ok(SpectralAbcd {
        a: SpectralMatrix::zeros(dim),
        b: SpectralMatrix::identity(dim).scale(jb),
        c: SpectralMatrix::identity(dim).scale(jc),
        d: SpectralMatrix::zeros(dim),
    })
}

/// An ordered cascade of spectral ABCD stages between two reference ports.
///
/// Every stage here is direction-symmetric (shunt blocks and ideal
/// inverters), so the reverse-direction network is the same stage list in
/// reverse order.
#[derive(Debug, Clone)]
pub struct TwoPortChain<T> {
    stages: Vec<SpectralAbcd<T>>,
    grid: FrequencyGrid<T>,
    z0: T,
}

impl<T: Scalar> TwoPortChain<T> {
    pub fn new(grid: FrequencyGrid<T>, z0: T, stages: Vec<SpectralAbcd<T>>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidParameter("two-port chain has no stages".into()));
        }
        for s in &stages {
            if s.dim() != grid.dim() {
                return Err(Error::GridMismatch(s.dim(), grid.dim()));
            }
        }
        Ok(Self { stages, grid, z0 })
    }

    pub fn grid(&self) -> &FrequencyGrid<T> {
        &self.grid
    }

    pub fn z0(&self) -> T {
        self.z0
    }

    pub fn stages(&self) -> &[SpectralAbcd<T>] {
        &self.stages
    }

    /// Left-to-right block product of all stages.
    pub fn cascade(&self) -> Result<SpectralAbcd<T>> {
        cascade(&self.stages)
    }

    /// Product of the stage list traversed from port 2 toward port 1.
    pub fn cascade_reversed(&self) -> Result<SpectralAbcd<T>> {
        let mut rev: Vec<SpectralAbcd<T>> = self.stages.clone();
        rev.reverse();
        cascade(&rev)
    }

    /// Full two-port Floquet scattering matrix.
    pub fn floquet_s(&self) -> Result<FloquetSMatrix<T>> {
        let fwd = self.cascade()?;
        let rev = self.cascade_reversed()?;
        let (s11, s21) = abcd_to_s_oneway(&fwd, self.z0)?;
        let (s22, s12) = abcd_to_s_oneway(&rev, self.z0)?;
        let mut s = FloquetSMatrix::zeros(2, self.grid.k_max());
        s.set_port_block(0, 0, &s11);
        s.set_port_block(1, 0, &s21);
        s.set_port_block(1, 1, &s22);
        s.set_port_block(0, 1, &s12);
        Ok(s)
    }
}

/// Left-to-right product `M_1 * M_2 * ... * M_n`.
pub fn cascade<T: Scalar>(stages: &[SpectralAbcd<T>]) -> Result<SpectralAbcd<T>> {
    let first = stages
        .first()
        .ok_or_else(|| Error::InvalidParameter("cascade of zero stages".into()))?;
    let mut acc = first.clone();
    for stage in &stages[1..] {
        acc = acc.mul(stage)?;
    }
    Ok(acc)
}

/// Converts one propagation direction of a spectral ABCD to its reflection
/// and transmission blocks: `S21 = 2 [A + B/z0 + C z0 + D]^-1` and
/// `S11 = [A + B/z0 - C z0 - D] [A + B/z0 + C z0 + D]^-1`.
pub fn abcd_to_s_oneway<T: Scalar>(
    m: &SpectralAbcd<T>,
    z0: T,
) -> Result<(SpectralMatrix<T>, SpectralMatrix<T>)> {
    let inv_z0 = T::one() / z0;
    let b_over = m.b.scale_real(inv_z0);
    let c_z0 = m.c.scale_real(z0);
    let denom = m.a.add(&b_over).add(&c_z0).add(&m.d);
    let numer = m.a.add(&b_over).sub(&c_z0).sub(&m.d);
    let lu = checked_factor(&denom)?;
    let inv = lu.solve_matrix(&SpectralMatrix::identity(m.dim()));
    let s21 = inv.scale_real(T::of(2.0));
    let s11 = numer.mul(&inv);
    Ok((s11, s21))
}

/// Convenience: full 2-port Floquet S-matrix of a raw ABCD pair
/// (forward and reversed cascades supplied by the caller).
pub fn abcd_to_s<T: Scalar>(
    forward: &SpectralAbcd<T>,
    reversed: &SpectralAbcd<T>,
    k_max: usize,
    z0: T,
) -> Result<FloquetSMatrix<T>> {
    let (s11, s21) = abcd_to_s_oneway(forward, z0)?;
    let (s22, s12) = abcd_to_s_oneway(reversed, z0)?;
    let mut s = FloquetSMatrix::zeros(2, k_max);
    s.set_port_block(0, 0, &s11);
    s.set_port_block(1, 0, &s21);
    s.set_port_block(1, 1, &s22);
    s.set_port_block(0, 1, &s12);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::{
        capacitor_spectral_admittance, inductor_spectral_admittance, squid_spectral_admittance,
        CoefficientMode, PumpTone, SquidSpec,
    };
    use crate::matrix::{identity_block, zero_block};
    use approx::assert_relative_eq;

    fn grid(k: usize) -> FrequencyGrid<f64> {
        FrequencyGrid::build(6e9, 0.7e9, k).unwrap()
    }

    fn resonator_y(
        grid: &FrequencyGrid<f64>,
        phase: f64,
        dphi: f64,
        cap: f64,
    ) -> SpectralMatrix<f64> {
        let mut spec = SquidSpec::new(4e-6, 10, 0.35);
        if dphi > 0.0 {
            spec = spec.with_pump(PumpTone::new(dphi, 1, phase));
        }
        let y = squid_spectral_admittance(&spec, grid, CoefficientMode::Exact).unwrap();
        y.add(&capacitor_spectral_admittance(cap, grid))
    }

    #[test]
    fn shunt_abcd_layout() {
        let g = grid(2);
        let zero = shunt_abcd(zero_block(&g));
        assert_eq!(zero.a, identity_block(&g));
        assert_eq!(zero.b, zero_block(&g));
        assert_eq!(zero.c, zero_block(&g));
        // cascading two shunts adds their C blocks
        let y1 = capacitor_spectral_admittance(100e-15, &g);
        let y2 = inductor_spectral_admittance(1e-9, &g);
        let chained = shunt_abcd(y1.clone()).mul(&shunt_abcd(y2.clone())).unwrap();
        let direct = shunt_abcd(y1.add(&y2));
        assert_eq!(chained.c, direct.c);
        assert_eq!(chained.a, direct.a);
    }

    #[test]
    fn inverter_squared_is_negative_identity() {
        let g = grid(1);
        let m = jinverter_abcd(0.02, &g, 1).unwrap();
        let sq = m.mul(&m).unwrap();
        let neg_u = identity_block(&g).scale_real(-1.0);
        assert!(sq.a.sub(&neg_u).max_abs() < 1e-15);
        assert!(sq.d.sub(&neg_u).max_abs() < 1e-15);
        assert!(sq.b.max_abs() < 1e-15);
        assert!(sq.c.max_abs() < 1e-15);
    }

    #[test]
    fn inverter_sign_flip_negates_off_blocks() {
        let g = grid(1);
        let p = jinverter_abcd(0.02, &g, 1).unwrap();
        let n = jinverter_abcd(0.02, &g, -1).unwrap();
        assert!(p.b.add(&n.b).max_abs() < 1e-18);
        assert!(p.c.add(&n.c).max_abs() < 1e-18);
        assert!(matches!(jinverter_abcd(0.0, &g, 1), Err(Error::NonPositiveJ(_))));
    }

    #[test]
    fn inverter_sandwich_unit_cell() {
        // J (shunt Y) J has A = D = -U and |B| = |Y| / J^2
        let g = grid(2);
        let j = 0.02;
        let y = resonator_y(&g, 0.3, 0.02, 700e-15);
        let mj = jinverter_abcd(j, &g, 1).unwrap();
        let cell = cascade(&[mj.clone(), shunt_abcd(y.clone()), mj]).unwrap();
        let neg_u = identity_block(&g).scale_real(-1.0);
        assert!(cell.a.sub(&neg_u).max_abs() < 1e-12);
        assert!(cell.d.sub(&neg_u).max_abs() < 1e-12);
        assert!(cell.c.max_abs() < 1e-12);
        let want_b = y.scale_real(-1.0 / (j * j));
        assert!(cell.b.sub(&want_b).max_abs() <= 1e-12 * want_b.max_abs());
    }

    #[test]
    fn cascade_trivia() {
        let g = grid(1);
        let stage = shunt_abcd(capacitor_spectral_admittance(1e-13, &g));
        let single = cascade(std::slice::from_ref(&stage)).unwrap();
        assert_eq!(single, stage);
        let ident = SpectralAbcd::identity(g.dim());
        let many = cascade(&[ident.clone(), ident.clone(), ident.clone()]).unwrap();
        assert_eq!(many, ident);
    }

    #[test]
    fn cascade_associative() {
        let g = grid(2);
        let a = jinverter_abcd(0.008, &g, 1).unwrap();
        let b = shunt_abcd(resonator_y(&g, 0.0, 0.02, 750e-15));
        let c = jinverter_abcd(0.004, &g, 1).unwrap();
        let d = shunt_abcd(resonator_y(&g, 1.1, 0.02, 750e-15));
        let left = a.mul(&b).unwrap().mul(&c).unwrap().mul(&d).unwrap();
        let right = a.mul(&b.mul(&c.mul(&d).unwrap()).unwrap()).unwrap();
        let scale = left.c.max_abs();
        assert!(left.a.sub(&right.a).max_abs() <= 1e-12 * scale.max(1.0));
        assert!(left.b.sub(&right.b).max_abs() <= 1e-12 * scale.max(1.0));
        assert!(left.c.sub(&right.c).max_abs() <= 1e-12 * scale.max(1.0));
        assert!(left.d.sub(&right.d).max_abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn identity_abcd_is_matched_through() {
        let g = grid(2);
        let ident = SpectralAbcd::identity(g.dim());
        let (s11, s21) = abcd_to_s_oneway(&ident, 50.0).unwrap();
        assert!(s11.max_abs() < 1e-14);
        assert!(s21.sub(&identity_block(&g)).max_abs() < 1e-14);
    }

    #[test]
    fn mismatched_grid_rejected() {
        let g1 = grid(1);
        let g2 = grid(2);
        let a = shunt_abcd(zero_block(&g1));
        let b = shunt_abcd(zero_block(&g2));
        assert!(matches!(a.mul(&b), Err(Error::GridMismatch(3, 5))));
    }

    #[test]
    fn modulated_pair_with_unequal_phases_is_nonreciprocal() {
        let g = grid(4);
        let cap = 776.5e-15;
        let j_end = 9.25e-3;
        let j_mid = 4.0e-3;
        let build = |th1: f64, th2: f64| {
            let stages = vec![
                jinverter_abcd(j_end, &g, 1).unwrap(),
                shunt_abcd(resonator_y(&g, th1, 0.025, cap)),
                jinverter_abcd(j_mid, &g, 1).unwrap(),
                shunt_abcd(resonator_y(&g, th2, 0.025, cap)),
                jinverter_abcd(j_end, &g, 1).unwrap(),
            ];
            TwoPortChain::new(g.clone(), 50.0, stages).unwrap()
        };
        let staggered = build(0.0, std::f64::consts::FRAC_PI_2).floquet_s().unwrap();
        let fwd = staggered.get(1, 0, 0, 0).norm();
        let rev = staggered.get(0, 0, 1, 0).norm();
        assert!(
            (fwd - rev).abs() > 1e-3,
            "phase staggering should break amplitude reciprocity: {fwd} vs {rev}"
        );
        // equal phases restore reciprocity on the whole block
        let equal = build(0.8, 0.8).floquet_s().unwrap();
        let s21 = equal.port_block(1, 0);
        let s12 = equal.port_block(0, 1);
        assert!(s21.sub(&s12).max_abs() <= 1e-10);
    }

    #[test]
    fn static_lossless_chain_is_unitary_and_reciprocal() {
        let g = grid(3);
        let cap = 776.5e-15;
        let stages = vec![
            jinverter_abcd(9.25e-3, &g, 1).unwrap(),
            shunt_abcd(resonator_y(&g, 0.0, 0.0, cap)),
            jinverter_abcd(3.02e-3, &g, 1).unwrap(),
            shunt_abcd(resonator_y(&g, 0.0, 0.0, cap)),
            jinverter_abcd(9.25e-3, &g, 1).unwrap(),
        ];
        let s = TwoPortChain::new(g, 50.0, stages).unwrap().floquet_s().unwrap();
        let p = s.get(0, 0, 0, 0).norm_sqr() + s.get(1, 0, 0, 0).norm_sqr();
        assert_relative_eq!(p, 1.0, epsilon = 1e-9);
        let s21 = s.port_block(1, 0);
        let s12 = s.port_block(0, 1);
        assert!(s21.sub(&s12).max_abs() <= 1e-10);
    }
}
