//! Block modified-nodal-analysis solver for arbitrary device topologies.
//!
//! Every node carries a full harmonic ladder, so the stamped system is a
//! dense block matrix of dimension `n_nodes * (2K + 1)`. Ports are reduced
//! onto their nodes with a Schur complement before wave conversion, which
//! keeps the scattering matrix small and makes conditioning problems visible
//! as an explicit solver error instead of silent garbage.

use crate::elements::{
    capacitor_spectral_admittance, resistor_spectral_admittance, squid_spectral_admittance,
    CoefficientMode, SquidSpec,
};
use crate::grid::FrequencyGrid;
use crate::matrix::{checked_factor, SpectralMatrix};
use crate::sparams::FloquetSMatrix;
use crate::{Error, Result, Scalar, C};

/// Index of a named node inside a [`DeviceGraph`]. Ground is implicit and
/// has no id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub usize);

/// Circuit element kinds understood by both solver engines.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementKind<T> {
    /// Flux-pumped SQUID stack (shunt inductor when unpumped).
    Squid(SquidSpec<T>),
    /// Linear capacitor in farads; negative values are legal (pi-inverter
    /// absorption leftovers).
    Capacitor(T),
    /// Linear resistor in ohms.
    Resistor(T),
    /// Ideal admittance inverter in siemens with a sign choice.
    JInverter { j: T, sign: i8 },
}

/// One placed element. `node_b = None` attaches the element between
/// `node_a` and ground.
#[derive(Debug, Clone, PartialEq)]
pub struct Element<T> {
    pub name: String,
    pub kind: ElementKind<T>,
    pub node_a: NodeId,
    pub node_b: Option<NodeId>,
}

/// External port: a node observed against a real reference impedance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Port<T> {
    pub node: NodeId,
    pub z0: T,
}

/// Node/element/port description of a coupled-resonator network.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeviceGraph<T> {
    node_names: Vec<String>,
    elements: Vec<Element<T>>,
    ports: Vec<Port<T>>,
}

impl<T: Scalar> DeviceGraph<T> {
    pub fn new() -> Self {
        Self { node_names: Vec::new(), elements: Vec::new(), ports: Vec::new() }
    }

    /// Adds a node, failing on duplicate names.
    pub fn add_node(&mut self, name: impl Into<String>) -> Result<NodeId> {
        let name = name.into();
        if self.node_names.iter().any(|n| *n == name) {
            return Err(Error::InvalidParameter(format!("duplicate node `{name}`")));
        }
        self.node_names.push(name);
        Ok(NodeId(self.node_names.len() - 1))
    }

    pub fn node(&self, name: &str) -> Option<NodeId> {
        self.node_names.iter().position(|n| n == name).map(NodeId)
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.node_names[id.0]
    }

    pub fn n_nodes(&self) -> usize {
        self.node_names.len()
    }

    pub fn elements(&self) -> &[Element<T>] {
        &self.elements
    }

    pub fn ports(&self) -> &[Port<T>] {
        &self.ports
    }

    /// Places an element between a node and ground.
    pub fn add_shunt(
        &mut self,
        name: impl Into<String>,
        node: NodeId,
        kind: ElementKind<T>,
    ) -> Result<()> {
        self.add_element(name, kind, node, None)
    }

    /// Places an element between two nodes.
    pub fn add_coupling(
        &mut self,
        name: impl Into<String>,
        a: NodeId,
        b: NodeId,
        kind: ElementKind<T>,
    ) -> Result<()> {
        self.add_element(name, kind, a, Some(b))
    }

    pub fn add_element(
        &mut self,
        name: impl Into<String>,
        kind: ElementKind<T>,
        node_a: NodeId,
        node_b: Option<NodeId>,
    ) -> Result<()> {
        let name = name.into();
        let check = |id: NodeId| -> Result<()> {
            if id.0 >= self.node_names.len() {
                return Err(Error::DanglingNode {
                    element: name.clone(),
                    node: format!("#{}", id.0),
                });
            }
            Ok(())
        };
        check(node_a)?;
        if let Some(b) = node_b {
            check(b)?;
            if b == node_a {
                return Err(Error::InvalidParameter(format!(
                    "element `{name}` attaches both terminals to one node"
                )));
            }
        }
        if matches!(kind, ElementKind::JInverter { .. }) && node_b.is_none() {
            return Err(Error::InvalidParameter(format!(
                "inverter `{name}` needs two nodes"
            )));
        }
        self.elements.push(Element { name, kind, node_a, node_b });
        Ok(())
    }

    /// Declares a port on a node. Port order fixes scattering indices.
    pub fn add_port(&mut self, node: NodeId, z0: T) -> Result<()> {
        if node.0 >= self.node_names.len() {
            return Err(Error::DanglingNode { element: "port".into(), node: format!("#{}", node.0) });
        }
        if self.ports.iter().any(|p| p.node == node) {
            return Err(Error::InvalidParameter(format!(
                "node `{}` already carries a port",
                self.node_names[node.0]
            )));
        }
        if z0 <= T::zero() {
            return Err(Error::InvalidParameter("port impedance must be positive".into()));
        }
        self.ports.push(Port { node, z0 });
        Ok(())
    }

    /// Structural validation: at least one port, and every node reachable
    /// from ground through elements or port terminations.
    pub fn validate(&self) -> Result<()> {
        if self.ports.is_empty() {
            return Err(Error::InvalidParameter("device has no ports".into()));
        }
        let n = self.node_names.len();
        // union-find with ground as node index n
        let mut parent: Vec<usize> = (0..=n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut union = |parent: &mut Vec<usize>, a: usize, b: usize| {
            let (ra, rb) = (find(parent, a), find(parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        };
        for e in &self.elements {
            let b = e.node_b.map(|x| x.0).unwrap_or(n);
            union(&mut parent, e.node_a.0, b);
        }
        for p in &self.ports {
            union(&mut parent, p.node.0, n);
        }
        let ground = find(&mut parent, n);
        for (i, name) in self.node_names.iter().enumerate() {
            if find(&mut parent, i) != ground {
                return Err(Error::InvalidParameter(format!(
                    "node `{name}` is not connected to the rest of the network"
                )));
            }
        }
        Ok(())
    }

    /// Stamps the block nodal admittance matrix of the bare network
    /// (port terminations are *not* included; wave conversion supplies the
    /// reference impedances).
    pub fn stamp(&self, grid: &FrequencyGrid<T>, mode: CoefficientMode) -> Result<SpectralMatrix<T>> {
        let d = grid.dim();
        let n = self.node_names.len();
        let mut y = SpectralMatrix::zeros(n * d);

        let mut add_block = |y: &mut SpectralMatrix<T>, ni: usize, nj: usize, blk: &SpectralMatrix<T>, sign: T| {
            for r in 0..d {
                for c in 0..d {
                    let v = blk[(r, c)];
                    if v != C::new(T::zero(), T::zero()) {
                        let entry = &mut y[(ni * d + r, nj * d + c)];
                        *entry = *entry + v * C::new(sign, T::zero());
                    }
                }
            }
        };

        for e in &self.elements {
            match &e.kind {
                ElementKind::JInverter { j, sign } => {
                    let b = e.node_b.expect("validated: inverter has two nodes");
                    if *j <= T::zero() {
                        return Err(Error::NonPositiveJ(j.to_f64_lossy()));
                    }
                    let s = if *sign < 0 { -T::one() } else { T::one() };
                    let coupling = SpectralMatrix::identity(d).scale(C::new(T::zero(), s * *j));
                    // reciprocal ideal inverter: Y_ab = Y_ba = s*jJ*U
                    add_block(&mut y, e.node_a.0, b.0, &coupling, T::one());
                    add_block(&mut y, b.0, e.node_a.0, &coupling, T::one());
                }
                kind => {
                    let blk = match kind {
                        ElementKind::Squid(spec) => squid_spectral_admittance(spec, grid, mode)?,
                        ElementKind::Capacitor(c) => capacitor_spectral_admittance(*c, grid),
                        ElementKind::Resistor(r) => resistor_spectral_admittance(*r, grid)?,
                        ElementKind::JInverter { .. } => unreachable!(),
                    };
                    add_block(&mut y, e.node_a.0, e.node_a.0, &blk, T::one());
                    if let Some(b) = e.node_b {
                        add_block(&mut y, b.0, b.0, &blk, T::one());
                        add_block(&mut y, e.node_a.0, b.0, &blk, -T::one());
                        add_block(&mut y, b.0, e.node_a.0, &blk, -T::one());
                    }
                }
            }
        }
        Ok(y)
    }

    /// Schur-reduces the stamped system onto the port nodes and returns the
    /// port-level block admittance matrix.
    pub fn port_admittance(
        &self,
        grid: &FrequencyGrid<T>,
        mode: CoefficientMode,
    ) -> Result<SpectralMatrix<T>> {
        self.validate()?;
        let y = self.stamp(grid, mode)?;
        let d = grid.dim();
        let n = self.node_names.len();
        let port_nodes: Vec<usize> = self.ports.iter().map(|p| p.node.0).collect();
        let internal: Vec<usize> =
            (0..n).filter(|i| !port_nodes.contains(i)).collect();

        let np = port_nodes.len();
        let ni = internal.len();
        let take = |rows: &[usize], cols: &[usize]| -> SpectralMatrix<T> {
            let mut out = SpectralMatrix::zeros(rows.len() * d);
            for (bi, &nr) in rows.iter().enumerate() {
                for (bj, &nc) in cols.iter().enumerate() {
                    for r in 0..d {
                        for c in 0..d {
                            out[(bi * d + r, bj * d + c)] = y[(nr * d + r, nc * d + c)];
                        }
                    }
                }
            }
            out
        };

        let y_pp = take(&port_nodes, &port_nodes);
        if ni == 0 {
            return Ok(y_pp);
        }
        let y_pi = take(&port_nodes, &internal);
        let y_ip = take(&internal, &port_nodes);
        let y_ii = take(&internal, &internal);
        // pad y_ip columns into an (ni*d) x (np*d) solve done column-block-wise
        let lu = checked_factor(&y_ii)?;
        let mut reduced = y_pp;
        // X = Yii^-1 Yip, column by column
        let mut col = vec![C::new(T::zero(), T::zero()); ni * d];
        for pc in 0..np * d {
            for r in 0..ni * d {
                col[r] = y_ip[(r, pc)];
            }
            lu.solve_in_place(&mut col);
            // reduced(:, pc) -= Ypi * col
            for pr in 0..np * d {
                let mut acc = C::new(T::zero(), T::zero());
                for k in 0..ni * d {
                    let ypik = y_pi[(pr, k)];
                    if ypik != C::new(T::zero(), T::zero()) {
                        acc = acc + ypik * col[k];
                    }
                }
                reduced[(pr, pc)] = reduced[(pr, pc)] - acc;
            }
        }
        Ok(reduced)
    }

    /// Full Floquet scattering matrix of the device.
    ///
    /// Each column is the response to a unit incident wave at one (port,
    /// harmonic) pair with every port terminated in its reference impedance;
    /// the whole matrix falls out of one block solve.
    pub fn solve_floquet_s(
        &self,
        grid: &FrequencyGrid<T>,
        mode: CoefficientMode,
    ) -> Result<FloquetSMatrix<T>> {
        let d = grid.dim();
        let np = self.ports.len();
        let yr = self.port_admittance(grid, mode)?;

        // M = sqrt(Z0) Y sqrt(Z0), port-blockwise
        let mut m = yr;
        for (pi, p) in self.ports.iter().enumerate() {
            let si = p.z0.sqrt();
            for (pj, q) in self.ports.iter().enumerate() {
                let sj = q.z0.sqrt();
                let scale = C::new(si * sj, T::zero());
                for r in 0..d {
                    for c in 0..d {
                        let e = &mut m[(pi * d + r, pj * d + c)];
                        *e = *e * scale;
                    }
                }
            }
        }
        let ident = SpectralMatrix::identity(np * d);
        let i_plus = ident.add(&m);
        let i_minus = ident.sub(&m);
        let lu = checked_factor(&i_plus)?;
        let s_dense = lu.solve_matrix(&i_minus);

        let mut s = FloquetSMatrix::zeros(np, grid.k_max());
        let k = grid.k_max() as i64;
        for po in 0..np {
            for (ri, ko) in (-k..=k).enumerate() {
                for pi in 0..np {
                    for (ci, ki) in (-k..=k).enumerate() {
                        s.set(po, ko, pi, ki, s_dense[(po * d + ri, pi * d + ci)]);
                    }
                }
            }
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::PumpTone;
    use crate::twoport::{jinverter_abcd, shunt_abcd, TwoPortChain};
    use crate::FrequencyGrid;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn grid(k: usize) -> FrequencyGrid<f64> {
        FrequencyGrid::build(6e9, 0.7e9, k).unwrap()
    }

    #[test]
    fn matched_load_has_zero_reflection() {
        let g = grid(2);
        let mut dev = DeviceGraph::new();
        let n1 = dev.add_node("n1").unwrap();
        dev.add_shunt("rload", n1, ElementKind::Resistor(50.0)).unwrap();
        dev.add_port(n1, 50.0).unwrap();
        let s = dev.solve_floquet_s(&g, CoefficientMode::Exact).unwrap();
        assert!(s.get(0, 0, 0, 0).norm() < 1e-12);
    }

    #[test]
    fn single_capacitor_stamp_is_diagonal() {
        let g = grid(1);
        let mut dev = DeviceGraph::new();
        let n1 = dev.add_node("n1").unwrap();
        dev.add_shunt("c1", n1, ElementKind::Capacitor(300e-15)).unwrap();
        dev.add_port(n1, 50.0).unwrap();
        let y = dev.stamp(&g, CoefficientMode::Exact).unwrap();
        for (i, k) in g.harmonics().enumerate() {
            let want = 2.0 * std::f64::consts::PI * g.freq(k) * 300e-15;
            assert!((y[(i, i)].im - want).abs() < 1e-12 * want.abs());
        }
        assert_eq!(y[(0, 1)], num_complex::Complex::new(0.0, 0.0));
    }

    #[test]
    fn inverter_stamp_is_symmetric_imaginary() {
        let g = grid(1);
        let mut dev = DeviceGraph::new();
        let a = dev.add_node("a").unwrap();
        let b = dev.add_node("b").unwrap();
        dev.add_coupling("j1", a, b, ElementKind::JInverter { j: 0.02, sign: 1 }).unwrap();
        dev.add_port(a, 50.0).unwrap();
        dev.add_port(b, 50.0).unwrap();
        let y = dev.stamp(&g, CoefficientMode::Exact).unwrap();
        let d = g.dim();
        for r in 0..d {
            assert!((y[(r, d + r)].im - 0.02).abs() < 1e-15);
            assert!((y[(d + r, r)].im - 0.02).abs() < 1e-15);
            assert_eq!(y[(r, r)], num_complex::Complex::new(0.0, 0.0));
        }
    }

    #[test]
    fn dangling_and_duplicate_rejected() {
        let mut dev: DeviceGraph<f64> = DeviceGraph::new();
        let n1 = dev.add_node("n1").unwrap();
        assert!(dev.add_node("n1").is_err());
        assert!(dev
            .add_element("cx", ElementKind::Capacitor(1e-13), NodeId(7), None)
            .is_err());
        assert!(dev.add_coupling("jx", n1, n1, ElementKind::JInverter { j: 1e-3, sign: 1 }).is_err());
        // disconnected node
        let mut dev2: DeviceGraph<f64> = DeviceGraph::new();
        let a = dev2.add_node("a").unwrap();
        dev2.add_node("floating").unwrap();
        dev2.add_shunt("r1", a, ElementKind::Resistor(50.0)).unwrap();
        dev2.add_port(a, 50.0).unwrap();
        assert!(dev2.validate().is_err());
    }

    /// Builds the same random modulated chain as a graph and as a two-port
    /// cascade; both engines must agree on every scattering block.
    #[test]
    fn cross_engine_equivalence_randomized() {
        let mut rng = StdRng::seed_from_u64(20240811);
        for trial in 0..4 {
            let g = grid(3);
            let n_res = 2 + trial % 2;
            let js: Vec<f64> = (0..=n_res).map(|_| rng.gen_range(2e-3..12e-3)).collect();
            let caps: Vec<f64> = (0..n_res).map(|_| rng.gen_range(600e-15..900e-15)).collect();
            let phases: Vec<f64> =
                (0..n_res).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
            let dphi = 0.02;

            let mut dev = DeviceGraph::new();
            let p1 = dev.add_node("p1").unwrap();
            let p2 = dev.add_node("p2").unwrap();
            let mut prev = p1;
            let mut stages = Vec::new();
            for i in 0..n_res {
                let r = dev.add_node(format!("r{i}")).unwrap();
                dev.add_coupling(
                    format!("j{i}"),
                    prev,
                    r,
                    ElementKind::JInverter { j: js[i], sign: 1 },
                )
                .unwrap();
                let spec =
                    SquidSpec::new(4e-6, 10, 0.35).with_pump(PumpTone::new(dphi, 1, phases[i]));
                dev.add_shunt(format!("sq{i}"), r, ElementKind::Squid(spec.clone())).unwrap();
                dev.add_shunt(format!("c{i}"), r, ElementKind::Capacitor(caps[i])).unwrap();

                stages.push(jinverter_abcd(js[i], &g, 1).unwrap());
                let y = squid_spectral_admittance(&spec, &g, CoefficientMode::Exact)
                    .unwrap()
                    .add(&capacitor_spectral_admittance(caps[i], &g));
                stages.push(shunt_abcd(y));
                prev = r;
            }
            dev.add_coupling(
                "jend",
                prev,
                p2,
                ElementKind::JInverter { j: js[n_res], sign: 1 },
            )
            .unwrap();
            stages.push(jinverter_abcd(js[n_res], &g, 1).unwrap());
            dev.add_port(p1, 50.0).unwrap();
            dev.add_port(p2, 50.0).unwrap();

            let s_mna = dev.solve_floquet_s(&g, CoefficientMode::Exact).unwrap();
            let chain = TwoPortChain::new(g.clone(), 50.0, stages).unwrap();
            let s_tp = chain.floquet_s().unwrap();
            for po in 0..2 {
                for pi in 0..2 {
                    let diff =
                        s_mna.port_block(po, pi).sub(&s_tp.port_block(po, pi)).max_abs();
                    assert!(diff <= 1e-9, "trial {trial} block ({po},{pi}) diff {diff:e}");
                }
            }
        }
    }

    #[test]
    fn static_lossless_multiport_unitary() {
        let g = grid(2);
        let mut dev = DeviceGraph::new();
        let p: Vec<NodeId> =
            (0..3).map(|i| dev.add_node(format!("p{i}")).unwrap()).collect();
        let r: Vec<NodeId> =
            (0..3).map(|i| dev.add_node(format!("r{i}")).unwrap()).collect();
        let c = dev.add_node("c").unwrap();
        for i in 0..3 {
            dev.add_coupling(
                format!("jp{i}"),
                p[i],
                r[i],
                ElementKind::JInverter { j: 6e-3, sign: 1 },
            )
            .unwrap();
            dev.add_shunt(format!("sq{i}"), r[i], ElementKind::Squid(SquidSpec::new(4e-6, 10, 0.35)))
                .unwrap();
            dev.add_shunt(format!("c{i}"), r[i], ElementKind::Capacitor(776e-15)).unwrap();
            dev.add_coupling(
                format!("jc{i}"),
                r[i],
                c,
                ElementKind::JInverter { j: 4e-3, sign: 1 },
            )
            .unwrap();
            dev.add_port(p[i], 50.0).unwrap();
        }
        let s = dev.solve_floquet_s(&g, CoefficientMode::Exact).unwrap();
        assert!(s.unitarity_error() < 1e-9, "unitarity error {}", s.unitarity_error());
    }
}
