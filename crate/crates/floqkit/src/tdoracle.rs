//! Independent time-domain verification of the spectral solvers.
//!
//! The circuit equations are integrated directly with the exact closed-form
//! `1/L(t)`, no Fourier truncation anywhere, and steady-state harmonic
//! amplitudes are extracted by least squares. Agreement between this route
//! and the conversion-matrix engines is the repository's central correctness
//! property.
//!
//! Ideal admittance inverters have no causal time-domain model. Internal
//! inverters are replaced by their pi-capacitive realization (series
//! coupling capacitor plus negative shunt corrections absorbed into the
//! neighboring resonator capacitors); an inverter that feeds a port is
//! folded into the port by the exact load transformation `z0' = 1/(J^2
//! z0)`, which preserves every scattering magnitude. The comparison always
//! re-runs the spectral solver on the converted network, so both engines see
//! the identical circuit.

use num_complex::Complex;

use crate::devices::pi_capacitive_inverter;
use crate::elements::{CoefficientMode, SquidSpec};
use crate::grid::FrequencyGrid;
use crate::matrix::{checked_factor, LuFactors, SpectralMatrix};
use crate::mna::{DeviceGraph, ElementKind};
use crate::{db, Error, Result, Scalar, C};

/// How inverters were realized for integration, recorded per conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationNote {
    pub element: String,
    pub action: String,
}

/// A device rewritten so every element has a time-domain model.
#[derive(Debug, Clone)]
pub struct OracleForm<T> {
    pub graph: DeviceGraph<T>,
    pub notes: Vec<RealizationNote>,
}

/// Rewrites `dev` for time-domain integration, realizing inverters at the
/// design frequency `f_pi`.
pub fn realize_for_time_domain<T: Scalar>(
    dev: &DeviceGraph<T>,
    f_pi: T,
) -> Result<OracleForm<T>> {
    dev.validate()?;
    let mut notes = Vec::new();

    // Which nodes host ports, and which inverters touch them.
    let port_nodes: Vec<usize> = dev.ports().iter().map(|p| p.node.0).collect();
    let mut shunt_cap: Vec<T> = vec![T::zero(); dev.n_nodes()];
    let mut has_shunt_cap = vec![false; dev.n_nodes()];
    for e in dev.elements() {
        if let (ElementKind::Capacitor(c), None) = (&e.kind, e.node_b) {
            shunt_cap[e.node_a.0] += *c;
            has_shunt_cap[e.node_a.0] = true;
        }
    }

    // Plan: port moves and capacitor corrections.
    let mut removed_nodes = vec![false; dev.n_nodes()];
    let mut port_override: Vec<(usize, T)> = dev.ports().iter().map(|p| (p.node.0, p.z0)).collect();
    struct SeriesCap<T> {
        name: String,
        a: usize,
        b: usize,
        c: T,
    }
    let mut series_caps: Vec<SeriesCap<T>> = Vec::new();

    for e in dev.elements() {
        if let ElementKind::JInverter { j, .. } = &e.kind {
            let a = e.node_a.0;
            let b = e.node_b.expect("inverters have two nodes").0;
            let a_is_port = port_nodes.contains(&a);
            let b_is_port = port_nodes.contains(&b);
            if a_is_port && b_is_port {
                return Err(Error::UnsupportedElement(format!(
                    "{} couples two ports directly",
                    e.name
                )));
            }
            if a_is_port || b_is_port {
                let (pnode, inner) = if a_is_port { (a, b) } else { (b, a) };
                // the port node must be bare: nothing else may hang on it
                let busy = dev.elements().iter().any(|x| {
                    x.name != e.name
                        && (x.node_a.0 == pnode || x.node_b.map(|n| n.0) == Some(pnode))
                });
                if busy {
                    return Err(Error::UnsupportedElement(format!(
                        "{}: port node carries elements besides the inverter",
                        e.name
                    )));
                }
                let port = port_override
                    .iter_mut()
                    .find(|(n, _)| *n == pnode)
                    .expect("port on port node");
                let z0_new = T::one() / (*j * *j * port.1);
                *port = (inner, z0_new);
                removed_nodes[pnode] = true;
                notes.push(RealizationNote {
                    element: e.name.clone(),
                    action: format!(
                        "folded into port: z0 {} -> {}",
                        port_value_str(dev, pnode),
                        z0_new
                    ),
                });
            } else {
                let pi = pi_capacitive_inverter(*j, f_pi)?;
                for side in [a, b] {
                    if !has_shunt_cap[side] {
                        return Err(Error::NegativeAbsorbedCapacitance {
                            c_res: 0.0,
                            c_absorb: pi.shunt_correction.to_f64_lossy(),
                        });
                    }
                    let after = shunt_cap[side] + pi.shunt_correction;
                    if after <= T::zero() {
                        return Err(Error::NegativeAbsorbedCapacitance {
                            c_res: shunt_cap[side].to_f64_lossy(),
                            c_absorb: pi.shunt_correction.to_f64_lossy(),
                        });
                    }
                    shunt_cap[side] = after;
                }
                series_caps.push(SeriesCap {
                    name: format!("{}_cc", e.name),
                    a,
                    b,
                    c: pi.coupling_cap,
                });
                notes.push(RealizationNote {
                    element: e.name.clone(),
                    action: format!(
                        "pi-realized: series {} F, shunt corrections absorbed",
                        pi.coupling_cap
                    ),
                });
            }
        }
    }

    // Rebuild the graph without removed nodes, with corrected shunt caps.
    let mut out = DeviceGraph::new();
    let mut node_map: Vec<Option<crate::mna::NodeId>> = vec![None; dev.n_nodes()];
    for i in 0..dev.n_nodes() {
        if !removed_nodes[i] {
            node_map[i] = Some(out.add_node(dev.node_name(crate::mna::NodeId(i)))?);
        }
    }
    let mut cap_seen = vec![false; dev.n_nodes()];
    for e in dev.elements() {
        match (&e.kind, e.node_b) {
            (ElementKind::JInverter { .. }, _) => {}
            (ElementKind::Capacitor(_), None) => {
                // replace the first shunt cap per node with the corrected total
                let n = e.node_a.0;
                if !cap_seen[n] {
                    cap_seen[n] = true;
                    out.add_shunt(
                        e.name.clone(),
                        node_map[n].expect("capacitor node kept"),
                        ElementKind::Capacitor(shunt_cap[n]),
                    )?;
                }
            }
            (kind, nb) => {
                let a = node_map[e.node_a.0].ok_or_else(|| {
                    Error::UnsupportedElement(format!("{}: attached to removed port node", e.name))
                })?;
                let b = match nb {
                    Some(x) => Some(node_map[x.0].ok_or_else(|| {
                        Error::UnsupportedElement(format!(
                            "{}: attached to removed port node",
                            e.name
                        ))
                    })?),
                    None => None,
                };
                out.add_element(e.name.clone(), kind.clone(), a, b)?;
            }
        }
    }
    for sc in series_caps {
        out.add_coupling(
            sc.name,
            node_map[sc.a].expect("series cap node kept"),
            node_map[sc.b].expect("series cap node kept"),
            ElementKind::Capacitor(sc.c),
        )?;
    }
    for (node, z0) in port_override {
        out.add_port(node_map[node].expect("port node kept"), z0)?;
    }
    out.validate()?;
    Ok(OracleForm { graph: out, notes })
}

fn port_value_str<T: Scalar>(dev: &DeviceGraph<T>, node: usize) -> String {
    dev.ports()
        .iter()
        .find(|p| p.node.0 == node)
        .map(|p| format!("{}", p.z0))
        .unwrap_or_else(|| "?".into())
}

/// Explicit LTV state-space `dx/dt = f(t, x)` with states
/// `[node voltages, inductor fluxes]`.
pub struct StateSpaceLtv<T> {
    n_nodes: usize,
    cap_inv: SpectralMatrix<T>,
    conductance: Vec<T>,
    inductors: Vec<(usize, SquidSpec<T>)>,
    ports: Vec<(usize, T)>,
    pub notes: Vec<RealizationNote>,
}

impl<T: Scalar> StateSpaceLtv<T> {
    pub fn state_dim(&self) -> usize {
        self.n_nodes + self.inductors.len()
    }

    pub fn n_ports(&self) -> usize {
        self.ports.len()
    }

    /// Natural frequency check helper: the capacitance matrix inverse.
    pub fn cap_inverse(&self) -> &SpectralMatrix<T> {
        &self.cap_inv
    }

    /// Evaluates the state derivative with a Norton drive
    /// `i = amp * cos(2 pi f t)` at the given port.
    #[allow(clippy::too_many_arguments)]
    fn rhs(
        &self,
        t: T,
        x: &[T],
        f_base: T,
        drive_port: usize,
        f_drive: T,
        amp: T,
        out: &mut [T],
    ) {
        let n = self.n_nodes;
        let mut inj = vec![T::zero(); n];
        for (i, g) in self.conductance.iter().enumerate() {
            inj[i] -= *g * x[i];
        }
        for (li, (node, spec)) in self.inductors.iter().enumerate() {
            let gamma = spec.inverse_inductance_at(t, f_base);
            inj[*node] -= gamma * x[n + li];
        }
        let (dn, _z0) = self.ports[drive_port];
        inj[dn] += amp * (T::of(2.0) * T::PI() * f_drive * t).cos();
        // dv = C^-1 * inj
        for r in 0..n {
            let mut acc = T::zero();
            for c in 0..n {
                acc += self.cap_inv[(r, c)].re * inj[c];
            }
            out[r] = acc;
        }
        for (li, (node, _)) in self.inductors.iter().enumerate() {
            out[n + li] = x[*node];
        }
    }

    /// Node voltage of a port in a state vector.
    pub fn port_voltage(&self, port: usize, x: &[T]) -> T {
        x[self.ports[port].0]
    }

    pub fn port_z0(&self, port: usize) -> T {
        self.ports[port].1
    }
}

/// Builds the explicit ODE system for a device whose elements all have
/// time-domain models (run [`realize_for_time_domain`] first if the graph
/// contains ideal inverters).
pub fn build_state_space<T: Scalar>(form: &OracleForm<T>) -> Result<StateSpaceLtv<T>> {
    let dev = &form.graph;
    dev.validate()?;
    let n = dev.n_nodes();
    let mut cap = SpectralMatrix::zeros(n);
    let mut conductance = vec![T::zero(); n];
    let mut inductors = Vec::new();
    for e in dev.elements() {
        match (&e.kind, e.node_b) {
            (ElementKind::Capacitor(c), None) => {
                let a = e.node_a.0;
                cap[(a, a)] = cap[(a, a)] + Complex::new(*c, T::zero());
            }
            (ElementKind::Capacitor(c), Some(b)) => {
                let (a, b) = (e.node_a.0, b.0);
                let cc = Complex::new(*c, T::zero());
                cap[(a, a)] = cap[(a, a)] + cc;
                cap[(b, b)] = cap[(b, b)] + cc;
                cap[(a, b)] = cap[(a, b)] - cc;
                cap[(b, a)] = cap[(b, a)] - cc;
            }
            (ElementKind::Resistor(r), None) => {
                if *r <= T::zero() {
                    return Err(Error::NonPositiveResistance(r.to_f64_lossy()));
                }
                conductance[e.node_a.0] += T::one() / *r;
            }
            (ElementKind::Resistor(_), Some(_)) => {
                return Err(Error::UnsupportedElement(format!(
                    "{}: node-to-node resistors not modeled in the oracle",
                    e.name
                )));
            }
            (ElementKind::Squid(spec), None) => {
                spec.validate()?;
                inductors.push((e.node_a.0, spec.clone()));
            }
            (ElementKind::Squid(_), Some(_)) => {
                return Err(Error::UnsupportedElement(format!(
                    "{}: node-to-node SQUIDs not modeled in the oracle",
                    e.name
                )));
            }
            (ElementKind::JInverter { .. }, _) => {
                return Err(Error::UnsupportedElement(format!(
                    "{}: ideal inverter has no causal time-domain model",
                    e.name
                )));
            }
        }
    }
    for p in dev.ports() {
        conductance[p.node.0] += T::one() / p.z0;
    }
    let lu = checked_factor(&cap).map_err(|_| {
        Error::InvalidParameter("capacitance matrix singular: a node lacks capacitance".into())
    })?;
    let cap_inv = lu.solve_matrix(&SpectralMatrix::identity(n));
    Ok(StateSpaceLtv {
        n_nodes: n,
        cap_inv,
        conductance,
        inductors,
        ports: dev.ports().iter().map(|p| (p.node.0, p.z0)).collect(),
        notes: form.notes.clone(),
    })
}

/// Options for steady-state integration.
#[derive(Debug, Clone)]
pub struct IntegrationOptions<T> {
    /// Relative tolerance of the adaptive integrator.
    pub rtol: T,
    /// Absolute tolerance floor.
    pub atol: T,
    /// Steady-state declared when the harmonic vector moves less than this
    /// relative amount between consecutive windows.
    pub steady_tol: T,
    /// Hard cap in base-frequency periods.
    pub max_periods: usize,
    /// Samples recorded per analysis window.
    pub samples_per_window: usize,
}

impl<T: Scalar> Default for IntegrationOptions<T> {
    fn default() -> Self {
        Self {
            rtol: T::of(1e-9),
            atol: T::of(1e-16),
            steady_tol: T::of(1e-3),
            max_periods: 500,
            samples_per_window: 2048,
        }
    }
}

/// Sampled steady-state port waveforms over one analysis window.
pub struct SteadyStateWaveforms<T> {
    /// Sample instants (absolute time).
    pub times: Vec<T>,
    /// Per port: sampled node voltage.
    pub port_voltages: Vec<Vec<T>>,
    /// Windows integrated before convergence.
    pub windows_used: usize,
}

/// Window length: the smallest integer number of base periods that also
/// contains an integer number of drive periods (falls back to 16 periods
/// for incommensurate pairs).
pub fn analysis_window_periods<T: Scalar>(f_drive: T, f_base: T) -> usize {
    for m in 1..=64usize {
        let cycles = f_drive * T::of(m as f64) / f_base;
        if (cycles - cycles.round()).abs() < T::of(1e-9) * cycles.abs().max(T::one()) {
            return m;
        }
    }
    16
}

/// Integrates the driven network to steady state and returns the last
/// window of sampled port voltages.
pub fn integrate_to_steady_state<T: Scalar>(
    ss: &StateSpaceLtv<T>,
    drive_port: usize,
    f_drive: T,
    f_base: T,
    grid: &FrequencyGrid<T>,
    opts: &IntegrationOptions<T>,
) -> Result<SteadyStateWaveforms<T>> {
    let periods = analysis_window_periods(f_drive, f_base);
    let window = T::of(periods as f64) / f_base;
    let max_windows = (opts.max_periods / periods).max(2);
    let n_samp = opts.samples_per_window;
    // Norton amplitude 2/sqrt(z0): unit-amplitude source wave of 1/2
    let amp = T::of(2.0) / ss.port_z0(drive_port).sqrt();

    let mut x = vec![T::zero(); ss.state_dim()];
    let mut t = T::zero();
    let mut h = T::one() / (T::of(64.0) * f_drive.abs().max(f_base));
    let mut prev_harm: Option<Vec<C<T>>> = None;

    for w in 0..max_windows {
        let mut times = Vec::with_capacity(n_samp);
        let mut volts: Vec<Vec<T>> = vec![Vec::with_capacity(n_samp); ss.n_ports()];
        let t_start = t;
        for s in 0..n_samp {
            let t_target = t_start + window * T::of((s + 1) as f64) / T::of(n_samp as f64);
            integrate_span(ss, drive_port, f_drive, f_base, amp, &mut t, &mut x, t_target, &mut h, opts)?;
            times.push(t);
            for (p, v) in volts.iter_mut().enumerate() {
                v.push(ss.port_voltage(p, &x));
            }
        }
        // harmonic projection of every port voltage, stacked
        let mut harm = Vec::new();
        for v in &volts {
            let coeffs = extract_harmonics(&times, v, grid)?;
            harm.extend(coeffs);
        }
        if let Some(prev) = &prev_harm {
            let num: T = harm
                .iter()
                .zip(prev)
                .map(|(a, b)| (*a - *b).norm_sqr())
                .sum::<T>()
                .sqrt();
            let den: T = harm.iter().map(|a| a.norm_sqr()).sum::<T>().sqrt();
            if den > T::zero() && num / den < opts.steady_tol {
                return Ok(SteadyStateWaveforms {
                    times,
                    port_voltages: volts,
                    windows_used: w + 1,
                });
            }
        }
        prev_harm = Some(harm);
    }
    Err(Error::NoSteadyState(max_windows * periods))
}

/// Dormand-Prince 5(4) step from `t` to exactly `t_target`.
#[allow(clippy::too_many_arguments)]
fn integrate_span<T: Scalar>(
    ss: &StateSpaceLtv<T>,
    drive_port: usize,
    f_drive: T,
    f_base: T,
    amp: T,
    t: &mut T,
    x: &mut Vec<T>,
    t_target: T,
    h: &mut T,
    opts: &IntegrationOptions<T>,
) -> Result<()> {
    let dim = x.len();
    let mut k = vec![vec![T::zero(); dim]; 7];
    let mut xtmp = vec![T::zero(); dim];
    let a: [&[f64]; 6] = [
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
        &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
        &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    let c_nodes = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    let b5 = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    let b4 = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let mut steps = 0usize;
    while *t < t_target {
        let remaining = t_target - *t;
        let step = (*h).min(remaining);
        ss.rhs(*t, x, f_base, drive_port, f_drive, amp, &mut k[0]);
        for stage in 0..6 {
            for i in 0..dim {
                let mut acc = T::zero();
                for (j, &aij) in a[stage].iter().enumerate() {
                    acc += T::of(aij) * k[j][i];
                }
                xtmp[i] = x[i] + step * acc;
            }
            let t_stage = *t + step * T::of(c_nodes[stage]);
            let (head, tail) = k.split_at_mut(stage + 1);
            let _ = head;
            ss.rhs(t_stage, &xtmp, f_base, drive_port, f_drive, amp, &mut tail[0]);
        }
        // 5th-order solution and embedded error estimate
        let mut err = T::zero();
        let mut scale_norm = T::zero();
        let mut x5 = vec![T::zero(); dim];
        for i in 0..dim {
            let mut acc5 = T::zero();
            let mut acc4 = T::zero();
            for s in 0..7 {
                acc5 += T::of(b5[s]) * k[s][i];
                acc4 += T::of(b4[s]) * k[s][i];
            }
            x5[i] = x[i] + step * acc5;
            let e = step * (acc5 - acc4);
            let sc = opts.atol + opts.rtol * x[i].abs().max(x5[i].abs());
            err += (e / sc) * (e / sc);
            scale_norm += T::one();
        }
        let err_norm = (err / scale_norm).sqrt();
        if err_norm <= T::one() {
            *t += step;
            *x = x5;
        }
        let factor = if err_norm > T::zero() {
            (T::of(0.9) * (T::one() / err_norm).powf(T::of(0.2))).min(T::of(5.0)).max(T::of(0.2))
        } else {
            T::of(5.0)
        };
        *h = (step * factor).max(T::of(1e-18));
        steps += 1;
        if steps > 50_000_000 {
            return Err(Error::NoSteadyState(0));
        }
    }
    Ok(())
}

/// Least-squares projection of a real sampled waveform onto the grid
/// exponentials (and implicitly their conjugates, so real signals project
/// without bias). Returns one complex coefficient per grid harmonic.
pub fn extract_harmonics<T: Scalar>(
    times: &[T],
    samples: &[T],
    grid: &FrequencyGrid<T>,
) -> Result<Vec<C<T>>> {
    assert_eq!(times.len(), samples.len());
    let span = *times.last().expect("nonempty window") - times[0];
    let resolution = T::of(0.5) / span;

    // distinct |frequency| list with mapping from grid entries
    let mut mags: Vec<T> = Vec::new();
    let mut map: Vec<(usize, bool)> = Vec::new(); // (index into mags, negative?)
    for k in grid.harmonics() {
        let f = grid.freq(k);
        let m = f.abs();
        let neg = f < T::zero();
        if let Some(pos) = mags.iter().position(|&x| (x - m).abs() < resolution) {
            if (mags[pos] - m).abs() > T::of(1e-6) {
                // close but not equal: cannot resolve in this window
                return Err(Error::IllConditionedProjection);
            }
            map.push((pos, neg));
        } else {
            mags.push(m);
            map.push((mags.len() - 1, neg));
        }
    }
    // pairwise resolvability
    for i in 0..mags.len() {
        for jj in (i + 1)..mags.len() {
            if (mags[i] - mags[jj]).abs() < resolution {
                return Err(Error::IllConditionedProjection);
            }
        }
    }

    // real normal equations for basis [cos(w t), sin(w t)] per distinct f
    let nb = 2 * mags.len();
    let two_pi = T::of(2.0) * T::PI();
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(nb);
    for &m in &mags {
        let w = two_pi * m;
        basis.push(times.iter().map(|&t| (w * t).cos()).collect());
        basis.push(times.iter().map(|&t| (w * t).sin()).collect());
    }
    let mut gram = SpectralMatrix::zeros(nb);
    let mut rhs = vec![Complex::new(T::zero(), T::zero()); nb];
    for r in 0..nb {
        for c in r..nb {
            let dot: T = basis[r].iter().zip(&basis[c]).map(|(a, b)| *a * *b).sum();
            gram[(r, c)] = Complex::new(dot, T::zero());
            gram[(c, r)] = Complex::new(dot, T::zero());
        }
        let dot: T = basis[r].iter().zip(samples).map(|(a, b)| *a * *b).sum();
        rhs[r] = Complex::new(dot, T::zero());
    }
    let lu = checked_factor(&gram).map_err(|_| Error::IllConditionedProjection)?;
    let _: &LuFactors<T> = &lu;
    let mut sol = rhs;
    lu.solve_in_place(&mut sol);

    let half = T::of(0.5);
    let coeffs = map
        .iter()
        .map(|&(idx, neg)| {
            let a = sol[2 * idx].re;
            let b = sol[2 * idx + 1].re;
            if neg {
                Complex::new(a * half, b * half)
            } else {
                Complex::new(a * half, -b * half)
            }
        })
        .collect();
    Ok(coeffs)
}

/// One comparison row: spectral vs time-domain magnitude of a scattering
/// entry.
#[derive(Debug, Clone)]
pub struct OracleRow<T> {
    /// 1-based input and output port numbers.
    pub port_in: usize,
    pub port_out: usize,
    pub k: i64,
    pub f_out_hz: T,
    pub mag_spectral: T,
    pub mag_time_domain: T,
}

impl<T: Scalar> OracleRow<T> {
    pub fn rel_error(&self) -> T {
        (self.mag_spectral - self.mag_time_domain).abs()
            / self.mag_spectral.max(self.mag_time_domain)
    }
}

/// Result of a full spectral-vs-time-domain comparison.
#[derive(Debug, Clone)]
pub struct OracleComparison<T> {
    pub rows: Vec<OracleRow<T>>,
    pub notes: Vec<RealizationNote>,
    pub windows_used: Vec<usize>,
}

impl<T: Scalar> OracleComparison<T> {
    /// Worst relative magnitude error across all rows.
    pub fn worst_rel_error(&self) -> T {
        self.rows.iter().fold(T::zero(), |m, r| m.max(r.rel_error()))
    }
}

/// Runs the central equivalence check: realizes the device for the time
/// domain, solves the identical network spectrally, integrates it in both
/// directions, and compares every harmonic above `floor_dbc` (relative to
/// the strongest scattered component of that drive).
pub fn compare_with_spectral<T: Scalar>(
    dev: &DeviceGraph<T>,
    f_pi: T,
    f_drive: T,
    f_base: T,
    k_max: usize,
    floor_dbc: T,
    opts: &IntegrationOptions<T>,
) -> Result<OracleComparison<T>> {
    let form = realize_for_time_domain(dev, f_pi)?;
    let grid = FrequencyGrid::build(f_drive, f_base, k_max)?;
    let spectral = form.graph.solve_floquet_s(&grid, CoefficientMode::Exact)?;
    let ss = build_state_space(&form)?;

    let mut rows = Vec::new();
    let mut windows_used = Vec::new();
    for p_in in 0..ss.n_ports() {
        let waves = integrate_to_steady_state(&ss, p_in, f_drive, f_base, &grid, opts)?;
        windows_used.push(waves.windows_used);
        // incident wave amplitude is 1/2 with the Norton drive used above
        let a_in = T::of(0.5);
        let mut strongest = T::zero();
        let mut td_mags: Vec<Vec<T>> = Vec::new();
        for (p_out, v) in waves.port_voltages.iter().enumerate() {
            let coeffs = extract_harmonics(&waves.times, v, &grid)?;
            let z0 = ss.port_z0(p_out);
            let mags: Vec<T> = grid
                .harmonics()
                .map(|k| {
                    let idx = grid.index_of(k);
                    let mut b = coeffs[idx] / Complex::new(z0.sqrt(), T::zero());
                    if p_out == p_in && k == 0 {
                        b = b - Complex::new(a_in, T::zero());
                    }
                    b.norm() / a_in
                })
                .collect();
            for &m in &mags {
                strongest = strongest.max(m);
            }
            td_mags.push(mags);
        }
        let floor = strongest * T::of(10.0).powf(floor_dbc / T::of(20.0));
        for (p_out, mags) in td_mags.iter().enumerate() {
            for k in grid.harmonics() {
                let s_mag = spectral.get(p_out, k, p_in, 0).norm();
                let t_mag = mags[grid.index_of(k)];
                if s_mag.max(t_mag) >= floor {
                    rows.push(OracleRow {
                        port_in: p_in + 1,
                        port_out: p_out + 1,
                        k,
                        f_out_hz: grid.freq(k),
                        mag_spectral: s_mag,
                        mag_time_domain: t_mag,
                    });
                }
            }
        }
    }
    Ok(OracleComparison { rows, notes: form.notes, windows_used })
}

/// Time-averaged power delivered into the network at the driven port minus
/// power dissipated in the other terminations, as a fraction of input power
/// (static lossless networks conserve it).
pub fn energy_balance_error<T: Scalar>(
    ss: &StateSpaceLtv<T>,
    waves: &SteadyStateWaveforms<T>,
    drive_port: usize,
    f_drive: T,
) -> T {
    let n = waves.times.len();
    let amp_v = T::of(2.0) * ss.port_z0(drive_port).sqrt(); // source EMF amplitude
    let two_pi = T::of(2.0) * T::PI();
    let mut p_in = T::zero();
    let mut p_out = T::zero();
    for (i, &t) in waves.times.iter().enumerate() {
        let vs = amp_v * (two_pi * f_drive * t).cos();
        for p in 0..ss.n_ports() {
            let v = waves.port_voltages[p][i];
            let z0 = ss.port_z0(p);
            if p == drive_port {
                // current from the source branch into the node
                let i_in = (vs - v) / z0;
                p_in += i_in * v;
            } else {
                p_out += v * v / z0;
            }
        }
    }
    let p_in = p_in / T::of(n as f64);
    let p_out = p_out / T::of(n as f64);
    ((p_in - p_out) / p_in).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mna::DeviceGraph;
    use approx::assert_relative_eq;

    /// Static parallel RLC driven through its port: analytic sanity checks.
    #[test]
    fn rlc_state_space_and_decay() {
        let l = 906e-12;
        let c = 776.5e-15;
        let mut dev: DeviceGraph<f64> = DeviceGraph::new();
        let n1 = dev.add_node("n1").unwrap();
        dev.add_shunt("sq", n1, ElementKind::Squid(SquidSpec::new(4e-6, 10, 0.35))).unwrap();
        dev.add_shunt("c", n1, ElementKind::Capacitor(c)).unwrap();
        dev.add_port(n1, 50.0).unwrap();
        let form = OracleForm { graph: dev, notes: vec![] };
        let ss = build_state_space(&form).unwrap();
        assert_eq!(ss.state_dim(), 2);
        // undriven decay from an initial state: energy must drop to ~zero
        let f_res = 1.0 / (2.0 * std::f64::consts::PI * (l * c).sqrt());
        let opts = IntegrationOptions::default();
        let mut x = vec![1e-6, 0.0];
        let mut t = 0.0;
        let mut h = 1e-13;
        let horizon = 300.0 / f_res; // many decay constants at Q ~ 2
        integrate_span(&ss, 0, f_res, 1e9, 0.0, &mut t, &mut x, horizon, &mut h, &opts).unwrap();
        assert!(x[0].abs() < 1e-6 * 1e-6, "voltage failed to decay: {}", x[0]);
    }

    #[test]
    fn matched_divider_voltage_division() {
        // static through: source z0 into a z0 load via a tiny network: a
        // huge capacitor node behaves as a short at the test frequency is
        // awkward; instead check the driven RC with giant C: port voltage ->
        // Vs/2 * |H| with H known. Simplest: resistor-only node.
        let mut dev: DeviceGraph<f64> = DeviceGraph::new();
        let n1 = dev.add_node("n1").unwrap();
        // 50-ohm load at the node; the port adds another 50-ohm termination
        dev.add_shunt("rl", n1, ElementKind::Resistor(50.0)).unwrap();
        // parasitic cap so the capacitance matrix is nonsingular
        dev.add_shunt("cp", n1, ElementKind::Capacitor(1e-18)).unwrap();
        dev.add_port(n1, 50.0).unwrap();
        let ss = build_state_space(&OracleForm { graph: dev, notes: vec![] }).unwrap();
        let f = 1e9;
        let grid = FrequencyGrid::build(f, 0.25e9, 2).unwrap();
        let opts = IntegrationOptions::default();
        let waves = integrate_to_steady_state(&ss, 0, f, 0.25e9, &grid, &opts).unwrap();
        let coeffs = extract_harmonics(&waves.times, &waves.port_voltages[0], &grid).unwrap();
        // Vs = 2 sqrt(z0) cos -> node sees Vs * (25/75)... with Norton
        // 2cos/sqrt(z0) into 2/z0 total conductance: V = cos * sqrt(z0)/1 ...
        let v0 = coeffs[grid.index_of(0)].norm();
        let expect = 50.0f64.sqrt() / 2.0; // amp/(g_total) = (2/sqrt(50))/(2/50)/2
        assert_relative_eq!(v0, expect, max_relative = 5e-3);
    }

    #[test]
    fn harmonic_extraction_recovers_synthetic_tones() {
        let grid = FrequencyGrid::build(6e9, 0.7e9, 2).unwrap();
        let n = 4096;
        let window = 1e-8;
        let times: Vec<f64> = (0..n).map(|i| window * i as f64 / n as f64).collect();
        // pure tone at k=0
        let samples: Vec<f64> =
            times.iter().map(|&t| (2.0 * std::f64::consts::PI * 6e9 * t).cos()).collect();
        let coeffs = extract_harmonics(&times, &samples, &grid).unwrap();
        assert_relative_eq!(coeffs[grid.index_of(0)].norm(), 0.5, max_relative = 1e-6);
        for k in [-2i64, -1, 1, 2] {
            assert!(coeffs[grid.index_of(k)].norm() < 1e-6);
        }
        // two tones with distinct amplitude/phase recovered exactly
        let samples2: Vec<f64> = times
            .iter()
            .map(|&t| {
                0.4 * (2.0 * std::f64::consts::PI * 5.3e9 * t + 0.3).cos()
                    + 0.1 * (2.0 * std::f64::consts::PI * 6.7e9 * t - 1.1).cos()
            })
            .collect();
        let c2 = extract_harmonics(&times, &samples2, &grid).unwrap();
        assert_relative_eq!(c2[grid.index_of(-1)].norm(), 0.2, max_relative = 1e-6);
        assert_relative_eq!(c2[grid.index_of(1)].norm(), 0.05, max_relative = 1e-6);
        assert_relative_eq!(c2[grid.index_of(-1)].arg(), 0.3, max_relative = 1e-5);
    }

    #[test]
    fn extraction_rejects_unresolvable_grids() {
        let grid = FrequencyGrid::build(6e9, 1e6, 1).unwrap(); // 1 MHz spacing
        let n = 256;
        let window = 1e-9; // way too short to resolve 1 MHz
        let times: Vec<f64> = (0..n).map(|i| window * i as f64 / n as f64).collect();
        let samples = vec![0.0; n];
        assert!(matches!(
            extract_harmonics(&times, &samples, &grid),
            Err(Error::IllConditionedProjection)
        ));
    }

    #[test]
    fn window_period_selection() {
        assert_eq!(analysis_window_periods(6.0e9, 0.7e9), 7); // 6/0.7*7 = 60
        assert_eq!(analysis_window_periods(6.9e9, 0.2e9), 10);
        assert_eq!(analysis_window_periods(5.95e9, 0.7e9), 14); // 5.95/0.7 = 8.5
    }
}
