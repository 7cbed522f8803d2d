//! Steady-state Kalman predictors used by the ensemble and the supervisor.
//!
//! * [`EdgeFilter`]: one per ensemble clock, estimating its incoming edge
//!   states `ξ_i = (V_i ⊗ I₂) x` from relative phase measurements.
//! * [`SupervisorFilter`]: estimates the tracking error `z̃ = z̄ − Z̄` from the
//!   summed GNSS edge measurement, compensating the synchronization by-product
//!   with the ensemble's edge-state estimates.
//! * [`GnssEdgeFilter`]: estimates the GNSS edge states `ξ_G` directly; only
//!   needed by the alternative tracking law.
//!
//! All filters are in one-step predictor form with a gain precomputed from
//! the algebraic Riccati equation; no covariance is propagated at run time.

use crate::clock::{input, process_noise_cov, readout, transition, ClockParams, GnssClockParams};
use crate::error::{Error, Result};
use crate::network::Topology;
use crate::numerics::{block_diag, identity, kron, row_matrix, solve_dare, DareOptions, Matrix, Vector};

/// Process and measurement noise covariances of the whole setup.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Ensemble process noise `Q = diag(Q_i)` (`2n × 2n`).
    pub q: Matrix,
    /// GNSS clock process noise `Q_G = diag(Q_Gi)` (`2g × 2g`).
    pub q_g: Matrix,
    /// Edge measurement covariance `R_i` per node (`|N_i| × |N_i|`).
    pub r_i: Vec<Matrix>,
    /// GNSS edge measurement covariance `R_G` (`g × g`).
    pub r_g: Matrix,
}

impl NoiseModel {
    pub fn new(
        clocks: &[ClockParams],
        gnss: &[GnssClockParams],
        r_i: Vec<Matrix>,
        r_g: Matrix,
        tau: f64,
    ) -> Result<Self> {
        let q = block_diag(
            &clocks
                .iter()
                .map(|c| process_noise_cov(c, tau))
                .collect::<Result<Vec<_>>>()?,
        );
        let q_g = block_diag(
            &gnss
                .iter()
                .map(|c| process_noise_cov(&c.params, tau))
                .collect::<Result<Vec<_>>>()?,
        );
        Ok(Self { q, q_g, r_i, r_g })
    }

    /// Stacked edge measurement covariance `R = diag(R_i)`.
    pub fn r(&self) -> Matrix {
        block_diag(&self.r_i)
    }

    pub fn check(&self, topology: &Topology) -> Result<()> {
        let (n, g) = (topology.n(), topology.g());
        if self.q.shape() != (2 * n, 2 * n) || self.q_g.shape() != (2 * g, 2 * g) {
            return Err(Error::DimensionMismatch("process noise size".into()));
        }
        if self.r_g.shape() != (g, g) || self.r_i.len() != n {
            return Err(Error::DimensionMismatch("measurement noise size".into()));
        }
        for i in 0..n {
            let d = topology.neighbors(i).len();
            if self.r_i[i].shape() != (d, d) {
                return Err(Error::DimensionMismatch(format!(
                    "R_{i} is {:?}, node has {d} neighbours",
                    self.r_i[i].shape()
                )));
            }
        }
        Ok(())
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!("{what}: got {got}, expected {want}")))
    }
}

/// `x ← A x + H (y − C x) + input` where `C` reads every other entry (phases).
fn predictor_update(
    a: &Matrix,
    gain: &Matrix,
    estimate: &mut Vector,
    scratch: &mut Vector,
    innovation: &Vector,
    known_input: &Vector,
) {
    scratch.gemv(1.0, a, estimate, 0.0);
    scratch.gemv(1.0, gain, innovation, 1.0);
    *scratch += known_input;
    std::mem::swap(estimate, scratch);
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFilter {
    node: usize,
    tau: f64,
    /// `(i, j)` pairs of this node's edges, in canonical order.
    edges: Vec<(usize, usize)>,
    a: Matrix,
    c: Matrix,
    q_bar: Option<Matrix>,
    r: Option<Matrix>,
    gain: Matrix,
    steady_cov: Option<Matrix>,
    estimate: Vector,
    scratch: Vector,
    innovation: Vector,
}

impl EdgeFilter {
    fn system(topology: &Topology, node: usize, tau: f64) -> Result<(Vec<(usize, usize)>, Matrix, Matrix)> {
        if node >= topology.n() {
            return Err(Error::BadIndex(format!("node {node} out of range")));
        }
        let edges = topology.edges()[topology.node_edges(node)].to_vec();
        let d = edges.len();
        Ok((edges, kron(&identity(d), &transition(tau)), kron(&identity(d), &readout())))
    }

    /// Designs the filter of `node` from the DARE with
    /// `Q̄_i = (V_i ⊗ I₂) Q (V_i ⊗ I₂)ᵀ`.
    pub fn design(
        topology: &Topology,
        node: usize,
        q: &Matrix,
        r_i: &Matrix,
        tau: f64,
        opts: DareOptions,
    ) -> Result<Self> {
        let (edges, a, c) = Self::system(topology, node, tau)?;
        let d = edges.len();
        check_len("ensemble Q rows", q.nrows(), 2 * topology.n())?;
        check_len("R_i size", r_i.nrows(), d)?;
        let lift = kron(&topology.v_i(node), &identity(2));
        let q_bar = &lift * q * lift.transpose();
        let sol = solve_dare(&a, &c, &q_bar, r_i, opts)?;
        Ok(Self {
            node,
            tau,
            edges,
            a,
            c,
            q_bar: Some(q_bar),
            r: Some(r_i.clone()),
            gain: sol.gain,
            steady_cov: Some(sol.p),
            estimate: Vector::zeros(2 * d),
            scratch: Vector::zeros(2 * d),
            innovation: Vector::zeros(d),
        })
    }

    /// Filter with a given predictor gain `H_i*` (e.g. loaded from a gain file).
    pub fn with_gain(topology: &Topology, node: usize, tau: f64, gain: Matrix) -> Result<Self> {
        let (edges, a, c) = Self::system(topology, node, tau)?;
        let d = edges.len();
        if gain.shape() != (2 * d, d) {
            return Err(Error::DimensionMismatch(format!(
                "H_{node}* is {:?}, expected ({}, {d})",
                gain.shape(),
                2 * d
            )));
        }
        Ok(Self {
            node,
            tau,
            edges,
            a,
            c,
            q_bar: None,
            r: None,
            gain,
            steady_cov: None,
            estimate: Vector::zeros(2 * d),
            scratch: Vector::zeros(2 * d),
            innovation: Vector::zeros(d),
        })
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Predictor gain `H_i* = A_i P_i C_iᵀ (C_i P_i C_iᵀ + R_i)⁻¹`.
    pub fn gain(&self) -> &Matrix {
        &self.gain
    }

    pub fn steady_cov(&self) -> Option<&Matrix> {
        self.steady_cov.as_ref()
    }

    pub fn q_bar(&self) -> Option<&Matrix> {
        self.q_bar.as_ref()
    }

    pub fn r(&self) -> Option<&Matrix> {
        self.r.as_ref()
    }

    pub fn system_matrices(&self) -> (&Matrix, &Matrix) {
        (&self.a, &self.c)
    }

    /// Prediction error matrix `A_i − H_i* C_i`.
    pub fn error_matrix(&self) -> Matrix {
        &self.a - &self.gain * &self.c
    }

    pub fn estimate(&self) -> &Vector {
        &self.estimate
    }

    pub fn set_estimate(&mut self, estimate: Vector) -> Result<()> {
        check_len("edge estimate", estimate.len(), 2 * self.edges.len())?;
        self.estimate = estimate;
        Ok(())
    }

    /// `(V_i ⊗ B) u` for the full control vector `u`.
    pub fn known_input(&self, u: &[f64]) -> Vector {
        let mut out = Vector::zeros(2 * self.edges.len());
        self.known_input_into(u, &mut out);
        out
    }

    pub fn known_input_into(&self, u: &[f64], out: &mut Vector) {
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            let du = u[j] - u[i];
            out[2 * k] = self.tau * du;
            out[2 * k + 1] = du;
        }
    }

    /// `ξ̂⁻[k+1] = A_i ξ̂⁻[k] + H_i* (y_i − C_i ξ̂⁻[k]) + known_input`.
    pub fn step(&mut self, y: &[f64], known_input: &Vector) -> Result<()> {
        let d = self.edges.len();
        check_len("edge measurement", y.len(), d)?;
        check_len("edge known input", known_input.len(), 2 * d)?;
        for k in 0..d {
            self.innovation[k] = y[k] - self.estimate[2 * k];
        }
        predictor_update(
            &self.a,
            &self.gain,
            &mut self.estimate,
            &mut self.scratch,
            &self.innovation,
            known_input,
        );
        Ok(())
    }
}

/// `Ȳ = 1_gᵀ Y`.
pub fn summed_measurement(y: &[f64]) -> f64 {
    y.iter().sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisorFilter {
    g: usize,
    a: Matrix,
    /// Effective measurement matrix `−g C`.
    meas: Matrix,
    q_bar_g: Option<Matrix>,
    r_bar_g: Option<f64>,
    /// `H_z̃* = P (−gC)ᵀ (g² C P Cᵀ + R̄_G)⁻¹` (2×1), applied as `A H_z̃*`.
    gain: Matrix,
    a_gain: Matrix,
    steady_cov: Option<Matrix>,
    /// `(q_Aᵀ V† ⊗ C)`.
    compensation: Matrix,
    /// `(qᵀ ⊗ B)`.
    input_row: Matrix,
    estimate: Vector,
}

impl SupervisorFilter {
    fn structure(topology: &Topology, tau: f64) -> (Matrix, Matrix, Matrix, Matrix) {
        let g = topology.g() as f64;
        let a = transition(tau);
        let meas = readout() * (-g);
        let comp_row = row_matrix(topology.q_a()) * topology.v_pinv();
        let compensation = kron(&comp_row, &readout());
        let input_row = kron(&row_matrix(topology.q()), &input(tau));
        (a, meas, compensation, input_row)
    }

    /// `Q̄_G = (qᵀ⊗I₂) Q (qᵀ⊗I₂)ᵀ + (q_Gᵀ⊗I₂) Q_G (q_Gᵀ⊗I₂)ᵀ`.
    pub fn averaged_process_cov(topology: &Topology, q: &Matrix, q_g: &Matrix) -> Matrix {
        let avg = kron(&row_matrix(topology.q()), &identity(2));
        let avg_g = kron(&row_matrix(topology.q_g()), &identity(2));
        &avg * q * avg.transpose() + &avg_g * q_g * avg_g.transpose()
    }

    /// `R̄_G = 1_gᵀ R_G 1_g`, the variance of the summed measurement noise.
    pub fn summed_noise_var(r_g: &Matrix) -> f64 {
        r_g.sum()
    }

    pub fn design(
        topology: &Topology,
        q: &Matrix,
        q_g: &Matrix,
        r_g: &Matrix,
        tau: f64,
        opts: DareOptions,
    ) -> Result<Self> {
        check_len("ensemble Q rows", q.nrows(), 2 * topology.n())?;
        check_len("GNSS Q rows", q_g.nrows(), 2 * topology.g())?;
        check_len("R_G rows", r_g.nrows(), topology.g())?;
        let (a, meas, compensation, input_row) = Self::structure(topology, tau);
        let q_bar_g = Self::averaged_process_cov(topology, q, q_g);
        let r_bar_g = Self::summed_noise_var(r_g);
        let sol = solve_dare(&a, &meas, &q_bar_g, &Matrix::from_element(1, 1, r_bar_g), opts)?;
        let a_gain = &a * &sol.filter_gain;
        Ok(Self {
            g: topology.g(),
            a,
            meas,
            q_bar_g: Some(q_bar_g),
            r_bar_g: Some(r_bar_g),
            gain: sol.filter_gain,
            a_gain,
            steady_cov: Some(sol.p),
            compensation,
            input_row,
            estimate: Vector::zeros(2),
        })
    }

    pub fn with_gain(topology: &Topology, tau: f64, gain: Matrix) -> Result<Self> {
        if gain.shape() != (2, 1) {
            return Err(Error::DimensionMismatch(format!("H_z* is {:?}", gain.shape())));
        }
        let (a, meas, compensation, input_row) = Self::structure(topology, tau);
        let a_gain = &a * &gain;
        Ok(Self {
            g: topology.g(),
            a,
            meas,
            q_bar_g: None,
            r_bar_g: None,
            gain,
            a_gain,
            steady_cov: None,
            compensation,
            input_row,
            estimate: Vector::zeros(2),
        })
    }

    pub fn gain(&self) -> &Matrix {
        &self.gain
    }

    pub fn steady_cov(&self) -> Option<&Matrix> {
        self.steady_cov.as_ref()
    }

    pub fn q_bar_g(&self) -> Option<&Matrix> {
        self.q_bar_g.as_ref()
    }

    pub fn r_bar_g(&self) -> Option<f64> {
        self.r_bar_g
    }

    pub fn measurement_matrix(&self) -> &Matrix {
        &self.meas
    }

    pub fn compensation(&self) -> &Matrix {
        &self.compensation
    }

    /// `A (I₂ − H_z̃* (−gC))`.
    pub fn error_matrix(&self) -> Matrix {
        &self.a * (identity(2) - &self.gain * &self.meas)
    }

    pub fn estimate(&self) -> &Vector {
        &self.estimate
    }

    pub fn set_estimate(&mut self, estimate: Vector) -> Result<()> {
        check_len("supervisor estimate", estimate.len(), 2)?;
        self.estimate = estimate;
        Ok(())
    }

    pub fn receivers(&self) -> usize {
        self.g
    }

    /// Innovation `Ȳ + gCẑ̃⁻ + (q_AᵀV†⊗C) ξ̂⁻`.
    pub fn innovation(&self, y_bar: f64, xi_hat_all: &Vector) -> f64 {
        let predicted = (&self.meas * &self.estimate)[0];
        y_bar - predicted + self.compensation.row(0).transpose().dot(xi_hat_all)
    }

    /// `ẑ̃⁻[k+1] = A ẑ̃⁻ + A H_z̃* (Ȳ + gCẑ̃⁻ + (q_AᵀV†⊗C) ξ̂⁻) + (qᵀ⊗B) u`.
    pub fn step(&mut self, y_bar: f64, xi_hat_all: &Vector, u: &[f64]) -> Result<()> {
        check_len("stacked edge estimate", xi_hat_all.len(), self.compensation.ncols())?;
        check_len("control", u.len(), self.input_row.ncols())?;
        let innov = self.innovation(y_bar, xi_hat_all);
        let mut next = &self.a * &self.estimate + self.a_gain.column(0) * innov;
        for (i, &ui) in u.iter().enumerate() {
            next[0] += self.input_row[(0, i)] * ui;
            next[1] += self.input_row[(1, i)] * ui;
        }
        self.estimate = next;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnssEdgeFilter {
    tau: f64,
    attachments: Vec<usize>,
    a: Matrix,
    c: Matrix,
    gain: Matrix,
    steady_cov: Option<Matrix>,
    estimate: Vector,
    scratch: Vector,
    innovation: Vector,
}

impl GnssEdgeFilter {
    fn system(topology: &Topology, tau: f64) -> (Matrix, Matrix) {
        let g = topology.g();
        (kron(&identity(g), &transition(tau)), kron(&identity(g), &readout()))
    }

    /// DARE on `(I_g⊗A, I_g⊗C, (V_G⊗I₂) diag(Q, Q_G) (V_G⊗I₂)ᵀ, R_G)`.
    pub fn design(
        topology: &Topology,
        q: &Matrix,
        q_g: &Matrix,
        r_g: &Matrix,
        tau: f64,
        opts: DareOptions,
    ) -> Result<Self> {
        check_len("ensemble Q rows", q.nrows(), 2 * topology.n())?;
        check_len("GNSS Q rows", q_g.nrows(), 2 * topology.g())?;
        check_len("R_G rows", r_g.nrows(), topology.g())?;
        let (a, c) = Self::system(topology, tau);
        let lift = kron(topology.v_g(), &identity(2));
        let q_bar = &lift * block_diag(&[q.clone(), q_g.clone()]) * lift.transpose();
        let sol = solve_dare(&a, &c, &q_bar, r_g, opts)?;
        let g = topology.g();
        Ok(Self {
            tau,
            attachments: topology.attachments().to_vec(),
            a,
            c,
            gain: sol.gain,
            steady_cov: Some(sol.p),
            estimate: Vector::zeros(2 * g),
            scratch: Vector::zeros(2 * g),
            innovation: Vector::zeros(g),
        })
    }

    pub fn with_gain(topology: &Topology, tau: f64, gain: Matrix) -> Result<Self> {
        let g = topology.g();
        if gain.shape() != (2 * g, g) {
            return Err(Error::DimensionMismatch(format!("H_G* is {:?}", gain.shape())));
        }
        let (a, c) = Self::system(topology, tau);
        Ok(Self {
            tau,
            attachments: topology.attachments().to_vec(),
            a,
            c,
            gain,
            steady_cov: None,
            estimate: Vector::zeros(2 * g),
            scratch: Vector::zeros(2 * g),
            innovation: Vector::zeros(g),
        })
    }

    pub fn gain(&self) -> &Matrix {
        &self.gain
    }

    pub fn steady_cov(&self) -> Option<&Matrix> {
        self.steady_cov.as_ref()
    }

    pub fn error_matrix(&self) -> Matrix {
        &self.a - &self.gain * &self.c
    }

    pub fn estimate(&self) -> &Vector {
        &self.estimate
    }

    pub fn set_estimate(&mut self, estimate: Vector) -> Result<()> {
        check_len("GNSS edge estimate", estimate.len(), 2 * self.attachments.len())?;
        self.estimate = estimate;
        Ok(())
    }

    /// `(V_G ⊗ I₂) [(I_n ⊗ B) u; 0]`: GNSS edge `j` sees `−B u_i` of its MAC.
    pub fn known_input(&self, u: &[f64]) -> Vector {
        let mut out = Vector::zeros(2 * self.attachments.len());
        self.known_input_into(u, &mut out);
        out
    }

    pub fn known_input_into(&self, u: &[f64], out: &mut Vector) {
        for (j, &mac) in self.attachments.iter().enumerate() {
            out[2 * j] = -self.tau * u[mac];
            out[2 * j + 1] = -u[mac];
        }
    }

    pub fn step(&mut self, y: &[f64], known_input: &Vector) -> Result<()> {
        let g = self.attachments.len();
        check_len("GNSS measurement", y.len(), g)?;
        check_len("GNSS known input", known_input.len(), 2 * g)?;
        for j in 0..g {
            self.innovation[j] = y[j] - self.estimate[2 * j];
        }
        predictor_update(
            &self.a,
            &self.gain,
            &mut self.estimate,
            &mut self.scratch,
            &self.innovation,
            known_input,
        );
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dare_residual, spectral_radius};
    use crate::presets;

    fn fig2() -> Topology {
        Topology::build(3, 2, &[(0, 1), (1, 2)], &[(0, 0), (1, 2)]).unwrap()
    }

    fn paper_noise() -> NoiseModel {
        presets::paper_fig4().noise_model().unwrap()
    }

    #[test]
    fn single_edge_zero_noise_gives_zero_gain() {
        let t = fig2();
        let q = Matrix::zeros(6, 6);
        let f = EdgeFilter::design(&t, 0, &q, &Matrix::identity(1, 1), 1.0, DareOptions::default())
            .unwrap();
        assert_eq!(f.steady_cov().unwrap(), &Matrix::zeros(2, 2));
        assert_eq!(f.gain(), &Matrix::zeros(2, 1));
    }

    #[test]
    fn paper_node2_filter_is_stable_and_fixed_point() {
        let t = fig2();
        let noise = paper_noise();
        let f = EdgeFilter::design(&t, 1, &noise.q, &noise.r_i[1], 1.0, DareOptions::default())
            .unwrap();
        assert_eq!(f.error_matrix().shape(), (4, 4));
        assert!(spectral_radius(&f.error_matrix()) < 1.0);
        let (a, c) = f.system_matrices();
        let res = dare_residual(a, c, f.q_bar().unwrap(), f.r().unwrap(), f.steady_cov().unwrap())
            .unwrap();
        assert!(res <= 1e-9);
    }

    #[test]
    fn single_edge_filter_matches_generic_dare() {
        // Node 0 of the path has a single edge (0 -> 1); its Q̄ is Q_0 + Q_1.
        let t = fig2();
        let noise = paper_noise();
        let r = Matrix::from_element(1, 1, 0.1895e-28);
        let f = EdgeFilter::design(&t, 0, &noise.q, &r, 1.0, DareOptions::default()).unwrap();
        let q_bar = noise.q.view((0, 0), (2, 2)) + noise.q.view((2, 2), (2, 2));
        let direct = solve_dare(&transition(1.0), &readout(), &q_bar.into_owned(), &r, DareOptions::default())
            .unwrap();
        assert!((f.steady_cov().unwrap() - &direct.p).abs().max() <= 1e-12 * direct.p.abs().max());
        assert!((f.gain() - &direct.gain).abs().max() <= 1e-9);
    }

    #[test]
    fn edge_step_examples() {
        let t = fig2();
        let mut f = EdgeFilter::with_gain(&t, 1, 1.0, Matrix::zeros(4, 2)).unwrap();
        f.step(&[0.0, 0.0], &Vector::zeros(4)).unwrap();
        assert_eq!(f.estimate(), &Vector::zeros(4));

        // H = 0: pure propagation plus input.
        f.set_estimate(Vector::from_vec(vec![1.0, 0.5, -2.0, 0.25])).unwrap();
        let input = Vector::from_vec(vec![0.1, 0.2, 0.3, 0.4]);
        f.step(&[9.0, 9.0], &input).unwrap();
        assert_eq!(f.estimate().as_slice(), &[1.6, 0.7, -1.45, 0.65]);

        assert!(matches!(f.step(&[0.0], &input), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn known_input_is_edge_difference_of_controls() {
        let t = fig2();
        let f = EdgeFilter::with_gain(&t, 1, 2.0, Matrix::zeros(4, 2)).unwrap();
        let input = f.known_input(&[1.0, 3.0, 7.0]);
        // edges (1,0) and (1,2): u_j - u_i = -2, 4
        assert_eq!(input.as_slice(), &[-4.0, -2.0, 8.0, 4.0]);
        let common = f.known_input(&[5.0, 5.0, 5.0]);
        assert_eq!(common, Vector::zeros(4));
    }

    #[test]
    fn supervisor_zero_noise_gives_zero_gain() {
        let t = fig2();
        let f = SupervisorFilter::design(
            &t,
            &Matrix::zeros(6, 6),
            &Matrix::zeros(4, 4),
            &Matrix::identity(2, 2),
            1.0,
            DareOptions::default(),
        )
        .unwrap();
        assert_eq!(f.steady_cov().unwrap(), &Matrix::zeros(2, 2));
        assert_eq!(f.gain(), &Matrix::zeros(2, 1));
    }

    #[test]
    fn supervisor_paper_filter_is_stable() {
        let t = fig2();
        let noise = paper_noise();
        let f = SupervisorFilter::design(&t, &noise.q, &noise.q_g, &noise.r_g, 1.0, DareOptions::default())
            .unwrap();
        assert!(spectral_radius(&f.error_matrix()) < 1.0);
        assert_eq!(f.r_bar_g().unwrap(), noise.r_g.sum());
    }

    #[test]
    fn supervisor_dare_invariant_under_sign_flip() {
        // g = 1: measurement matrix is -C; the covariance equals the +C filter's.
        let t = Topology::build(3, 1, &[(0, 1), (1, 2)], &[(0, 1)]).unwrap();
        let noise = presets::paper_fig4().noise_model().unwrap();
        let q_g = noise.q_g.view((0, 0), (2, 2)).into_owned();
        let r_g = Matrix::from_element(1, 1, 0.1721e-16);
        let f = SupervisorFilter::design(&t, &noise.q, &q_g, &r_g, 1.0, DareOptions::default()).unwrap();
        let q_bar = f.q_bar_g().unwrap().clone();
        let plain = solve_dare(&transition(1.0), &readout(), &q_bar, &r_g, DareOptions::default()).unwrap();
        assert!((f.steady_cov().unwrap() - &plain.p).abs().max() <= 1e-12 * plain.p.abs().max());
        assert!((f.gain() + &plain.filter_gain).abs().max() <= 1e-12 * plain.filter_gain.abs().max());
    }

    #[test]
    fn supervisor_step_examples() {
        let t = fig2();
        let gain = Matrix::from_row_slice(2, 1, &[-0.3, -0.01]);
        let mut f = SupervisorFilter::with_gain(&t, 1.0, gain).unwrap();
        f.step(0.0, &Vector::zeros(8), &[0.0; 3]).unwrap();
        assert_eq!(f.estimate(), &Vector::zeros(2));

        f.set_estimate(Vector::from_vec(vec![1.0, 0.0])).unwrap();
        // consistent measurement: Ȳ = -g C ẑ = -2
        f.step(-2.0, &Vector::zeros(8), &[0.0; 3]).unwrap();
        assert!((f.estimate() - Vector::from_vec(vec![1.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn summed_measurement_examples() {
        assert_eq!(summed_measurement(&[0.0, 0.0]), 0.0);
        assert!((summed_measurement(&[1e-9, -3e-9]) + 2e-9).abs() < 1e-24);
    }

    #[test]
    fn gnss_edge_filter_zero_noise_and_stability() {
        let t = fig2();
        let f = GnssEdgeFilter::design(
            &t,
            &Matrix::zeros(6, 6),
            &Matrix::zeros(4, 4),
            &Matrix::identity(2, 2),
            1.0,
            DareOptions::default(),
        )
        .unwrap();
        assert_eq!(f.gain(), &Matrix::zeros(4, 2));

        let noise = paper_noise();
        let f = GnssEdgeFilter::design(&t, &noise.q, &noise.q_g, &noise.r_g, 1.0, DareOptions::default())
            .unwrap();
        assert!(spectral_radius(&f.error_matrix()) < 1.0);
        assert_eq!(f.known_input(&[1.0, 2.0, 3.0]).as_slice(), &[-1.0, -1.0, -3.0, -3.0]);
    }

    #[test]
    fn gnss_edge_filter_single_receiver_matches_edge_filter() {
        // One GAC on MAC 0 and the edge filter of node 0 (single neighbour 1)
        // see the same structure when the GAC carries MAC 1's noise.
        let t = Topology::build(2, 1, &[(0, 1)], &[(0, 0)]).unwrap();
        let c0 = ClockParams::new(0.0289e-18, 0.0227e-24);
        let c1 = ClockParams::new(0.0149e-18, 2.7889e-28);
        let noise = NoiseModel::new(
            &[c0, c1],
            &[GnssClockParams { params: c1, theta0: 0.0 }],
            vec![Matrix::from_element(1, 1, 2e-29), Matrix::from_element(1, 1, 2e-29)],
            Matrix::from_element(1, 1, 2e-29),
            1.0,
        )
        .unwrap();
        let gf = GnssEdgeFilter::design(&t, &noise.q, &noise.q_g, &noise.r_g, 1.0, DareOptions::default())
            .unwrap();
        let ef = EdgeFilter::design(&t, 0, &noise.q, &noise.r_i[0], 1.0, DareOptions::default()).unwrap();
        let (pg, pe) = (gf.steady_cov().unwrap(), ef.steady_cov().unwrap());
        assert!((pg - pe).abs().max() <= 1e-12 * pe.abs().max());
        assert!((gf.gain() - ef.gain()).abs().max() <= 1e-9);
    }
}
