//! Gain synthesis and control laws.
//!
//! Synchronization: `u_syn,i = ½ F Σ_j (ξ̂_ij − ξ̂_ji)` with `F` chosen so that
//! `Π⊗A − ℒ⊗BF` is Schur. Tracking: the supervisor broadcasts
//! `u_G = −(1_n⊗F_B) ẑ̃⁻` every `s` steps, with `F_B` minimizing the
//! stationary tracking error at broadcast instants, an H2 cost on the
//! periodic closed loop `ρ̃[(l+1)s] = Ã Ã₀^{s−1} ρ̃[ls] + noise` where
//! `ρ̃ = [z̃; e_z̃; e⁻]`.

use serde::{Deserialize, Serialize};

use crate::clock::{input, transition};
use crate::error::{Error, Result};
use crate::estimation::{EdgeFilter, NoiseModel, SupervisorFilter};
use crate::network::Topology;
use crate::numerics::{block_diag, identity, kron, row_matrix, solve_dlyap, spectral_radius, Matrix};

/// Parallel map with results in input order.
pub(crate) fn ordered_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncGain {
    pub f: [f64; 2],
    /// Spectral radius of `Π⊗A − ℒ⊗BF`.
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyncSearch {
    /// Points per axis of the log-spaced grid.
    pub grid: usize,
    /// Coordinate-descent sweeps after the grid.
    pub polish_sweeps: usize,
}

impl Default for SyncSearch {
    fn default() -> Self {
        Self {
            grid: 48,
            polish_sweeps: 60,
        }
    }
}

fn gain_row(f: [f64; 2]) -> Matrix {
    Matrix::from_row_slice(1, 2, &f)
}

/// Spectral radius of `Π⊗A − ℒ⊗BF` on the full `2n × 2n` matrix.
pub fn sync_radius(topology: &Topology, tau: f64, f: [f64; 2]) -> f64 {
    let m = kron(topology.pi(), &transition(tau))
        - kron(topology.laplacian(), &(input(tau) * gain_row(f)));
    spectral_radius(&m)
}

/// `max_μ ρ(A − μBF)` over the nonzero Laplacian eigenvalues.
fn decoupled_radius(mus: &[f64], tau: f64, f: [f64; 2]) -> f64 {
    mus.iter()
        .map(|&mu| {
            // A − μBF = [[1 − μτf1, τ − μτf2], [−μf1, 1 − μf2]]
            let m = Matrix::from_row_slice(
                2,
                2,
                &[1.0 - mu * tau * f[0], tau - mu * tau * f[1], -mu * f[0], 1.0 - mu * f[1]],
            );
            spectral_radius(&m)
        })
        .fold(0.0, f64::max)
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo * hi).sqrt()];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Searches `F` minimizing the worst decoupled radius, then checks the full
/// matrix.
pub fn design_sync_gain(topology: &Topology, tau: f64, search: SyncSearch) -> Result<SyncGain> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidTau(tau));
    }
    let mus = topology.nonzero_laplacian_eigenvalues();
    let mu_max = mus.iter().cloned().fold(0.0, f64::max);
    if mus.is_empty() || mu_max <= 0.0 {
        return Err(Error::Disconnected);
    }
    let grid = search.grid.max(2);
    let f1s = logspace(1e-4 / (tau * mu_max), 4.0 / (tau * mu_max), grid);
    let f2s = logspace(1e-4 / mu_max, 2.0 / mu_max, grid);

    let mut best = ([0.0, 0.0], f64::INFINITY);
    for &f1 in &f1s {
        for &f2 in &f2s {
            let r = decoupled_radius(&mus, tau, [f1, f2]);
            if r < best.1 {
                best = ([f1, f2], r);
            }
        }
    }

    // Multiplicative coordinate descent from the best grid point.
    let mut step = (f1s[1] / f1s[0]).sqrt();
    for _ in 0..search.polish_sweeps {
        let mut improved = false;
        for axis in 0..2 {
            for factor in [step, 1.0 / step] {
                let mut cand = best.0;
                cand[axis] *= factor;
                let r = decoupled_radius(&mus, tau, cand);
                if r < best.1 {
                    best = (cand, r);
                    improved = true;
                }
            }
        }
        if !improved {
            step = step.sqrt();
            if step - 1.0 < 1e-10 {
                break;
            }
        }
    }

    let radius = sync_radius(topology, tau, best.0);
    if radius < 1.0 {
        Ok(SyncGain { f: best.0, radius })
    } else {
        Err(Error::NoStabilizingGainFound(radius))
    }
}

/// `u_syn,i = ½ F Σ_{j∈𝒩_i} (ξ̂_ij − ξ̂_ji)` from the stacked estimates in
/// canonical edge order.
pub fn sync_control(topology: &Topology, xi_hat: &[f64], f: [f64; 2]) -> Result<Vec<f64>> {
    if xi_hat.len() != 2 * topology.num_edges() {
        return Err(Error::DimensionMismatch(format!(
            "stacked edge estimate has {} entries, expected {}",
            xi_hat.len(),
            2 * topology.num_edges()
        )));
    }
    let mut out = vec![0.0; topology.n()];
    sync_control_into(topology, xi_hat, f, &mut out);
    Ok(out)
}

pub fn sync_control_into(topology: &Topology, xi_hat: &[f64], f: [f64; 2], out: &mut [f64]) {
    for (i, u) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for e in topology.node_edges(i) {
            let r = topology.reverse_edge(e);
            acc += f[0] * (xi_hat[2 * e] - xi_hat[2 * r]) + f[1] * (xi_hat[2 * e + 1] - xi_hat[2 * r + 1]);
        }
        *u = 0.5 * acc;
    }
}

/// `u_G = −(1_n⊗F_B) ẑ̃⁻`.
pub fn tracking_control(z_tilde_hat: [f64; 2], f_b: [f64; 2], n: usize) -> Vec<f64> {
    vec![-(f_b[0] * z_tilde_hat[0] + f_b[1] * z_tilde_hat[1]); n]
}

/// `u_G' = (1/g)(1_n 1_gᵀ ⊗ F_B) ξ̂_G⁻`.
pub fn alt_tracking_control(xi_g_hat: &[f64], f_b: [f64; 2], n: usize, g: usize) -> Vec<f64> {
    let sum: f64 = (0..g)
        .map(|j| f_b[0] * xi_g_hat[2 * j] + f_b[1] * xi_g_hat[2 * j + 1])
        .sum();
    vec![sum / g as f64; n]
}

/// The tracking correction computed at step `k` is applied when `(k+1)` is a
/// multiple of `s`.
pub fn is_broadcast_step(k: usize, s: usize) -> bool {
    (k + 1).is_multiple_of(s)
}

pub fn combined_control(k: usize, s: usize, u_syn: &[f64], u_g: &[f64]) -> Vec<f64> {
    if is_broadcast_step(k, s) {
        u_syn.iter().zip(u_g).map(|(a, b)| a + b).collect()
    } else {
        u_syn.to_vec()
    }
}

/// `A_B(γ) = (A − B F_B) A^γ`.
pub fn a_b(gamma: usize, f_b: [f64; 2], tau: f64) -> Matrix {
    let a_pow = Matrix::from_row_slice(2, 2, &[1.0, gamma as f64 * tau, 0.0, 1.0]);
    (transition(tau) - input(tau) * gain_row(f_b)) * a_pow
}

/// `4 / (f_b1 τ s + 2 f_b2)`; the broadcast loop needs this above 1.
pub fn tracking_margin(f_b: [f64; 2], tau: f64, s: usize) -> f64 {
    4.0 / (f_b[0] * tau * s as f64 + 2.0 * f_b[1])
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QtildeMode {
    /// Covariance of the noise accumulated over one broadcast period.
    #[default]
    Derived,
    /// `Q̃ = I`.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopMatrices {
    pub a_tilde: Matrix,
    pub a0_tilde: Matrix,
    /// `C̃ = [I₂ 0 0]`.
    pub c_tilde: Matrix,
    pub q_tilde: Matrix,
    pub broadcast_period: usize,
}

impl ClosedLoopMatrices {
    /// `Ã Ã₀^{s−1}`.
    pub fn period_map(&self) -> Matrix {
        &self.a_tilde * matrix_power(&self.a0_tilde, self.broadcast_period - 1)
    }
}

pub fn matrix_power(m: &Matrix, mut k: usize) -> Matrix {
    let mut result = identity(m.nrows());
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

fn check_filters(topology: &Topology, edge_filters: &[EdgeFilter]) -> Result<()> {
    if edge_filters.len() != topology.n()
        || edge_filters.iter().enumerate().any(|(i, f)| f.node() != i)
    {
        return Err(Error::DimensionMismatch("need one edge filter per node, in node order".into()));
    }
    Ok(())
}

/// `Ã₀` (with `F_B = 0`) and the `(1,1)`, `(1,2)` correction for a given `F_B`.
fn a0_tilde(topology: &Topology, edge_filters: &[EdgeFilter], sup: &SupervisorFilter, tau: f64) -> Result<Matrix> {
    check_filters(topology, edge_filters)?;
    let ne = 2 * topology.num_edges();
    let dim = 4 + ne;
    let mut m = Matrix::zeros(dim, dim);
    m.view_mut((0, 0), (2, 2)).copy_from(&transition(tau));
    m.view_mut((2, 2), (2, 2)).copy_from(&sup.error_matrix());
    // ã23 = A H_z̃* (q_AᵀV† ⊗ C)
    let a23 = transition(tau) * sup.gain() * sup.compensation();
    m.view_mut((2, 4), (2, ne)).copy_from(&a23);
    let a33 = block_diag(&edge_filters.iter().map(EdgeFilter::error_matrix).collect::<Vec<_>>());
    m.view_mut((4, 4), (ne, ne)).copy_from(&a33);
    Ok(m)
}

fn apply_tracking_gain(a0: &Matrix, f_b: [f64; 2], tau: f64) -> Matrix {
    let bf = input(tau) * gain_row(f_b);
    let mut a = a0.clone();
    let top_left = transition(tau) - &bf;
    a.view_mut((0, 0), (2, 2)).copy_from(&top_left);
    a.view_mut((0, 2), (2, 2)).copy_from(&bf);
    a
}

/// Covariance `Σ_ρ` of the per-step noise `ρ̃_n` driving `[z̃; e_z̃; e⁻]`:
///
/// ```text
/// row 1:  v̄ − v̄_G
/// row 2:  v̄ − v̄_G − A H_z̃* 1ᵀw_G
/// row 3:  (V⊗I₂) v − H* w
/// ```
///
/// with `v̄ = (qᵀ⊗I₂)v`, `v̄_G = (q_Gᵀ⊗I₂)v_G` and `H*` the stacked
/// predictor gains. `v`, `v_G`, `w`, `w_G` are mutually independent, so the
/// only cross terms come from `v` and `v_G` shared between the rows.
pub fn rho_noise_cov(
    topology: &Topology,
    noise: &NoiseModel,
    edge_filters: &[EdgeFilter],
    sup: &SupervisorFilter,
    tau: f64,
) -> Result<Matrix> {
    check_filters(topology, edge_filters)?;
    noise.check(topology)?;
    let ne = 2 * topology.num_edges();
    let i2 = identity(2);
    let avg = kron(&row_matrix(topology.q()), &i2);
    let lift = kron(topology.v(), &i2);
    let q_bar_g = SupervisorFilter::averaged_process_cov(topology, &noise.q, &noise.q_g);
    let ah = transition(tau) * sup.gain();
    let r_bar_g = SupervisorFilter::summed_noise_var(&noise.r_g);
    let h = block_diag(&edge_filters.iter().map(|f| f.gain().clone()).collect::<Vec<_>>());

    let c13 = &avg * &noise.q * lift.transpose();
    let c22 = &q_bar_g + &ah * ah.transpose() * r_bar_g;
    let c33 = &h * noise.r() * h.transpose() + &lift * &noise.q * lift.transpose();

    let mut s = Matrix::zeros(4 + ne, 4 + ne);
    s.view_mut((0, 0), (2, 2)).copy_from(&q_bar_g);
    s.view_mut((0, 2), (2, 2)).copy_from(&q_bar_g);
    s.view_mut((2, 0), (2, 2)).copy_from(&q_bar_g);
    s.view_mut((2, 2), (2, 2)).copy_from(&c22);
    s.view_mut((0, 4), (2, ne)).copy_from(&c13);
    s.view_mut((2, 4), (2, ne)).copy_from(&c13);
    s.view_mut((4, 0), (ne, 2)).copy_from(&c13.transpose());
    s.view_mut((4, 2), (ne, 2)).copy_from(&c13.transpose());
    s.view_mut((4, 4), (ne, ne)).copy_from(&c33);
    Ok(s)
}

/// `Σ_{j=0}^{s−2} Ã₀^j Σ_ρ Ã₀^jᵀ`.
fn accumulated_free_cov(a0: &Matrix, sigma_rho: &Matrix, s: usize) -> Result<Matrix> {
    let mut acc = Matrix::zeros(a0.nrows(), a0.ncols());
    let mut term = sigma_rho.clone();
    for _ in 0..s.saturating_sub(1) {
        acc += &term;
        term = a0 * &term * a0.transpose();
        if !term.iter().all(|x| x.is_finite()) {
            return Err(Error::UnstableCoefficient(f64::INFINITY));
        }
    }
    Ok(acc)
}

/// `Q̃ = Σ_{i=2}^{s} (ÃÃ₀^{i−2}) Σ_ρ (ÃÃ₀^{i−2})ᵀ + Σ_ρ`.
pub fn assemble_qtilde(a_tilde: &Matrix, a0_tilde: &Matrix, sigma_rho: &Matrix, s: usize) -> Result<Matrix> {
    if s == 0 {
        return Err(Error::Config("broadcast period must be >= 1".into()));
    }
    let acc = accumulated_free_cov(a0_tilde, sigma_rho, s)?;
    let q = sigma_rho + a_tilde * acc * a_tilde.transpose();
    Ok(crate::numerics::symmetrize(&q))
}

/// Precomputed pieces of the H2 problem that do not depend on `F_B`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingContext {
    pub tau: f64,
    pub s: usize,
    a0_tilde: Matrix,
    /// `Ã₀^{s−1}`.
    a0_pow: Matrix,
    /// `Σ_{j=0}^{s−2} Ã₀^j Σ_ρ Ã₀^jᵀ`.
    free_cov: Matrix,
    sigma_rho: Matrix,
    qtilde: QtildeMode,
}

impl TrackingContext {
    pub fn new(
        topology: &Topology,
        noise: &NoiseModel,
        edge_filters: &[EdgeFilter],
        sup: &SupervisorFilter,
        tau: f64,
        s: usize,
        qtilde: QtildeMode,
    ) -> Result<Self> {
        if s == 0 {
            return Err(Error::Config("broadcast period must be >= 1".into()));
        }
        let a0 = a0_tilde(topology, edge_filters, sup, tau)?;
        let sigma_rho = rho_noise_cov(topology, noise, edge_filters, sup, tau)?;
        let free_cov = accumulated_free_cov(&a0, &sigma_rho, s)?;
        Ok(Self {
            tau,
            s,
            a0_pow: matrix_power(&a0, s - 1),
            a0_tilde: a0,
            free_cov,
            sigma_rho,
            qtilde,
        })
    }

    pub fn dim(&self) -> usize {
        self.a0_tilde.nrows()
    }

    pub fn sigma_rho(&self) -> &Matrix {
        &self.sigma_rho
    }

    pub fn a_tilde(&self, f_b: [f64; 2]) -> Matrix {
        apply_tracking_gain(&self.a0_tilde, f_b, self.tau)
    }

    pub fn q_tilde(&self, f_b: [f64; 2]) -> Matrix {
        match self.qtilde {
            QtildeMode::Derived => {
                let a = self.a_tilde(f_b);
                crate::numerics::symmetrize(&(&self.sigma_rho + &a * &self.free_cov * a.transpose()))
            }
            QtildeMode::Identity => identity(self.dim()),
        }
    }

    pub fn closed_loop(&self, f_b: [f64; 2]) -> ClosedLoopMatrices {
        let mut c_tilde = Matrix::zeros(2, self.dim());
        c_tilde[(0, 0)] = 1.0;
        c_tilde[(1, 1)] = 1.0;
        ClosedLoopMatrices {
            a_tilde: self.a_tilde(f_b),
            a0_tilde: self.a0_tilde.clone(),
            c_tilde,
            q_tilde: self.q_tilde(f_b),
            broadcast_period: self.s,
        }
    }

    /// `Ã Ã₀^{s−1}`.
    pub fn period_map(&self, f_b: [f64; 2]) -> Matrix {
        self.a_tilde(f_b) * &self.a0_pow
    }

    /// Stationary covariance `P̃` of `ρ̃` at broadcast instants.
    pub fn stationary_cov(&self, f_b: [f64; 2]) -> Result<Matrix> {
        check_tracking_constraints(f_b, self.tau, self.s)?;
        let q = self.q_tilde(f_b);
        if q.iter().all(|&v| v == 0.0) {
            // Noise-free: P̃ = 0 solves the equation whatever the other blocks do.
            return Ok(q);
        }
        solve_dlyap(&self.period_map(f_b), &q).map_err(|e| match e {
            Error::UnstableCoefficient(r) => Error::Infeasible(format!("closed loop radius {r}")),
            other => other,
        })
    }
}

fn check_tracking_constraints(f_b: [f64; 2], tau: f64, s: usize) -> Result<()> {
    let denom = f_b[0] * tau * s as f64 + 2.0 * f_b[1];
    if !(denom > 0.0 && denom < 4.0) {
        return Err(Error::Infeasible(format!(
            "margin 4/(f_b1 τ s + 2 f_b2) = {} is not > 1",
            tracking_margin(f_b, tau, s)
        )));
    }
    let r = spectral_radius(&a_b(s - 1, f_b, tau));
    if !(r < 1.0) {
        return Err(Error::Infeasible(format!("A_B(s-1) radius {r} is not < 1")));
    }
    Ok(())
}

/// `√tr(C̃ P̃ C̃ᵀ)` with `P̃ = (ÃÃ₀^{s−1}) P̃ (ÃÃ₀^{s−1})ᵀ + Q̃`.
pub fn h2_objective(f_b1: f64, f_b2: f64, ctx: &TrackingContext) -> Result<f64> {
    let p = ctx.stationary_cov([f_b1, f_b2])?;
    Ok((p[(0, 0)] + p[(1, 1)]).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackingSearch {
    /// Points per axis of the feasibility grid over `(f_b1 τ s, f_b2)`.
    pub grid: usize,
    /// Nelder–Mead runs, started from the best grid points.
    pub starts: usize,
    /// Objective evaluations per Nelder–Mead run.
    pub max_evals: usize,
}

impl Default for TrackingSearch {
    fn default() -> Self {
        Self {
            grid: 16,
            starts: 4,
            max_evals: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingGain {
    pub f_b: [f64; 2],
    pub objective: f64,
    pub margin: f64,
    /// Spectral radius of `A_B(s−1)`.
    pub ab_radius: f64,
}

/// The probe grid of [`design_tracking_gain`] in `(f_b1, f_b2)`: cell
/// centres of `(0, 4) × (0, 2)` in `(f_b1 τ s, f_b2)` that satisfy the margin
/// constraint.
pub fn tracking_probe_grid(tau: f64, s: usize, grid: usize) -> Vec<[f64; 2]> {
    let scale = tau * s as f64;
    let mut pts = Vec::new();
    for i in 0..grid {
        for j in 0..grid {
            let a = 4.0 * (i as f64 + 0.5) / grid as f64;
            let b = 2.0 * (j as f64 + 0.5) / grid as f64;
            if a + 2.0 * b < 4.0 {
                pts.push([a / scale, b]);
            }
        }
    }
    pts
}

fn candidate_order(x: &([f64; 2], f64), y: &([f64; 2], f64)) -> std::cmp::Ordering {
    x.1.total_cmp(&y.1)
        .then(x.0[0].total_cmp(&y.0[0]))
        .then(x.0[1].total_cmp(&y.0[1]))
}

/// Minimizes [`h2_objective`] over the feasible set.
pub fn design_tracking_gain(ctx: &TrackingContext, search: TrackingSearch) -> Result<TrackingGain> {
    let scale = ctx.tau * ctx.s as f64;
    let eval = |p: [f64; 2]| h2_objective(p[0], p[1], ctx).unwrap_or(f64::INFINITY);

    let probes = tracking_probe_grid(ctx.tau, ctx.s, search.grid.max(1));
    let values = ordered_map(&probes, |&p| eval(p));
    let mut candidates: Vec<([f64; 2], f64)> = probes
        .into_iter()
        .zip(values)
        .filter(|(_, v)| v.is_finite())
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoFeasiblePoint);
    }
    candidates.sort_by(candidate_order);

    // Optimize in normalized coordinates (f_b1 τ s, f_b2), both O(1).
    let starts: Vec<[f64; 2]> = candidates
        .iter()
        .take(search.starts)
        .map(|(p, _)| [p[0] * scale, p[1]])
        .collect();
    let step = [2.0 / search.grid.max(1) as f64, 1.0 / search.grid.max(1) as f64];
    let runs = ordered_map(&starts, |&x0| {
        nelder_mead(|x| eval([x[0] / scale, x[1]]), x0, step, search.max_evals)
    });
    for (x, v) in runs {
        if v.is_finite() {
            candidates.push(([x[0] / scale, x[1]], v));
        }
    }
    let (f_b, objective) = candidates
        .into_iter()
        .min_by(candidate_order)
        .expect("at least one feasible candidate");
    Ok(TrackingGain {
        f_b,
        objective,
        margin: tracking_margin(f_b, ctx.tau, ctx.s),
        ab_radius: spectral_radius(&a_b(ctx.s - 1, f_b, ctx.tau)),
    })
}

/// Nelder–Mead in two dimensions; returns the best vertex and its value.
fn nelder_mead<F: Fn([f64; 2]) -> f64>(f: F, x0: [f64; 2], step: [f64; 2], max_evals: usize) -> ([f64; 2], f64) {
    let mut simplex = [
        (x0, f(x0)),
        ([x0[0] + step[0], x0[1]], 0.0),
        ([x0[0], x0[1] + step[1]], 0.0),
    ];
    simplex[1].1 = f(simplex[1].0);
    simplex[2].1 = f(simplex[2].0);
    let mut evals = 3;
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];

    while evals < max_evals {
        simplex.sort_by(candidate_order);
        let (best, worst) = (simplex[0].1, simplex[2].1);
        let size = (0..2)
            .map(|d| (simplex[1].0[d] - simplex[0].0[d]).abs().max((simplex[2].0[d] - simplex[0].0[d]).abs()))
            .fold(0.0, f64::max);
        if best.is_finite() && (worst - best).abs() <= 1e-12 * best.abs() && size < 1e-6 || size < 1e-12 {
            break;
        }
        let centroid = lerp(simplex[0].0, simplex[1].0, 0.5);
        let reflected = lerp(centroid, simplex[2].0, -1.0);
        let fr = f(reflected);
        evals += 1;
        if fr < simplex[0].1 {
            let expanded = lerp(centroid, simplex[2].0, -2.0);
            let fe = f(expanded);
            evals += 1;
            simplex[2] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[1].1 {
            simplex[2] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < simplex[2].1 {
                let c = lerp(centroid, reflected, 0.5);
                (c, f(c))
            } else {
                let c = lerp(centroid, simplex[2].0, 0.5);
                (c, f(c))
            };
            evals += 1;
            if fc < simplex[2].1.min(fr) {
                simplex[2] = (contracted, fc);
            } else {
                for k in 1..3 {
                    let x = lerp(simplex[0].0, simplex[k].0, 0.5);
                    simplex[k] = (x, f(x));
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(candidate_order);
    simplex[0]
}
