//! Closed-loop simulation of the ensemble, the GNSS receiver clocks, the
//! filters and the controllers.
//!
//! Per step `k`:
//! 1. take this step's standard normals from the noise tape;
//! 2. form the edge measurements `y[k]` and GNSS measurements `Y[k]`;
//! 3. compute `u[k]` from the current predictions `ξ̂⁻[k]`, `ẑ̃⁻[k]`, `ξ̂_G⁻[k]`;
//! 4. step every filter with `y[k]`, `Y[k]` and `u[k]`;
//! 5. advance all clocks to `k + 1`.
//!
//! The noise tape always holds the same draws for a seed, whatever the mode,
//! so runs in different modes are paired sample by sample.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::clock::process_noise_cov;
use crate::control::{alt_tracking_control, is_broadcast_step, ordered_map, sync_control_into, tracking_control};
use crate::design::GainSet;
use crate::error::{Error, Result};
use crate::estimation::{summed_measurement, EdgeFilter, GnssEdgeFilter, SupervisorFilter};
use crate::numerics::{psd_factor, Matrix, Vector};
use crate::scenario::{EdgeFilterInput, Mode, Scenario};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// Feed true edge states, tracking error and GNSS edge states to the
    /// controllers instead of filter estimates.
    pub perfect_estimation: bool,
    pub record_measurements: bool,
}

/// Number of standard normals per step: `[MAC 2n][GAC 2g][w |E|][w_G g]`,
/// plus `g` drawn once up front for the GAC initial jitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseLayout {
    pub n: usize,
    pub g: usize,
    pub edges: usize,
}

impl NoiseLayout {
    pub fn of(scenario: &Scenario) -> Self {
        Self {
            n: scenario.n(),
            g: scenario.g(),
            edges: scenario.topology.num_edges(),
        }
    }

    pub fn per_step(&self) -> usize {
        2 * self.n + 2 * self.g + self.edges + self.g
    }

    fn gac_offset(&self) -> usize {
        2 * self.n
    }

    fn edge_offset(&self) -> usize {
        2 * self.n + 2 * self.g
    }

    fn gnss_meas_offset(&self) -> usize {
        2 * self.n + 2 * self.g + self.edges
    }
}

/// Pre-generated standard normals for one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTape {
    layout: NoiseLayout,
    initial: Vec<f64>,
    data: Vec<f64>,
}

struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn fill(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.rng.sample(StandardNormal);
        }
    }
}

impl NoiseTape {
    pub fn generate(seed: u64, layout: NoiseLayout, steps: usize) -> Self {
        let mut stream = NormalStream::new(seed);
        let mut initial = vec![0.0; layout.g];
        stream.fill(&mut initial);
        let mut data = vec![0.0; steps * layout.per_step()];
        stream.fill(&mut data);
        Self { layout, initial, data }
    }

    pub fn layout(&self) -> NoiseLayout {
        self.layout
    }

    pub fn steps(&self) -> usize {
        self.data.len() / self.layout.per_step().max(1)
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn step(&self, k: usize) -> &[f64] {
        let w = self.layout.per_step();
        &self.data[k * w..(k + 1) * w]
    }
}

enum Source<'a> {
    Tape(&'a NoiseTape),
    Stream { stream: NormalStream, buf: Vec<f64> },
}

impl Source<'_> {
    fn initial(&mut self, g: usize) -> Vec<f64> {
        match self {
            Source::Tape(t) => t.initial.clone(),
            Source::Stream { stream, .. } => {
                let mut v = vec![0.0; g];
                stream.fill(&mut v);
                v
            }
        }
    }

    fn step(&mut self, k: usize) -> &[f64] {
        match self {
            Source::Tape(t) => t.step(k),
            Source::Stream { stream, buf } => {
                stream.fill(buf);
                buf
            }
        }
    }
}

/// Recorded trajectories. States have `horizon + 1` rows, controls `horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub mode: Mode,
    pub n: usize,
    pub g: usize,
    pub tau: f64,
    pub horizon: usize,
    /// `x` rows of length `2n`: `[x1_1, x2_1, x1_2, ...]`.
    pub x: Vec<f64>,
    /// GNSS receiver clock states, rows of length `2g`.
    pub x_g: Vec<f64>,
    /// Applied controls, rows of length `n`.
    pub u: Vec<f64>,
    /// Supervisor prediction `ẑ̃⁻[k]`, rows of length 2 (tracking mode only).
    pub z_hat: Option<Vec<f64>>,
    /// Edge measurements, rows of length `|E|`.
    pub y: Option<Vec<f64>>,
    /// GNSS edge measurements, rows of length `g`.
    pub y_g: Option<Vec<f64>>,
}

impl SimTrace {
    pub fn mac_state(&self, k: usize, i: usize) -> [f64; 2] {
        let o = k * 2 * self.n + 2 * i;
        [self.x[o], self.x[o + 1]]
    }

    pub fn gac_state(&self, k: usize, j: usize) -> [f64; 2] {
        let o = k * 2 * self.g + 2 * j;
        [self.x_g[o], self.x_g[o + 1]]
    }

    pub fn control(&self, k: usize, i: usize) -> f64 {
        self.u[k * self.n + i]
    }

    /// `z̄ = (qᵀ⊗I₂) x`.
    pub fn ensemble_mean(&self, k: usize) -> [f64; 2] {
        let mut m = [0.0; 2];
        for i in 0..self.n {
            let s = self.mac_state(k, i);
            m[0] += s[0];
            m[1] += s[1];
        }
        [m[0] / self.n as f64, m[1] / self.n as f64]
    }

    /// `Z̄ = (q_Gᵀ⊗I₂) X`.
    pub fn gac_mean(&self, k: usize) -> [f64; 2] {
        let mut m = [0.0; 2];
        for j in 0..self.g {
            let s = self.gac_state(k, j);
            m[0] += s[0];
            m[1] += s[1];
        }
        [m[0] / self.g as f64, m[1] / self.g as f64]
    }

    /// `z̃ = z̄ − Z̄`.
    pub fn tracking_error(&self, k: usize) -> [f64; 2] {
        let (a, b) = (self.ensemble_mean(k), self.gac_mean(k));
        [a[0] - b[0], a[1] - b[1]]
    }

    /// `z = (Π⊗I₂) x`, stacked like `x`.
    pub fn consensus_error(&self, k: usize) -> Vec<f64> {
        let m = self.ensemble_mean(k);
        (0..self.n)
            .flat_map(|i| {
                let s = self.mac_state(k, i);
                [s[0] - m[0], s[1] - m[1]]
            })
            .collect()
    }

    pub fn mac_phase(&self, i: usize) -> Vec<f64> {
        (0..=self.horizon).map(|k| self.mac_state(k, i)[0]).collect()
    }

    pub fn gac_phase(&self, j: usize) -> Vec<f64> {
        (0..=self.horizon).map(|k| self.gac_state(k, j)[0]).collect()
    }

    pub fn gac_mean_phase(&self) -> Vec<f64> {
        (0..=self.horizon).map(|k| self.gac_mean(k)[0]).collect()
    }

    /// Writes `k,entity,x1_s,x2,u` rows: every MAC, every GAC and, in
    /// tracking mode, the supervisor prediction (`sup`). `u` is blank where
    /// there is no control.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for k in 0..=self.horizon {
            for i in 0..self.n {
                let s = self.mac_state(k, i);
                let u = (k < self.horizon).then(|| self.control(k, i));
                write_trace_row(&mut w, k, &format!("mac{}", i + 1), s[0], s[1], u)?;
            }
            for j in 0..self.g {
                let s = self.gac_state(k, j);
                write_trace_row(&mut w, k, &format!("gac{}", j + 1), s[0], s[1], None)?;
            }
            if let Some(z) = &self.z_hat {
                write_trace_row(&mut w, k, "sup", z[2 * k], z[2 * k + 1], None)?;
            }
        }
        Ok(())
    }
}

pub const TRACE_HEADER: &str = "k,entity,x1_s,x2,u";

/// One trace CSV row; 17 significant digits so values parse back exactly.
pub fn write_trace_row<W: Write>(w: &mut W, k: usize, entity: &str, x1: f64, x2: f64, u: Option<f64>) -> io::Result<()> {
    write!(w, "{k},{entity},{x1:.16e},{x2:.16e},")?;
    if let Some(u) = u {
        write!(w, "{u:.16e}")?;
    }
    writeln!(w)
}

/// Filters and gains in simulation form.
#[derive(Debug, Clone)]
pub struct Controllers {
    pub f: [f64; 2],
    pub f_b: [f64; 2],
    pub edge: Vec<EdgeFilter>,
    pub supervisor: SupervisorFilter,
    pub gnss: Option<GnssEdgeFilter>,
}

impl Controllers {
    pub fn from_gains(scenario: &Scenario, gains: &GainSet, mode: Mode) -> Result<Self> {
        gains.check_compatible(scenario, mode)?;
        Ok(Self {
            f: gains.f,
            f_b: gains.f_b,
            edge: gains.edge_filters(scenario)?,
            supervisor: gains.supervisor_filter(scenario)?,
            gnss: gains.gnss_edge_filter(scenario)?,
        })
    }
}

/// Noise shaping factors, `L Lᵀ = covariance`.
struct Shaping {
    mac: Vec<Matrix>,
    gac: Vec<Matrix>,
    edge: Vec<Matrix>,
    gnss: Matrix,
}

impl Shaping {
    fn new(scenario: &Scenario) -> Result<Self> {
        let tau = scenario.tau;
        Ok(Self {
            mac: scenario
                .clocks
                .iter()
                .map(|c| psd_factor(&process_noise_cov(c, tau)?))
                .collect::<Result<_>>()?,
            gac: scenario
                .gnss
                .iter()
                .map(|c| psd_factor(&process_noise_cov(&c.params, tau)?))
                .collect::<Result<_>>()?,
            edge: scenario.r_i.iter().map(psd_factor).collect::<Result<_>>()?,
            gnss: psd_factor(&scenario.r_g)?,
        })
    }
}

fn shaped(l: &Matrix, xi: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o = (0..xi.len()).map(|c| l[(r, c)] * xi[c]).sum();
    }
}

/// Runs `scenario.mode` with noise drawn from `scenario.seed`.
pub fn run_simulation(scenario: &Scenario, gains: Option<&GainSet>, opts: SimOptions) -> Result<SimTrace> {
    let layout = NoiseLayout::of(scenario);
    let source = Source::Stream {
        stream: NormalStream::new(scenario.seed),
        buf: vec![0.0; layout.per_step()],
    };
    simulate(scenario, gains, opts, source)
}

/// Runs `scenario.mode` with noise from a pre-generated tape (the seed in
/// the scenario is ignored).
pub fn run_with_tape(scenario: &Scenario, gains: Option<&GainSet>, opts: SimOptions, tape: &NoiseTape) -> Result<SimTrace> {
    if tape.layout() != NoiseLayout::of(scenario) || tape.steps() < scenario.horizon {
        return Err(Error::DimensionMismatch("noise tape does not fit the scenario".into()));
    }
    simulate(scenario, gains, opts, Source::Tape(tape))
}

fn simulate(scenario: &Scenario, gains: Option<&GainSet>, opts: SimOptions, mut source: Source<'_>) -> Result<SimTrace> {
    scenario.validate()?;
    let mode = scenario.mode;
    let mut ctl = match (mode, gains) {
        (Mode::Free, None) => None,
        (_, Some(g)) => Some(Controllers::from_gains(scenario, g, mode)?),
        (m, None) => return Err(Error::GainModeMismatch(format!("mode {m} needs a gain set"))),
    };

    let t = &scenario.topology;
    let (n, g, ne) = (t.n(), t.g(), t.num_edges());
    let tau = scenario.tau;
    let s = scenario.broadcast_period;
    let horizon = scenario.horizon;
    let layout = NoiseLayout::of(scenario);
    let shaping = Shaping::new(scenario)?;
    let edges = t.edges().to_vec();
    let attach = t.attachments().to_vec();
    let include_input = scenario.edge_filter_input == EdgeFilterInput::Include;

    let mut x: Vec<f64> = (0..n)
        .flat_map(|i| [scenario.initial_phase[i], scenario.initial_freq[i]])
        .collect();
    let jitter = source.initial(g);
    let mut x_g: Vec<f64> = (0..g)
        .flat_map(|j| [scenario.gnss[j].theta0 + scenario.gac_initial_std * jitter[j], 0.0])
        .collect();

    let mut trace = SimTrace {
        mode,
        n,
        g,
        tau,
        horizon,
        x: Vec::with_capacity((horizon + 1) * 2 * n),
        x_g: Vec::with_capacity((horizon + 1) * 2 * g),
        u: Vec::with_capacity(horizon * n),
        z_hat: (mode == Mode::SyncTrack).then(|| Vec::with_capacity((horizon + 1) * 2)),
        y: opts.record_measurements.then(|| Vec::with_capacity(horizon * ne)),
        y_g: opts.record_measurements.then(|| Vec::with_capacity(horizon * g)),
    };

    let mut y = vec![0.0; ne];
    let mut y_g = vec![0.0; g];
    let mut u = vec![0.0; n];
    let mut xi_hat = Vector::zeros(2 * ne);
    let mut xi_true = vec![0.0; 2 * ne];
    let mut known = Vec::new();
    if let Some(c) = &ctl {
        known = c.edge.iter().map(|f| Vector::zeros(2 * f.num_edges())).collect();
    }
    let mut known_g = Vector::zeros(2 * g);
    let mut v = [0.0; 2];

    for k in 0..=horizon {
        trace.x.extend_from_slice(&x);
        trace.x_g.extend_from_slice(&x_g);
        if let (Some(z), Some(c)) = (trace.z_hat.as_mut(), ctl.as_ref()) {
            z.extend_from_slice(c.supervisor.estimate().as_slice());
        }
        if k == horizon {
            break;
        }
        let draws = source.step(k);

        // Measurements.
        let mut off = layout.edge_offset();
        for i in 0..n {
            let r = t.node_edges(i);
            let d = r.len();
            let mut w = vec![0.0; d];
            shaped(&shaping.edge[i], &draws[off..off + d], &mut w);
            for (m, e) in r.enumerate() {
                let (a, b) = edges[e];
                y[e] = x[2 * b] - x[2 * a] + w[m];
            }
            off += d;
        }
        let gm = layout.gnss_meas_offset();
        shaped(&shaping.gnss, &draws[gm..gm + g], &mut y_g);
        for j in 0..g {
            y_g[j] += x_g[2 * j] - x[2 * attach[j]];
        }

        // Controls.
        u.iter_mut().for_each(|v| *v = 0.0);
        if let Some(c) = ctl.as_mut() {
            if opts.perfect_estimation || mode.synchronizes() {
                for (e, &(a, b)) in edges.iter().enumerate() {
                    xi_true[2 * e] = x[2 * b] - x[2 * a];
                    xi_true[2 * e + 1] = x[2 * b + 1] - x[2 * a + 1];
                }
            }
            let mut o = 0;
            for f in &c.edge {
                let est = f.estimate();
                xi_hat.rows_mut(o, est.len()).copy_from(est);
                o += est.len();
            }
            if mode.synchronizes() {
                let src = if opts.perfect_estimation { &xi_true[..] } else { xi_hat.as_slice() };
                sync_control_into(t, src, c.f, &mut u);
            }
            if mode.tracks() && is_broadcast_step(k, s) {
                let u_g = if mode == Mode::SyncTrack {
                    let z = if opts.perfect_estimation {
                        let (mx, mg) = (mean_state(&x, n), mean_state(&x_g, g));
                        [mx[0] - mg[0], mx[1] - mg[1]]
                    } else {
                        let e = c.supervisor.estimate();
                        [e[0], e[1]]
                    };
                    tracking_control(z, c.f_b, n)
                } else {
                    let xi_g: Vec<f64> = if opts.perfect_estimation {
                        (0..g)
                            .flat_map(|j| {
                                let i = attach[j];
                                [x_g[2 * j] - x[2 * i], x_g[2 * j + 1] - x[2 * i + 1]]
                            })
                            .collect()
                    } else {
                        c.gnss.as_ref().expect("checked").estimate().as_slice().to_vec()
                    };
                    alt_tracking_control(&xi_g, c.f_b, n, g)
                };
                for (a, b) in u.iter_mut().zip(&u_g) {
                    *a += b;
                }
            }

            // Filters: the supervisor consumes ξ̂⁻[k] before the edge filters move on.
            if mode == Mode::SyncTrack {
                c.supervisor.step(summed_measurement(&y_g), &xi_hat, &u)?;
            }
            if mode.synchronizes() {
                for (i, f) in c.edge.iter_mut().enumerate() {
                    if include_input {
                        f.known_input_into(&u, &mut known[i]);
                    }
                    let r = t.node_edges(i);
                    f.step(&y[r], &known[i])?;
                }
            }
            if mode == Mode::SyncTrackAlt {
                let gf = c.gnss.as_mut().expect("checked");
                gf.known_input_into(&u, &mut known_g);
                gf.step(&y_g, &known_g)?;
            }
        }
        trace.u.extend_from_slice(&u);
        if let Some(m) = trace.y.as_mut() {
            m.extend_from_slice(&y);
        }
        if let Some(m) = trace.y_g.as_mut() {
            m.extend_from_slice(&y_g);
        }

        // States.
        for i in 0..n {
            shaped(&shaping.mac[i], &draws[2 * i..2 * i + 2], &mut v);
            let (p, f) = (x[2 * i], x[2 * i + 1]);
            x[2 * i] = p + tau * f + tau * u[i] + v[0];
            x[2 * i + 1] = f + u[i] + v[1];
        }
        let go = layout.gac_offset();
        for j in 0..g {
            shaped(&shaping.gac[j], &draws[go + 2 * j..go + 2 * j + 2], &mut v);
            let (p, f) = (x_g[2 * j], x_g[2 * j + 1]);
            x_g[2 * j] = p + tau * f + v[0];
            x_g[2 * j + 1] = f + v[1];
        }
    }
    Ok(trace)
}

fn mean_state(x: &[f64], count: usize) -> [f64; 2] {
    let mut m = [0.0; 2];
    for i in 0..count {
        m[0] += x[2 * i];
        m[1] += x[2 * i + 1];
    }
    [m[0] / count as f64, m[1] / count as f64]
}

/// Runs `reps` replications with seeds `scenario.seed + r` and maps each
/// trace through `f`. Results are in replication order.
pub fn monte_carlo_map<T, F>(
    scenario: &Scenario,
    gains: Option<&GainSet>,
    reps: usize,
    opts: SimOptions,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &SimTrace) -> T + Sync + Send,
{
    let idx: Vec<usize> = (0..reps).collect();
    ordered_map(&idx, |&r| {
        let mut sc = scenario.clone();
        sc.seed = scenario.seed.wrapping_add(r as u64);
        run_simulation(&sc, gains, opts).map(|t| f(r, &t))
    })
    .into_iter()
    .collect()
}

/// Per-step statistics of the tracking error across replications.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub reps: usize,
    pub z_tilde_mean: Vec<[f64; 2]>,
    /// Unbiased sample variance (zero when `reps == 1`).
    pub z_tilde_var: Vec<[f64; 2]>,
}

pub fn monte_carlo(scenario: &Scenario, gains: Option<&GainSet>, reps: usize, opts: SimOptions) -> Result<MonteCarloSummary> {
    if reps == 0 {
        return Err(Error::Config("reps must be >= 1".into()));
    }
    let series = monte_carlo_map(scenario, gains, reps, opts, |_, t| {
        (0..=t.horizon).map(|k| t.tracking_error(k)).collect::<Vec<_>>()
    })?;
    // Deviations from the first replication: identical replications give
    // exactly zero variance, and the shift keeps the sums well conditioned.
    let len = scenario.horizon + 1;
    let base = &series[0];
    let mut shift = vec![[0.0; 2]; len];
    for s in &series[1..] {
        for ((m, z), b) in shift.iter_mut().zip(s).zip(base) {
            m[0] += z[0] - b[0];
            m[1] += z[1] - b[1];
        }
    }
    for m in &mut shift {
        m[0] /= reps as f64;
        m[1] /= reps as f64;
    }
    let mut var = vec![[0.0; 2]; len];
    if reps > 1 {
        for s in &series {
            for (((v, z), b), m) in var.iter_mut().zip(s).zip(base).zip(&shift) {
                v[0] += (z[0] - b[0] - m[0]).powi(2);
                v[1] += (z[1] - b[1] - m[1]).powi(2);
            }
        }
        for v in &mut var {
            v[0] /= (reps - 1) as f64;
            v[1] /= (reps - 1) as f64;
        }
    }
    let mean = base.iter().zip(&shift).map(|(b, m)| [b[0] + m[0], b[1] + m[1]]).collect();
    Ok(MonteCarloSummary {
        reps,
        z_tilde_mean: mean,
        z_tilde_var: var,
    })
}
