//! Everything needed to simulate one setup: graph, noise, schedule, mode.

use serde::{Deserialize, Serialize};

use crate::clock::{ClockParams, GnssClockParams};
use crate::error::{Error, Result};
use crate::estimation::NoiseModel;
use crate::network::Topology;
use crate::numerics::{psd_factor, Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// No control.
    Free,
    /// Distributed synchronization only.
    Sync,
    /// Synchronization plus the supervisor's broadcast tracking control.
    SyncTrack,
    /// Synchronization plus tracking built from GNSS edge-state estimates.
    SyncTrackAlt,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Free, Mode::Sync, Mode::SyncTrack, Mode::SyncTrackAlt];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Free => "free",
            Mode::Sync => "sync",
            Mode::SyncTrack => "sync_track",
            Mode::SyncTrackAlt => "sync_track_alt",
        }
    }

    pub fn synchronizes(self) -> bool {
        self != Mode::Free
    }

    pub fn tracks(self) -> bool {
        matches!(self, Mode::SyncTrack | Mode::SyncTrackAlt)
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))
    }
}

/// Whether edge filters add the known control contribution `(V_i⊗B)u` to
/// their prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeFilterInput {
    #[default]
    Include,
    Ignore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: Topology,
    pub clocks: Vec<ClockParams>,
    pub gnss: Vec<GnssClockParams>,
    /// Edge measurement covariance per node, rows in neighbour order.
    pub r_i: Vec<Matrix>,
    pub r_g: Matrix,
    pub tau: f64,
    pub horizon: usize,
    pub broadcast_period: usize,
    pub mode: Mode,
    pub seed: u64,
    /// Initial MAC phase deviations (s).
    pub initial_phase: Vec<f64>,
    /// Initial MAC frequency deviations.
    pub initial_freq: Vec<f64>,
    /// Standard deviation of the Gaussian jitter added to each `Θ_j`.
    pub gac_initial_std: f64,
    pub edge_filter_input: EdgeFilterInput,
}

impl Scenario {
    pub fn noise_model(&self) -> Result<NoiseModel> {
        NoiseModel::new(&self.clocks, &self.gnss, self.r_i.clone(), self.r_g.clone(), self.tau)
    }

    pub fn n(&self) -> usize {
        self.topology.n()
    }

    pub fn g(&self) -> usize {
        self.topology.g()
    }

    /// Builds the per-node `R_i` from one variance per directed edge, given
    /// in canonical edge order.
    pub fn diagonal_edge_noise(topology: &Topology, edge_vars: &[f64]) -> Result<Vec<Matrix>> {
        if edge_vars.len() != topology.num_edges() {
            return Err(Error::DimensionMismatch(format!(
                "{} edge variances for {} directed edges",
                edge_vars.len(),
                topology.num_edges()
            )));
        }
        Ok((0..topology.n())
            .map(|i| {
                let r = topology.node_edges(i);
                Matrix::from_diagonal(&Vector::from_row_slice(&edge_vars[r]))
            })
            .collect())
    }

    /// Default initial phases `i · 1e-10 s` for `i = 1..n`.
    pub fn default_initial_phase(n: usize) -> Vec<f64> {
        (1..=n).map(|i| i as f64 * 1e-10).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, g) = (self.n(), self.g());
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidTau(self.tau));
        }
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if self.broadcast_period < 1 {
            return Err(Error::Config("broadcast_period must be >= 1".into()));
        }
        if self.clocks.len() != n || self.gnss.len() != g {
            return Err(Error::DimensionMismatch(format!(
                "{} clock entries for n = {n}, {} GNSS entries for g = {g}",
                self.clocks.len(),
                self.gnss.len()
            )));
        }
        if self.initial_phase.len() != n || self.initial_freq.len() != n {
            return Err(Error::DimensionMismatch("initial state length".into()));
        }
        for c in &self.clocks {
            c.validate()?;
        }
        for c in &self.gnss {
            c.params.validate()?;
        }
        if !(self.gac_initial_std >= 0.0 && self.gac_initial_std.is_finite()) {
            return Err(Error::Config("gac_initial_std must be finite and >= 0".into()));
        }
        let noise = self.noise_model()?;
        noise.check(&self.topology)?;
        for (i, r) in self.r_i.iter().enumerate() {
            check_psd(r, &format!("R_{}", i + 1))?;
        }
        check_psd(&self.r_g, "R_G")?;
        Ok(())
    }
}

/// Measurement covariances may be singular (a noise-free reading is a
/// legitimate degenerate case); the filter design rejects what it cannot use.
fn check_psd(m: &Matrix, what: &str) -> Result<()> {
    if (m - m.transpose()).abs().max() > 1e-12 * m.abs().max() {
        return Err(Error::Config(format!("{what} is not symmetric")));
    }
    if m.iter().any(|v| !v.is_finite()) || psd_factor(m).is_err() {
        return Err(Error::Config(format!("{what} is not positive semidefinite")));
    }
    Ok(())
}
