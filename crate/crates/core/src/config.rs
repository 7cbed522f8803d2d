//! JSON scenario files. Node and receiver indices are 1-based.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clock::{ClockParams, GnssClockParams};
use crate::design::{from_rows, to_rows, DesignOptions};
use crate::error::{Error, Result};
use crate::network::Topology;
use crate::numerics::{Matrix, Vector};
use crate::scenario::{EdgeFilterInput, Mode, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnssEntry {
    /// Ensemble clock the receiver is co-located with.
    pub mac: usize,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub theta0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeNoiseEntry {
    /// Measuring node.
    pub node: usize,
    /// Node being measured.
    pub neighbor: usize,
    pub var: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avar: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub tau: f64,
    pub horizon: usize,
    pub broadcast_period: usize,
    pub mode: Mode,
    pub seed: u64,
    pub clocks: Vec<ClockParams>,
    /// Undirected links between ensemble clocks.
    pub edges: Vec<[usize; 2]>,
    pub gnss: Vec<GnssEntry>,
    /// One variance per directed edge; used unless `edge_noise_matrices`
    /// overrides a node.
    pub edge_noise: Vec<EdgeNoiseEntry>,
    /// Full `R_i` per node (keys "1".."n"), rows in neighbour order.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub edge_noise_matrices: BTreeMap<String, Vec<Vec<f64>>>,
    /// Diagonal of `R_G`, one entry per receiver.
    pub gnss_noise: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gnss_noise_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_phase: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_freq: Option<Vec<f64>>,
    #[serde(default)]
    pub gac_initial_std: f64,
    #[serde(default)]
    pub edge_filter_input: EdgeFilterInput,
    #[serde(default)]
    pub design: DesignOptions,
    #[serde(default)]
    pub output: OutputPaths,
}

fn zero_based(idx: usize, len: usize, what: &str) -> Result<usize> {
    if idx == 0 || idx > len {
        return Err(Error::BadIndex(format!("{what} {idx} out of range 1..={len}")));
    }
    Ok(idx - 1)
}

impl ScenarioFile {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario file serializes")
    }

    /// Reads a file; the outer error is I/O, the inner one is content.
    pub fn load(path: &Path) -> std::io::Result<Result<Self>> {
        Ok(Self::from_json(&std::fs::read_to_string(path)?))
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        let n = self.clocks.len();
        let g = self.gnss.len();
        if n < 2 {
            return Err(Error::BadIndex(format!("need at least 2 ensemble clocks, got {n}")));
        }
        if g >= n {
            return Err(Error::TooManyReceivers { g, n });
        }
        let edges = self
            .edges
            .iter()
            .map(|&[a, b]| Ok((zero_based(a, n, "edge node")?, zero_based(b, n, "edge node")?)))
            .collect::<Result<Vec<_>>>()?;
        let attachments = self
            .gnss
            .iter()
            .enumerate()
            .map(|(j, e)| Ok((j, zero_based(e.mac, n, "gnss mac")?)))
            .collect::<Result<Vec<_>>>()?;
        let topology = Topology::build(n, g, &edges, &attachments)?;

        let mut vars = vec![None; topology.num_edges()];
        for e in &self.edge_noise {
            let pair = (zero_based(e.node, n, "edge_noise node")?, zero_based(e.neighbor, n, "edge_noise neighbor")?);
            let idx = topology
                .edges()
                .iter()
                .position(|&d| d == pair)
                .ok_or_else(|| Error::BadIndex(format!("no link {} -> {}", e.node, e.neighbor)))?;
            if !(e.var >= 0.0 && e.var.is_finite()) {
                return Err(Error::Config(format!("edge noise {} -> {} must be finite and >= 0", e.node, e.neighbor)));
            }
            if vars[idx].replace(e.var).is_some() {
                return Err(Error::Config(format!("edge noise {} -> {} given twice", e.node, e.neighbor)));
            }
        }
        let mut r_i: Vec<Option<Matrix>> = vec![None; n];
        for (key, rows) in &self.edge_noise_matrices {
            let node: usize = key
                .parse()
                .map_err(|_| Error::Config(format!("edge_noise_matrices key {key:?} is not a node index")))?;
            let i = zero_based(node, n, "edge_noise_matrices node")?;
            let m = from_rows(rows)?;
            let d = topology.neighbors(i).len();
            if m.shape() != (d, d) {
                return Err(Error::DimensionMismatch(format!("R_{node} must be {d}x{d}")));
            }
            r_i[i] = Some(m);
        }
        let r_i = (0..n)
            .map(|i| match r_i[i].take() {
                Some(m) => Ok(m),
                None => {
                    let diag = topology
                        .node_edges(i)
                        .map(|e| {
                            vars[e].ok_or_else(|| {
                                let (a, b) = topology.edges()[e];
                                Error::Config(format!("missing edge noise for {} -> {}", a + 1, b + 1))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Matrix::from_diagonal(&Vector::from_vec(diag)))
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let r_g = match &self.gnss_noise_matrix {
            Some(rows) => from_rows(rows)?,
            None => {
                if self.gnss_noise.len() != g {
                    return Err(Error::DimensionMismatch(format!(
                        "{} gnss_noise entries for {g} receivers",
                        self.gnss_noise.len()
                    )));
                }
                if self.gnss_noise.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(Error::Config("gnss_noise entries must be finite and >= 0".into()));
                }
                Matrix::from_diagonal(&Vector::from_row_slice(&self.gnss_noise))
            }
        };
        if r_g.shape() != (g, g) {
            return Err(Error::DimensionMismatch(format!("R_G must be {g}x{g}")));
        }

        let scenario = Scenario {
            clocks: self.clocks.clone(),
            gnss: self
                .gnss
                .iter()
                .map(|e| GnssClockParams {
                    params: ClockParams::new(e.sigma1_sq, e.sigma2_sq),
                    theta0: e.theta0,
                })
                .collect(),
            r_i,
            r_g,
            tau: self.tau,
            horizon: self.horizon,
            broadcast_period: self.broadcast_period,
            mode: self.mode,
            seed: self.seed,
            initial_phase: self
                .initial_phase
                .clone()
                .unwrap_or_else(|| Scenario::default_initial_phase(n)),
            initial_freq: self.initial_freq.clone().unwrap_or_else(|| vec![0.0; n]),
            gac_initial_std: self.gac_initial_std,
            edge_filter_input: self.edge_filter_input,
            topology,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Inverse of [`ScenarioFile::to_scenario`]. Diagonal covariances are
    /// written as per-edge variances, anything else as full matrices.
    pub fn from_scenario(s: &Scenario, design: DesignOptions) -> Self {
        let t = &s.topology;
        let is_diag = |m: &Matrix| (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0));
        let mut edge_noise = Vec::new();
        let mut edge_noise_matrices = BTreeMap::new();
        for i in 0..s.n() {
            if is_diag(&s.r_i[i]) {
                for (k, e) in t.node_edges(i).enumerate() {
                    let (a, b) = t.edges()[e];
                    edge_noise.push(EdgeNoiseEntry {
                        node: a + 1,
                        neighbor: b + 1,
                        var: s.r_i[i][(k, k)],
                    });
                }
            } else {
                edge_noise_matrices.insert((i + 1).to_string(), to_rows(&s.r_i[i]));
            }
        }
        let gnss_noise = s.r_g.diagonal().iter().copied().collect();
        let default_phase = Scenario::default_initial_phase(s.n());
        ScenarioFile {
            tau: s.tau,
            horizon: s.horizon,
            broadcast_period: s.broadcast_period,
            mode: s.mode,
            seed: s.seed,
            clocks: s.clocks.clone(),
            edges: t
                .edges()
                .iter()
                .filter(|(a, b)| a < b)
                .map(|&(a, b)| [a + 1, b + 1])
                .collect(),
            gnss: s
                .gnss
                .iter()
                .zip(t.attachments())
                .map(|(c, &mac)| GnssEntry {
                    mac: mac + 1,
                    sigma1_sq: c.params.sigma1_sq,
                    sigma2_sq: c.params.sigma2_sq,
                    theta0: c.theta0,
                })
                .collect(),
            edge_noise,
            edge_noise_matrices,
            gnss_noise,
            gnss_noise_matrix: (!is_diag(&s.r_g)).then(|| to_rows(&s.r_g)),
            initial_phase: (s.initial_phase != default_phase).then(|| s.initial_phase.clone()),
            initial_freq: s.initial_freq.iter().any(|&f| f != 0.0).then(|| s.initial_freq.clone()),
            gac_initial_std: s.gac_initial_std,
            edge_filter_input: s.edge_filter_input,
            design,
            output: OutputPaths::default(),
        }
    }
}
