//! End-to-end gain synthesis and the serialized gain set.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::control::{
    design_sync_gain, design_tracking_gain, sync_radius, QtildeMode, SyncGain, SyncSearch, TrackingContext,
    TrackingGain, TrackingSearch,
};
use crate::error::{Error, Result};
use crate::estimation::{EdgeFilter, GnssEdgeFilter, NoiseModel, SupervisorFilter};
use crate::numerics::{DareOptions, Matrix};
use crate::scenario::{EdgeFilterInput, Mode, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignOptions {
    pub dare_tol: f64,
    pub dare_max_iter: usize,
    pub sync: SyncSearch,
    pub tracking: TrackingSearch,
    pub qtilde: QtildeMode,
}

impl Default for DesignOptions {
    fn default() -> Self {
        let dare = DareOptions::default();
        Self {
            dare_tol: dare.tol,
            dare_max_iter: dare.max_iter,
            sync: SyncSearch::default(),
            tracking: TrackingSearch::default(),
            qtilde: QtildeMode::Derived,
        }
    }
}

impl DesignOptions {
    pub fn dare(&self) -> DareOptions {
        DareOptions {
            tol: self.dare_tol,
            max_iter: self.dare_max_iter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Validation,
    EdgeFilters,
    SyncGain,
    SupervisorFilter,
    GnssEdgeFilter,
    ClosedLoop,
    TrackingGain,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Validation => "validation",
            Stage::EdgeFilters => "edge filter design",
            Stage::SyncGain => "synchronization gain design",
            Stage::SupervisorFilter => "supervisor filter design",
            Stage::GnssEdgeFilter => "GNSS edge filter design",
            Stage::ClosedLoop => "closed-loop assembly",
            Stage::TrackingGain => "tracking gain design",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignFailure {
    pub stage: Stage,
    pub error: Error,
}

impl fmt::Display for DesignFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for DesignFailure {}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, DesignFailure>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, DesignFailure> {
        self.map_err(|error| DesignFailure { stage, error })
    }
}

/// Matrices are stored row-major as nested arrays.
pub type RowMajor = Vec<Vec<f64>>;

pub fn to_rows(m: &Matrix) -> RowMajor {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

pub fn from_rows(rows: &RowMajor) -> Result<Matrix> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(Matrix::from_row_iterator(nr, nc, rows.iter().flatten().copied()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainMeta {
    pub tau: f64,
    pub s: usize,
    pub n: usize,
    pub g: usize,
    pub qtilde: QtildeMode,
    pub edge_filter_input: EdgeFilterInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSet {
    #[serde(rename = "F")]
    pub f: [f64; 2],
    #[serde(rename = "F_B")]
    pub f_b: [f64; 2],
    pub margin: f64,
    pub objective: f64,
    pub ab_radius: f64,
    pub sync_radius: f64,
    /// Edge filter predictor gains keyed by 1-based node number.
    #[serde(rename = "H_i_star")]
    pub h_i_star: BTreeMap<String, RowMajor>,
    #[serde(rename = "P_i")]
    pub p_i: BTreeMap<String, RowMajor>,
    #[serde(rename = "H_ztilde_star")]
    pub h_ztilde_star: [f64; 2],
    #[serde(rename = "P_ztilde")]
    pub p_ztilde: RowMajor,
    #[serde(rename = "H_G_star", default, skip_serializing_if = "Option::is_none")]
    pub h_g_star: Option<RowMajor>,
    pub meta: GainMeta,
}

impl GainSet {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("gain set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("gain file: {e}")))
    }

    /// Checks that these gains fit the scenario and can drive `mode`.
    pub fn check_compatible(&self, scenario: &Scenario, mode: Mode) -> Result<()> {
        let m = &self.meta;
        if m.n != scenario.n() || m.g != scenario.g() {
            return Err(Error::GainModeMismatch(format!(
                "gains are for n = {}, g = {}; scenario has n = {}, g = {}",
                m.n,
                m.g,
                scenario.n(),
                scenario.g()
            )));
        }
        if m.tau != scenario.tau {
            return Err(Error::GainModeMismatch(format!(
                "gains are for tau = {}, scenario has {}",
                m.tau, scenario.tau
            )));
        }
        if mode.tracks() && m.s != scenario.broadcast_period {
            return Err(Error::GainModeMismatch(format!(
                "F_B was designed for s = {}, scenario broadcasts every {}",
                m.s, scenario.broadcast_period
            )));
        }
        if mode == Mode::SyncTrackAlt && self.h_g_star.is_none() {
            return Err(Error::GainModeMismatch("sync_track_alt needs H_G_star".into()));
        }
        Ok(())
    }

    pub fn edge_filters(&self, scenario: &Scenario) -> Result<Vec<EdgeFilter>> {
        (0..scenario.n())
            .map(|i| {
                let h = self
                    .h_i_star
                    .get(&(i + 1).to_string())
                    .ok_or_else(|| Error::GainModeMismatch(format!("missing H_i_star for node {}", i + 1)))?;
                EdgeFilter::with_gain(&scenario.topology, i, scenario.tau, from_rows(h)?)
            })
            .collect()
    }

    pub fn supervisor_filter(&self, scenario: &Scenario) -> Result<SupervisorFilter> {
        let h = Matrix::from_column_slice(2, 1, &self.h_ztilde_star);
        SupervisorFilter::with_gain(&scenario.topology, scenario.tau, h)
    }

    pub fn gnss_edge_filter(&self, scenario: &Scenario) -> Result<Option<GnssEdgeFilter>> {
        self.h_g_star
            .as_ref()
            .map(|h| GnssEdgeFilter::with_gain(&scenario.topology, scenario.tau, from_rows(h)?))
            .transpose()
    }
}

/// Everything produced by [`design`].
#[derive(Debug, Clone)]
pub struct Design {
    pub gains: GainSet,
    pub sync: SyncGain,
    pub tracking: TrackingGain,
    pub noise: NoiseModel,
    pub edge_filters: Vec<EdgeFilter>,
    pub supervisor: SupervisorFilter,
    pub gnss_filter: GnssEdgeFilter,
    pub context: TrackingContext,
}

impl Design {
    /// Stationary covariance of `[z̃; e_z̃; e⁻]` right after each broadcast.
    pub fn broadcast_cov(&self) -> Result<Matrix> {
        self.context.stationary_cov(self.tracking.f_b)
    }
}

/// Synthesizes every gain the simulator needs: edge filters, `F`,
/// supervisor filter, GNSS edge filter and `F_B`.
pub fn design(scenario: &Scenario, opts: &DesignOptions) -> std::result::Result<Design, DesignFailure> {
    scenario.validate().at(Stage::Validation)?;
    let t = &scenario.topology;
    let tau = scenario.tau;
    let dare = opts.dare();
    let noise = scenario.noise_model().at(Stage::Validation)?;

    let edge_filters = (0..t.n())
        .map(|i| EdgeFilter::design(t, i, &noise.q, &noise.r_i[i], tau, dare))
        .collect::<Result<Vec<_>>>()
        .at(Stage::EdgeFilters)?;
    let sync = design_sync_gain(t, tau, opts.sync).at(Stage::SyncGain)?;
    let supervisor = SupervisorFilter::design(t, &noise.q, &noise.q_g, &noise.r_g, tau, dare).at(Stage::SupervisorFilter)?;
    let gnss_filter = GnssEdgeFilter::design(t, &noise.q, &noise.q_g, &noise.r_g, tau, dare).at(Stage::GnssEdgeFilter)?;
    let context = TrackingContext::new(
        t,
        &noise,
        &edge_filters,
        &supervisor,
        tau,
        scenario.broadcast_period,
        opts.qtilde,
    )
    .at(Stage::ClosedLoop)?;
    let tracking = design_tracking_gain(&context, opts.tracking).at(Stage::TrackingGain)?;

    let keyed = |f: &dyn Fn(&EdgeFilter) -> Matrix| -> BTreeMap<String, RowMajor> {
        edge_filters
            .iter()
            .map(|e| ((e.node() + 1).to_string(), to_rows(&f(e))))
            .collect()
    };
    let gains = GainSet {
        f: sync.f,
        f_b: tracking.f_b,
        margin: tracking.margin,
        objective: tracking.objective,
        ab_radius: tracking.ab_radius,
        sync_radius: sync_radius(t, tau, sync.f),
        h_i_star: keyed(&|e| e.gain().clone()),
        p_i: keyed(&|e| e.steady_cov().expect("designed").clone()),
        h_ztilde_star: [supervisor.gain()[(0, 0)], supervisor.gain()[(1, 0)]],
        p_ztilde: to_rows(supervisor.steady_cov().expect("designed")),
        h_g_star: Some(to_rows(gnss_filter.gain())),
        meta: GainMeta {
            tau,
            s: scenario.broadcast_period,
            n: t.n(),
            g: t.g(),
            qtilde: opts.qtilde,
            edge_filter_input: scenario.edge_filter_input,
        },
    };
    Ok(Design {
        gains,
        sync,
        tracking,
        noise,
        edge_filters,
        supervisor,
        gnss_filter,
        context,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn gain_set_round_trips_through_json() {
        let d = design(&presets::desk_scale(), &DesignOptions::default()).unwrap();
        let text = d.gains.to_json();
        let back = GainSet::from_json(&text).unwrap();
        assert_eq!(back, d.gains);
        assert_eq!(back.to_json(), text);
        let s = presets::desk_scale();
        let filters = back.edge_filters(&s).unwrap();
        for (a, b) in filters.iter().zip(&d.edge_filters) {
            assert_eq!(a.gain(), b.gain());
        }
    }

    #[test]
    fn design_is_deterministic() {
        let s = presets::desk_scale();
        let a = design(&s, &DesignOptions::default()).unwrap();
        let b = design(&s, &DesignOptions::default()).unwrap();
        assert_eq!(a.gains.to_json(), b.gains.to_json());
    }

    #[test]
    fn failures_name_the_stage() {
        let mut s = presets::desk_scale();
        s.tau = -1.0;
        let err = design(&s, &DesignOptions::default()).unwrap_err();
        assert_eq!(err.stage, Stage::Validation);
        assert!(err.to_string().starts_with("validation failed"));

        let mut opts = DesignOptions::default();
        opts.dare_max_iter = 1;
        let err = design(&presets::desk_scale(), &opts).unwrap_err();
        assert_eq!(err.stage, Stage::EdgeFilters);
    }

    #[test]
    fn compatibility_checks() {
        let d = design(&presets::desk_scale(), &DesignOptions::default()).unwrap();
        let mut s = presets::desk_scale();
        d.gains.check_compatible(&s, Mode::SyncTrackAlt).unwrap();
        s.broadcast_period = 1000;
        assert!(matches!(d.gains.check_compatible(&s, Mode::SyncTrack), Err(Error::GainModeMismatch(_))));
        d.gains.check_compatible(&s, Mode::Sync).unwrap();
        let mut g = d.gains.clone();
        g.h_g_star = None;
        assert!(g.check_compatible(&presets::desk_scale(), Mode::SyncTrackAlt).is_err());
    }
}
