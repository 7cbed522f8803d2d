//! Mode comparison: seed-averaged statistical AVAR per mode next to the
//! analytical free-running, ensemble-mean and receiver-clock curves.

use chronoens::avar::{analytical_curve, ensemble_mean_curve, window_for, avar_statistical, AvarCurve, AvarKind};
use chronoens::design::GainSet;
use chronoens::scenario::{Mode, Scenario};
use chronoens::sim::{monte_carlo_map, SimOptions, SimTrace};
use serde::Serialize;

use crate::error::CliResult;
use crate::Reference;

pub const COMPARED: [Mode; 3] = [Mode::Sync, Mode::SyncTrack, Mode::SyncTrackAlt];

#[derive(Debug, Serialize)]
pub struct ScenarioSummary {
    pub n: usize,
    pub g: usize,
    pub tau: f64,
    pub horizon: usize,
    pub broadcast_period: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct Verdict {
    pub tau_s: f64,
    /// "ordered", "violated" or "degenerate".
    pub status: String,
    pub sync_track_le_sync: bool,
    pub sync_track_le_sync_track_alt: bool,
    pub sync: f64,
    pub sync_track: f64,
    pub sync_track_alt: f64,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub scenario: ScenarioSummary,
    pub reps: usize,
    pub reference: String,
    pub taus_s: Vec<f64>,
    pub curves: Vec<AvarCurve>,
    pub verdict: Verdict,
}

/// `{1, 10, s, 2s, 4s, 8s}` sample intervals, keeping those with at least
/// `horizon/3` second differences.
pub fn default_taus(sc: &Scenario) -> Vec<f64> {
    let s = sc.broadcast_period;
    let mut w: Vec<usize> = vec![1, 10, s, 2 * s, 4 * s, 8 * s];
    w.retain(|&w| 3 * w <= sc.horizon);
    w.sort_unstable();
    w.dedup();
    w.into_iter().map(|w| w as f64 * sc.tau).collect()
}

/// Mean over MACs of the statistical AVAR of each MAC's phase relative to
/// `reference`.
pub fn mac_curve(t: &SimTrace, windows: &[usize], reference: Reference) -> chronoens::Result<Vec<f64>> {
    let offset = match reference {
        Reference::Truth => vec![0.0; t.horizon + 1],
        Reference::GacMean => t.gac_mean_phase(),
    };
    let mut acc = vec![0.0; windows.len()];
    for i in 0..t.n {
        let d: Vec<f64> = t.mac_phase(i).iter().zip(&offset).map(|(a, b)| a - b).collect();
        for (a, &w) in acc.iter_mut().zip(windows) {
            *a += avar_statistical(&d, t.tau, w)? / t.n as f64;
        }
    }
    Ok(acc)
}

pub fn compare(sc: &Scenario, gains: &GainSet, reps: usize, taus: &[f64], reference: Reference) -> CliResult<Report> {
    let windows = taus.iter().map(|&t| window_for(t, sc.tau)).collect::<chronoens::Result<Vec<_>>>()?;
    let mut curves = Vec::new();
    let mut last = Vec::new();
    for mode in COMPARED {
        let mut s = sc.clone();
        s.mode = mode;
        let per_rep = monte_carlo_map(&s, Some(gains), reps, SimOptions::default(), |_, t| mac_curve(t, &windows, reference))?
            .into_iter()
            .collect::<chronoens::Result<Vec<_>>>()?;
        let mean: Vec<f64> = (0..taus.len())
            .map(|p| per_rep.iter().map(|c| c[p]).sum::<f64>() / reps as f64)
            .collect();
        last.push(*mean.last().expect("at least one tau"));
        curves.push(AvarCurve {
            entity: mode.name().to_string(),
            kind: AvarKind::Statistical,
            points: taus.iter().copied().zip(mean).collect(),
        });
    }
    for (i, c) in sc.clocks.iter().enumerate() {
        curves.push(analytical_curve(&format!("clock{}", i + 1), c, taus)?);
    }
    let q = vec![1.0 / sc.n() as f64; sc.n()];
    curves.push(ensemble_mean_curve("ensemble", &sc.clocks, &q, taus)?);
    for (j, c) in sc.gnss.iter().enumerate() {
        curves.push(analytical_curve(&format!("gac{}", j + 1), &c.params, taus)?);
    }

    let degenerate = curves
        .iter()
        .filter(|c| c.kind == AvarKind::Statistical)
        .all(|c| c.points.iter().all(|p| p.1 == 0.0));
    let (sync, track, alt) = (last[0], last[1], last[2]);
    let le_sync = track <= sync;
    let le_alt = track <= alt;
    let status = if degenerate {
        "degenerate"
    } else if le_sync && le_alt {
        "ordered"
    } else {
        "violated"
    };
    Ok(Report {
        scenario: ScenarioSummary {
            n: sc.n(),
            g: sc.g(),
            tau: sc.tau,
            horizon: sc.horizon,
            broadcast_period: sc.broadcast_period,
            seed: sc.seed,
        },
        reps,
        reference: reference.name().to_string(),
        taus_s: taus.to_vec(),
        curves,
        verdict: Verdict {
            tau_s: *taus.last().expect("at least one tau"),
            status: status.to_string(),
            sync_track_le_sync: le_sync,
            sync_track_le_sync_track_alt: le_alt,
            sync,
            sync_track: track,
            sync_track_alt: alt,
        },
    })
}
