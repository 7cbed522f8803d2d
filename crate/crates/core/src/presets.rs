//! Built-in scenarios: the three-clock example network with its published
//! noise tables, and a reduced broadcast period for quick runs.
//!
//! The published tables do not give the GNSS receiver clocks' own noise;
//! [`GAC_CLOCK`] is our choice, an order of magnitude quieter than the
//! ensemble clocks in white frequency noise.

use crate::clock::{ClockParams, GnssClockParams};
use crate::network::Topology;
use crate::numerics::{Matrix, Vector};
use crate::scenario::{EdgeFilterInput, Mode, Scenario};

pub const TABLE_I: [ClockParams; 3] = [
    ClockParams::new(2.89e-20, 2.27e-26),
    ClockParams::new(7.84996e-21, 2.83e-27),
    ClockParams::new(1.49e-20, 2.7889e-28),
];

/// Edge measurement variances in canonical edge order `1←2, 2←1, 2←3, 3←2`.
pub const TABLE_II: [f64; 4] = [0.1895e-28, 0.0058e-28, 0.2228e-28, 0.0136e-28];

/// GNSS edge measurement variances, GAC 1 → MAC 1 and GAC 2 → MAC 3.
pub const TABLE_III: [f64; 2] = [0.1721e-16, 0.0078e-16];

pub const GAC_CLOCK: ClockParams = ClockParams::new(1e-21, 1e-28);

/// Default mean initial offset of GAC `j` (1-based): `j · 1 ns`.
pub fn default_theta0(j: usize) -> f64 {
    j as f64 * 1e-9
}

fn example_network(g: usize) -> Topology {
    let attachments: &[(usize, usize)] = if g == 1 { &[(0, 0)] } else { &[(0, 0), (1, 2)] };
    Topology::build(3, g, &[(0, 1), (1, 2)], attachments).expect("example network is valid")
}

fn example(g: usize, horizon: usize, s: usize, mode: Mode) -> Scenario {
    let topology = example_network(g);
    let r_i = Scenario::diagonal_edge_noise(&topology, &TABLE_II).expect("four directed edges");
    let r_g = Matrix::from_diagonal(&Vector::from_row_slice(&TABLE_III[..g]));
    Scenario {
        clocks: TABLE_I.to_vec(),
        gnss: (1..=g)
            .map(|j| GnssClockParams {
                params: GAC_CLOCK,
                theta0: default_theta0(j),
            })
            .collect(),
        r_i,
        r_g,
        tau: 1.0,
        horizon,
        broadcast_period: s,
        mode,
        seed: 1,
        initial_phase: Scenario::default_initial_phase(3),
        initial_freq: vec![0.0; 3],
        gac_initial_std: 0.0,
        edge_filter_input: EdgeFilterInput::Include,
        topology,
    }
}

/// Three free-running clocks (one nominal receiver), 10⁵ steps.
pub fn paper_fig3() -> Scenario {
    example(1, 100_000, 1000, Mode::Free)
}

/// The full example: two receivers on clocks 1 and 3, broadcast every 1000 s.
pub fn paper_fig4() -> Scenario {
    example(2, 100_000, 1000, Mode::SyncTrack)
}

/// As [`paper_fig4`] with `s = 100` and a 10⁴-step horizon.
pub fn desk_scale() -> Scenario {
    example(2, 10_000, 100, Mode::SyncTrack)
}
