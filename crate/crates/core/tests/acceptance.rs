//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::time::Instant;

use chronoens::avar::{avar_analytical, avar_statistical};
use chronoens::clock::{process_noise_cov, transition, ClockParams};
use chronoens::design::{design, Design, DesignOptions, GainSet};
use chronoens::network::Topology;
use chronoens::numerics::{kron, psd_factor, solve_dare, solve_dlyap, DareOptions, Matrix, Vector};
use chronoens::presets::{self, GAC_CLOCK, TABLE_I};
use chronoens::scenario::{Mode, Scenario};
use chronoens::sim::{monte_carlo_map, run_simulation, run_with_tape, NoiseLayout, NoiseTape, SimOptions};
use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// |mean| within three standard errors of zero.
fn in_band(v: &[f64]) -> (bool, f64, f64) {
    let m = mean(v);
    let band = 3.0 * std_dev(v) / (v.len() as f64).sqrt();
    (m.abs() <= band, m, band)
}

/// Slope t-statistic of `y` regressed on `0..len`.
fn slope_t(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = mean(y);
    let sxx: f64 = (0..y.len()).map(|i| (i as f64 - xm).powi(2)).sum();
    let sxy: f64 = y.iter().enumerate().map(|(i, v)| (i as f64 - xm) * (v - ym)).sum();
    let b = sxy / sxx;
    let a = ym - b * xm;
    let sse: f64 = y.iter().enumerate().map(|(i, v)| (v - a - b * i as f64).powi(2)).sum();
    let se = (sse / (n - 2.0) / sxx).sqrt();
    if se == 0.0 {
        if b == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        b / se
    }
}

fn eig_radius(m: &Matrix) -> f64 {
    m.complex_eigenvalues().iter().map(|c: &Complex<f64>| c.norm()).fold(0.0, f64::max)
}

fn desk_design() -> Design {
    design(&presets::desk_scale(), &DesignOptions::default()).expect("desk-scale design")
}

const REPS_MC: usize = 200;
const SEEDS: usize = 50;

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let sc = presets::paper_fig3();
    let taus = [1usize, 4, 16, 64, 256];
    // per seed: [clock][tau] then the ensemble-mean value at τ = 1
    let runs = monte_carlo_map(&sc, None, SEEDS, SimOptions::default(), |_, t| {
        let per: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                let d = t.mac_phase(i);
                taus.iter().map(|&w| avar_statistical(&d, 1.0, w).unwrap()).collect()
            })
            .collect();
        let m: Vec<f64> = (0..=t.horizon).map(|k| t.ensemble_mean(k)[0]).collect();
        (per, avar_statistical(&m, 1.0, 1).unwrap())
    })
    .unwrap();
    let mut worst = 0.0f64;
    for i in 0..3 {
        for (p, &w) in taus.iter().enumerate() {
            let stat = mean(&runs.iter().map(|r| r.0[i][p]).collect::<Vec<_>>());
            let ana = TABLE_I[i].sigma1_sq / w as f64 + w as f64 * TABLE_I[i].sigma2_sq / 3.0;
            worst = worst.max((stat / ana - 1.0).abs());
        }
    }
    let ens = mean(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
    let min_single = TABLE_I.iter().map(|c| c.sigma1_sq + c.sigma2_sq / 3.0).fold(f64::INFINITY, f64::min);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 0.30 && ens < min_single && secs < 120.0,
        format!(
            "max relative deviation {worst:.3} (limit 0.30); ensemble-mean AVAR(1) {ens:.3e} < min clock {min_single:.3e}; {secs:.1} s"
        ),
    )
}

fn zero_noise(mut sc: Scenario) -> Scenario {
    sc.clocks.iter_mut().for_each(|c| *c = ClockParams::new(0.0, 0.0));
    sc.gnss.iter_mut().for_each(|c| c.params = ClockParams::new(0.0, 0.0));
    sc.r_i.iter_mut().for_each(|r| r.fill(0.0));
    sc.r_g.fill(0.0);
    sc
}

fn phase_spread(x: &[f64], n: usize) -> f64 {
    let p: Vec<f64> = (0..n).map(|i| x[2 * i]).collect();
    p.iter().cloned().fold(f64::MIN, f64::max) - p.iter().cloned().fold(f64::MAX, f64::min)
}

fn criterion_2(d: &Design) -> Outcome {
    let mut quiet = zero_noise(presets::desk_scale());
    quiet.mode = Mode::Sync;
    quiet.horizon = 5000;
    let t = run_simulation(&quiet, Some(&d.gains), SimOptions::default()).unwrap();
    let n = t.n;
    let s0 = phase_spread(&t.x[..2 * n], n);
    let s1 = phase_spread(&t.x[2 * n * 5000..2 * n * 5001], n);
    let contraction = s0 / s1;

    let mut sc = presets::desk_scale();
    sc.mode = Mode::Sync;
    let finals = monte_carlo_map(&sc, Some(&d.gains), REPS_MC, SimOptions::default(), |_, t| {
        t.consensus_error(t.horizon)
    })
    .unwrap();
    let mut all_in = true;
    let mut parts = Vec::new();
    for i in 0..n {
        let v: Vec<f64> = finals.iter().map(|z| z[2 * i]).collect();
        let (ok, m, band) = in_band(&v);
        all_in &= ok;
        parts.push(format!("{m:.2e}/{band:.2e}"));
    }
    outcome(
        contraction >= 1e3 && all_in,
        format!(
            "noise-free contraction {contraction:.3e} (need >= 1e3); consensus phase mean/band at k=1e4: {}",
            parts.join(", ")
        ),
    )
}

fn criterion_3(d: &Design) -> Outcome {
    let sc = presets::desk_scale();
    let s = sc.broadcast_period;
    let last = sc.horizon / s;
    let z = monte_carlo_map(&sc, Some(&d.gains), REPS_MC, SimOptions::default(), |_, t| {
        (51..=last).map(|l| t.tracking_error(l * s)[0]).collect::<Vec<f64>>()
    })
    .unwrap();
    let per_rep: Vec<f64> = z.iter().map(|r| mean(r)).collect();
    let (ok_mean, m, band) = in_band(&per_rep);
    let count = z[0].len();
    let vars: Vec<f64> = (count - 20..count)
        .map(|p| {
            let col: Vec<f64> = z.iter().map(|r| r[p]).collect();
            std_dev(&col).powi(2)
        })
        .collect();
    let t = slope_t(&vars);
    outcome(
        ok_mean && t.abs() < 2.6,
        format!("mean z̃ phase {m:.3e} within band {band:.3e}: {ok_mean}; variance slope t = {t:.2} (limit 2.6)"),
    )
}

const AVAR_TAUS: [usize; 7] = [1, 10, 100, 200, 400, 800, 1600];

/// Mean over MACs of the statistical AVAR of each MAC's phase.
fn mac_avar_curve(t: &chronoens::sim::SimTrace) -> Vec<f64> {
    let per: Vec<Vec<f64>> = (0..t.n)
        .map(|i| {
            let d = t.mac_phase(i);
            AVAR_TAUS.iter().map(|&w| avar_statistical(&d, t.tau, w).unwrap()).collect()
        })
        .collect();
    (0..AVAR_TAUS.len()).map(|p| mean(&per.iter().map(|c| c[p]).collect::<Vec<_>>())).collect()
}

fn seed_mean_curve(sc: &Scenario, gains: &GainSet) -> Vec<f64> {
    let curves = monte_carlo_map(sc, Some(gains), SEEDS, SimOptions::default(), |_, t| mac_avar_curve(t)).unwrap();
    (0..AVAR_TAUS.len()).map(|p| mean(&curves.iter().map(|c| c[p]).collect::<Vec<_>>())).collect()
}

fn criterion_4(d: &Design) -> Outcome {
    let mut sc = presets::desk_scale();
    sc.mode = Mode::Sync;
    let sync = seed_mean_curve(&sc, &d.gains);
    sc.mode = Mode::SyncTrack;
    let track = seed_mean_curve(&sc, &d.gains);
    let at = AVAR_TAUS.iter().position(|&t| t == 8 * sc.broadcast_period).unwrap();
    let last = AVAR_TAUS.len() - 1;
    let gac = |p: usize| avar_analytical(&GAC_CLOCK, AVAR_TAUS[p] as f64).unwrap();
    let ratio_last = track[last] / gac(last);
    let ratio_at = track[at] / gac(at);
    outcome(
        track[at] < sync[at] && ratio_last <= 3.0 && ratio_last >= 1.0 / 3.0,
        format!(
            "τ=800: sync_track {:.3e} < sync {:.3e}; sync_track/GAC at τ={} is {ratio_last:.2} (limit 3), at τ=800 {ratio_at:.2}",
            track[at], sync[at], AVAR_TAUS[last]
        ),
    )
}

fn criterion_5(d: &Design) -> Outcome {
    let base = presets::desk_scale();
    let layout = NoiseLayout::of(&base);
    let last = AVAR_TAUS.len() - 1;
    let tail = base.horizon - base.horizon / 5;
    let rms = |t: &chronoens::sim::SimTrace| {
        let gm = t.gac_mean_phase();
        let mut acc = 0.0;
        let mut count = 0.0;
        for i in 0..t.n {
            let p = t.mac_phase(i);
            for k in tail..=t.horizon {
                acc += (p[k] - gm[k]).powi(2);
                count += 1.0;
            }
        }
        (acc / count).sqrt()
    };
    let seeds: Vec<u64> = (0..SEEDS as u64).map(|r| base.seed + r).collect();
    let results: Vec<(f64, f64, f64, f64)> = seeds
        .iter()
        .map(|&seed| {
            let tape = NoiseTape::generate(seed, layout, base.horizon);
            let mut sc = base.clone();
            sc.mode = Mode::SyncTrack;
            let a = run_with_tape(&sc, Some(&d.gains), SimOptions::default(), &tape).unwrap();
            sc.mode = Mode::SyncTrackAlt;
            let b = run_with_tape(&sc, Some(&d.gains), SimOptions::default(), &tape).unwrap();
            (mac_avar_curve(&a)[last], mac_avar_curve(&b)[last], rms(&a), rms(&b))
        })
        .collect();
    let wins = results.iter().filter(|r| r.0 <= r.1).count();
    let rms_track = mean(&results.iter().map(|r| r.2).collect::<Vec<_>>());
    let rms_alt = mean(&results.iter().map(|r| r.3).collect::<Vec<_>>());
    outcome(
        wins * 5 >= SEEDS * 4 && rms_track < rms_alt,
        format!(
            "sync_track <= sync_track_alt at τ={} in {wins}/{SEEDS} seeds (need 80%); RMS MAC-GAC phase {rms_track:.3e} vs {rms_alt:.3e}",
            AVAR_TAUS[last]
        ),
    )
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| normal(rng))
}

fn random_connected(rng: &mut ChaCha8Rng, n: usize) -> Topology {
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.random_range(0..i), i));
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < 0.25 {
                edges.push((a, b));
            }
        }
    }
    Topology::build(n, 1, &edges, &[(0, 0)]).unwrap()
}

/// Accumulated closed-loop noise over one period, drawn from the individual
/// clock, receiver and measurement noises rather than from `Σ_ρ`.
fn qtilde_monte_carlo(sc: &Scenario, d: &Design, draws: usize) -> Matrix {
    let t = &sc.topology;
    let (n, g, ne) = (t.n(), t.g(), t.num_edges());
    let dim = 4 + 2 * ne;
    let tau = sc.tau;
    let cl = d.context.closed_loop(d.tracking.f_b);
    let mac_l: Vec<Matrix> = sc.clocks.iter().map(|c| psd_factor(&process_noise_cov(c, tau).unwrap()).unwrap()).collect();
    let gac_l: Vec<Matrix> = sc.gnss.iter().map(|c| psd_factor(&process_noise_cov(&c.params, tau).unwrap()).unwrap()).collect();
    let r = d.noise.r();
    let r_l = psd_factor(&r).unwrap();
    let rg_l = psd_factor(&sc.r_g).unwrap();
    let h = {
        let mut h = Matrix::zeros(2 * ne, ne);
        let (mut row, mut col) = (0, 0);
        for f in &d.edge_filters {
            let gk = f.gain();
            h.view_mut((row, col), gk.shape()).copy_from(gk);
            row += gk.nrows();
            col += gk.ncols();
        }
        h
    };
    let ah = transition(tau) * d.supervisor.gain();
    let lift = kron(t.v(), &Matrix::identity(2, 2));

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let step_noise = |rng: &mut ChaCha8Rng| {
        let mut v = Vector::zeros(2 * n);
        for i in 0..n {
            let e = &mac_l[i] * Vector::from_fn(2, |_, _| normal(rng));
            v.rows_mut(2 * i, 2).copy_from(&e);
        }
        let mut avg_g = Vector::zeros(2);
        for j in 0..g {
            avg_g += &gac_l[j] * Vector::from_fn(2, |_, _| normal(rng)) / g as f64;
        }
        let w = &r_l * Vector::from_fn(ne, |_, _| normal(rng));
        let w_g_sum: f64 = (&rg_l * Vector::from_fn(g, |_, _| normal(rng))).sum();
        let mut avg = Vector::zeros(2);
        for i in 0..n {
            avg += v.rows(2 * i, 2) / n as f64;
        }
        let nz = avg - avg_g;
        let mut out = Vector::zeros(dim);
        out.rows_mut(0, 2).copy_from(&nz);
        out.rows_mut(2, 2).copy_from(&(&nz - &ah * w_g_sum));
        out.rows_mut(4, 2 * ne).copy_from(&(&lift * &v - &h * &w));
        out
    };
    let s = sc.broadcast_period;
    let mut acc = Matrix::zeros(dim, dim);
    for _ in 0..draws {
        let mut rho = Vector::zeros(dim);
        for _ in 0..s - 1 {
            rho = &cl.a0_tilde * rho + step_noise(&mut rng);
        }
        rho = &cl.a_tilde * rho + step_noise(&mut rng);
        acc += &rho * rho.transpose();
    }
    acc / draws as f64
}

fn criterion_6() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let one = Matrix::from_element(1, 1, 1.0);
    let p = solve_dare(&Matrix::from_element(1, 1, 0.5), &one, &one, &one, DareOptions::default()).unwrap().p[(0, 0)];
    let root = (0.25 + (0.25f64 * 0.25 + 4.0).sqrt()) / 2.0;
    let dare_ok = (p - root).abs() < 1e-6 && (p - 1.13278).abs() < 1e-5;
    ok &= dare_ok;
    notes.push(format!("DARE {p:.6} vs {root:.6}"));

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut lyap_err = 0.0f64;
    for _ in 0..20 {
        let dim = rng.random_range(2..=8);
        let m = random_matrix(&mut rng, dim, dim);
        let m = &m * (0.9 / eig_radius(&m));
        let l = random_matrix(&mut rng, dim, dim);
        let q = &l * l.transpose();
        let p = solve_dlyap(&m, &q).unwrap();
        let mut series = Matrix::zeros(dim, dim);
        let mut term = q.clone();
        for _ in 0..2000 {
            series += &term;
            term = &m * term * m.transpose();
        }
        lyap_err = lyap_err.max((&p - &series).abs().max() / series.abs().max());
    }
    ok &= lyap_err <= 1e-6;
    notes.push(format!("dlyap vs series {lyap_err:.1e}"));

    let mut pinv_err = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(2..=10);
        let t = random_connected(&mut rng, n);
        let pi = Matrix::identity(n, n) - Matrix::from_element(n, n, 1.0 / n as f64);
        pinv_err = pinv_err.max((t.v_pinv() * t.v() - pi).abs().max());
    }
    ok &= pinv_err <= 1e-9;
    notes.push(format!("V†V-Π {pinv_err:.1e}"));

    let mut sc = presets::desk_scale();
    sc.broadcast_period = 3;
    let d = design(&sc, &DesignOptions::default()).unwrap();
    let q = d.context.q_tilde(d.tracking.f_b);
    let mc = qtilde_monte_carlo(&sc, &d, 100_000);
    let big = q.abs().max();
    let mut q_err = 0.0f64;
    for (a, b) in q.iter().zip(mc.iter()) {
        if a.abs() >= 0.1 * big {
            q_err = q_err.max((a - b).abs() / a.abs());
        }
    }
    ok &= q_err <= 0.05;
    notes.push(format!("Q̃ Monte Carlo {:.2}%", 100.0 * q_err));

    outcome(ok, notes.join("; "))
}

fn criterion_7(d: &Design) -> Outcome {
    let mut sc = presets::desk_scale();
    let opts = SimOptions {
        perfect_estimation: true,
        ..SimOptions::default()
    };
    let tape = NoiseTape::generate(sc.seed, NoiseLayout::of(&sc), sc.horizon);
    sc.mode = Mode::Sync;
    let a = run_with_tape(&sc, Some(&d.gains), opts, &tape).unwrap();
    sc.mode = Mode::SyncTrack;
    let b = run_with_tape(&sc, Some(&d.gains), opts, &tape).unwrap();
    let mut scale = 0.0f64;
    let mut diff = 0.0f64;
    for k in 0..=sc.horizon {
        for (x, y) in a.consensus_error(k).iter().zip(b.consensus_error(k)) {
            scale = scale.max(x.abs());
            diff = diff.max((x - y).abs());
        }
    }
    let moved = (0..=sc.horizon).any(|k| a.ensemble_mean(k) != b.ensemble_mean(k));
    outcome(
        diff <= 1e-12 * scale && moved,
        format!("max |Δ consensus| {diff:.2e} vs scale {scale:.2e} (relative limit 1e-12); tracking changed the mean: {moved}"),
    )
}

fn criterion_8() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, sc) in [("paper_fig4", presets::paper_fig4()), ("desk_scale", presets::desk_scale())] {
        let d1 = design(&sc, &DesignOptions::default()).unwrap();
        let d2 = design(&sc, &DesignOptions::default()).unwrap();
        let same = d1.gains.to_json() == d2.gains.to_json();
        let tau = sc.tau;
        let s = sc.broadcast_period;
        let fb = d1.gains.f_b;
        let margin = 4.0 / (fb[0] * tau * s as f64 + 2.0 * fb[1]);
        let a = transition(tau);
        let b = Matrix::from_column_slice(2, 1, &[tau, 1.0]);
        let fbm = Matrix::from_row_slice(1, 2, &fb);
        let ab = (&a - &b * &fbm) * a.pow((s - 1) as u32);
        let ab_r = eig_radius(&ab);
        let t = &sc.topology;
        let n = t.n();
        let pi = Matrix::identity(n, n) - Matrix::from_element(n, n, 1.0 / n as f64);
        let f = Matrix::from_row_slice(1, 2, &d1.gains.f);
        let closed = kron(&pi, &a) - kron(t.laplacian(), &(&b * f));
        let sync_r = eig_radius(&closed);
        let pass = same && margin > 1.0 && ab_r < 1.0 && sync_r < 1.0;
        ok &= pass;
        notes.push(format!(
            "{name}: margin {margin:.3}, A_B radius {ab_r:.3}, sync radius {sync_r:.3}, identical reruns {same}"
        ));
    }
    outcome(ok, notes.join("; "))
}

fn main() {
    let d = desk_design();
    let checks: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("1 free-running AVAR", Box::new(criterion_1)),
        ("2 synchronization", Box::new(|| criterion_2(&d))),
        ("3 tracking convergence", Box::new(|| criterion_3(&d))),
        ("4 long-term AVAR improvement", Box::new(|| criterion_4(&d))),
        ("5 GNSS-edge tracking inferiority", Box::new(|| criterion_5(&d))),
        ("6 solver oracles", Box::new(criterion_6)),
        ("7 decoupling", Box::new(|| criterion_7(&d))),
        ("8 gain-design contracts", Box::new(criterion_8)),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let o = check();
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
