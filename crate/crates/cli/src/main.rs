//! `chronoens`: design gains, simulate, and analyse clock ensembles.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chronoens::avar;
use chronoens::config::ScenarioFile;
use chronoens::design::{design, GainSet};
use chronoens::scenario::{Mode, Scenario};
use chronoens::sim::{monte_carlo, run_simulation, SimOptions};
use clap::{Parser, Subcommand, ValueEnum};

use chronoens_cli::error::{CliError, CliResult};
use chronoens_cli::{files, report, trace, Reference};

#[derive(Debug, Parser)]
#[command(name = "chronoens", version, about = "Atomic clock ensemble synchronization and GNSS tracking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModeArg {
    Free,
    Sync,
    SyncTrack,
    SyncTrackAlt,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Free => Mode::Free,
            ModeArg::Sync => Mode::Sync,
            ModeArg::SyncTrack => Mode::SyncTrack,
            ModeArg::SyncTrackAlt => Mode::SyncTrackAlt,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize filter, synchronization and tracking gains.
    Design {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `output.gains` in the config, then `gains.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one replication and write the state trace.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Required unless the mode is `free`.
        #[arg(long)]
        gains: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Trace CSV; gzip when the name ends in `.gz`. Defaults to
        /// `output.trace` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Feed true edge states and tracking error to the controllers.
        #[arg(long)]
        perfect_estimation: bool,
    },
    /// Statistical AVAR of entities in a trace.
    Avar {
        #[arg(long)]
        trace: PathBuf,
        /// Comma-separated entity names; defaults to every `macN`.
        #[arg(long, value_delimiter = ',')]
        entities: Vec<String>,
        /// Comma-separated averaging times in seconds.
        #[arg(long, value_delimiter = ',', required = true)]
        taus: Vec<f64>,
        #[arg(long, value_enum, default_value = "truth")]
        reference: Reference,
        #[arg(long, default_value_t = 1.0)]
        sample_interval: f64,
        /// AVAR CSV; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multi-seed AVAR comparison of sync, sync_track and sync_track_alt.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        gains: PathBuf,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_delimiter = ',')]
        taus: Vec<f64>,
        #[arg(long, value_enum, default_value = "truth")]
        reference: Reference,
    },
    /// Per-step mean and variance of the tracking error across replications.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        gains: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path) -> CliResult<(ScenarioFile, Scenario)> {
    let text = files::read_to_string(path)?;
    let file = ScenarioFile::from_json(&text)?;
    let scenario = file.to_scenario()?;
    Ok((file, scenario))
}

fn load_gains(path: &Path) -> CliResult<GainSet> {
    Ok(GainSet::from_json(&files::read_to_string(path)?)?)
}

fn cmd_design(config: &Path, out: Option<PathBuf>) -> CliResult<()> {
    let (file, sc) = load_config(config)?;
    let opts = file.design.clone();
    let d = design(&sc, &opts)?;
    let path = out
        .or_else(|| file.output.gains.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("gains.json"));
    let g = &d.gains;
    files::write_with(Some(&path), |w| writeln!(w, "{}", g.to_json()))?;
    println!("F = [{:e}, {:e}]  sync radius = {:.6}", g.f[0], g.f[1], g.sync_radius);
    println!(
        "F_B = [{:e}, {:e}]  margin = {:.6}  A_B radius = {:.6}  objective = {:e}",
        g.f_b[0], g.f_b[1], g.margin, g.ab_radius, g.objective
    );
    println!("wrote {}", path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    config: &Path,
    gains: Option<PathBuf>,
    mode: Option<ModeArg>,
    seed: Option<u64>,
    horizon: Option<usize>,
    out: Option<PathBuf>,
    perfect_estimation: bool,
) -> CliResult<()> {
    let (file, mut sc) = load_config(config)?;
    if let Some(m) = mode {
        sc.mode = m.into();
    }
    if let Some(s) = seed {
        sc.seed = s;
    }
    if let Some(h) = horizon {
        sc.horizon = h;
    }
    let gains = gains.as_deref().map(load_gains).transpose()?;
    let opts = SimOptions {
        perfect_estimation,
        ..SimOptions::default()
    };
    let trace = run_simulation(&sc, gains.as_ref(), opts)?;
    let path = out
        .or_else(|| file.output.trace.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::Domain("no output path: pass --out".into()))?;
    files::write_with(Some(&path), |w| trace.write_csv(w))
}

fn cmd_avar(
    trace_path: &Path,
    entities: Vec<String>,
    taus: &[f64],
    reference: Reference,
    sample_interval: f64,
    out: Option<PathBuf>,
) -> CliResult<()> {
    let rows = trace::read_rows(files::open(trace_path)?)?;
    let phases = trace::Phases::from_rows(&rows)?;
    let entities = if entities.is_empty() { phases.with_prefix("mac") } else { entities };
    let offset = match reference {
        Reference::Truth => None,
        Reference::GacMean => Some(phases.gac_mean()?),
    };
    let mut curves = Vec::new();
    for e in &entities {
        let mut d = phases.get(e)?.to_vec();
        if let Some(o) = &offset {
            if o.len() != d.len() {
                return Err(CliError::Domain(format!("{e} and the gac series differ in length")));
            }
            d.iter_mut().zip(o).for_each(|(a, b)| *a -= b);
        }
        curves.push(avar::statistical_curve(e, &d, sample_interval, taus)?);
    }
    files::write_with(out.as_deref(), |w| avar::write_csv(&curves, w))
}

fn cmd_compare(
    config: &Path,
    gains: &Path,
    reps: usize,
    out_dir: &Path,
    taus: Vec<f64>,
    reference: Reference,
) -> CliResult<()> {
    if reps == 0 {
        return Err(CliError::Domain("reps must be >= 1".into()));
    }
    let (_, sc) = load_config(config)?;
    let gains = load_gains(gains)?;
    let taus = if taus.is_empty() { report::default_taus(&sc) } else { taus };
    if taus.is_empty() {
        return Err(CliError::Domain("horizon too short for any averaging time".into()));
    }
    let rep = report::compare(&sc, &gains, reps, &taus, reference)?;
    let json = serde_json::to_string_pretty(&rep).expect("report serializes");
    files::write_with(Some(&out_dir.join("report.json")), |w| writeln!(w, "{json}"))?;
    files::write_with(Some(&out_dir.join("avar_curves.csv")), |w| avar::write_csv(&rep.curves, w))?;
    let v = &rep.verdict;
    println!(
        "τ = {} s: sync {:e}, sync_track {:e}, sync_track_alt {:e} -> {}",
        v.tau_s, v.sync, v.sync_track, v.sync_track_alt, v.status
    );
    Ok(())
}

fn cmd_montecarlo(config: &Path, gains: Option<PathBuf>, mode: Option<ModeArg>, reps: usize, out: Option<PathBuf>) -> CliResult<()> {
    let (_, mut sc) = load_config(config)?;
    if let Some(m) = mode {
        sc.mode = m.into();
    }
    let gains = gains.as_deref().map(load_gains).transpose()?;
    let summary = monte_carlo(&sc, gains.as_ref(), reps, SimOptions::default())?;
    files::write_with(out.as_deref(), |w| {
        writeln!(w, "k,mean_x1_s,mean_x2,var_x1_s,var_x2")?;
        for (k, (m, v)) in summary.z_tilde_mean.iter().zip(&summary.z_tilde_var).enumerate() {
            writeln!(w, "{k},{:.16e},{:.16e},{:.16e},{:.16e}", m[0], m[1], v[0], v[1])?;
        }
        Ok(())
    })
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("CHRONO_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| CliError::Domain(format!("CHRONO_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Domain(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Design { config, out } => cmd_design(&config, out),
        Command::Simulate {
            config,
            gains,
            mode,
            seed,
            horizon,
            out,
            perfect_estimation,
        } => cmd_simulate(&config, gains, mode, seed, horizon, out, perfect_estimation),
        Command::Avar {
            trace,
            entities,
            taus,
            reference,
            sample_interval,
            out,
        } => cmd_avar(&trace, entities, &taus, reference, sample_interval, out),
        Command::Compare {
            config,
            gains,
            reps,
            out_dir,
            taus,
            reference,
        } => cmd_compare(&config, &gains, reps, &out_dir, taus, reference),
        Command::Montecarlo {
            config,
            gains,
            mode,
            reps,
            out,
        } => cmd_montecarlo(&config, gains, mode, reps, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

