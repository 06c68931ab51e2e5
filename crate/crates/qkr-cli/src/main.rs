use clap::{Args, Parser, Subcommand};
use qkr::rotor::Parity;
use qkr_cli::commands::{self, FitArgs, ResonanceMapArgs, SweepAxis};
use qkr_cli::config::ExperimentConfig;
use std::path::PathBuf;
use std::process::ExitCode;

/// Simulator and analysis toolkit for laser-kicked molecular rotors.
#[derive(Parser)]
#[command(name = "qkr", version, about)]
struct Cli {
    /// Cap the worker-thread count of the ensemble grid.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Export the fractional-resonance map as CSV.
    ResonanceMap(ResonanceMapCli),
    /// Run a configured experiment: trains -> ensemble -> analysis.
    Simulate(SimulateCli),
    /// Re-run a config over a grid of kick strengths or mean periods.
    Sweep(SweepCli),
    /// Re-fit a populations CSV written by `simulate`.
    Fit(FitCli),
}

#[derive(Args)]
struct ResonanceMapCli {
    /// Largest J to include.
    #[arg(long, default_value_t = 13)]
    jmax: u32,
    /// Period interval as lo:hi in units of T_rev.
    #[arg(long, default_value = "0.2:0.45", value_parser = parse_interval)]
    t: (f64, f64),
    #[arg(long, default_value = "odd-only", value_parser = parse_parity)]
    parity: Parity,
    /// Revival time used for the picosecond column.
    #[arg(long, default_value_t = 11.67)]
    trev_ps: f64,
    /// Protocol interval(s) to export alongside, lo:hi (repeatable).
    #[arg(long, value_parser = parse_interval)]
    overlay: Vec<(f64, f64)>,
    /// Output CSV path.
    #[arg(long, default_value = "resonance_map.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateCli {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides config and QKR_OUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's preset.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct SweepCli {
    #[arg(long)]
    config: PathBuf,
    /// Sweep axis: p | mean-t.
    #[arg(long, value_parser = parse_axis)]
    axis: SweepAxis,
    /// Comma-separated grid values.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FitCli {
    /// populations.csv written by `simulate`.
    #[arg(long)]
    csv: PathBuf,
    /// Kick index to fit; defaults to the last row.
    #[arg(long)]
    kick: Option<usize>,
    #[arg(long, default_value = "odd-only", value_parser = parse_parity)]
    parity: Parity,
    #[arg(long, default_value_t = 21)]
    j_lim: u32,
    /// Write the fit JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_interval(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let lo: f64 = lo.parse().map_err(|e| format!("bad interval start: {e}"))?;
    let hi: f64 = hi.parse().map_err(|e| format!("bad interval end: {e}"))?;
    if !(lo <= hi) {
        return Err(format!("empty interval {s:?}"));
    }
    Ok((lo, hi))
}

fn parse_parity(s: &str) -> Result<Parity, String> {
    match s {
        "odd" | "odd-only" => Ok(Parity::OddOnly),
        "even" | "even-only" => Ok(Parity::EvenOnly),
        "both" => Ok(Parity::Both),
        other => Err(format!(
            "unknown parity {other:?} (odd-only|even-only|both)"
        )),
    }
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    match s {
        "p" | "strength" => Ok(SweepAxis::Strength),
        "mean-t" | "mean_t" => Ok(SweepAxis::MeanPeriod),
        other => Err(format!("unknown sweep axis {other:?} (p|mean-t)")),
    }
}

fn load_config(
    path: &std::path::Path,
    seed: Option<u64>,
    preset: Option<String>,
) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(p) = preset {
        cfg.protocol = qkr_cli::config::ProtocolSection {
            preset: Some(p),
            ..Default::default()
        };
        cfg.validate()?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok();
    }
    match cli.command {
        Command::ResonanceMap(args) => commands::cmd_resonance_map(&ResonanceMapArgs {
            j_max: args.jmax,
            t_lo: args.t.0,
            t_hi: args.t.1,
            parity: args.parity,
            revival_time_ps: args.trev_ps,
            overlays: args.overlay,
            out: args.out,
        }),
        Command::Simulate(args) => {
            let cfg = load_config(&args.config, args.seed, args.preset)?;
            let dir = commands::resolve_out_dir(args.out.as_deref(), cfg.output.dir.as_deref());
            commands::cmd_simulate(&cfg, &dir)
        }
        Command::Sweep(args) => {
            let cfg = load_config(&args.config, args.seed, None)?;
            let dir = commands::resolve_out_dir(args.out.as_deref(), cfg.output.dir.as_deref());
            commands::cmd_sweep(&cfg, args.axis, &args.values, &dir)
        }
        Command::Fit(args) => commands::cmd_fit(&FitArgs {
            csv: args.csv,
            kick: args.kick,
            parity: args.parity,
            j_lim: args.j_lim,
            out: args.out,
        }),
    }
}

/// Exit codes: 0 success, 2 config error, 3 numerical/runtime error.
fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let config_like = err.downcast_ref::<qkr::Error>().map_or_else(
                || {
                    let text = format!("{err:#}");
                    text.contains("invalid config")
                        || text.contains("cannot read config")
                        || text.contains("cannot parse")
                        || text.contains("unknown preset")
                },
                |e| {
                    matches!(
                        e,
                        qkr::Error::Config(_) | qkr::Error::Domain(_) | qkr::Error::FitRange(_)
                    )
                },
            );
            if config_like {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
