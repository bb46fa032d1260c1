//! Command-line front end: sweeps, single-episode traces and one-off
//! deterministic-equivalent solves.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use seltrain::channel::{channel_trajectory, write_trajectory};
use seltrain::config::{RateUnit, SystemConfig};
use seltrain::experiment::{
    derive_stream, drop_for, run_episode_on, sweep_density, sweep_tau, tau_grid, write_episode_csv,
    write_sweep_csv, EpisodeLabels, EpisodeOptions, Purpose, SweepSpec,
};
use seltrain::rate::{det_eq_rate, solve_fixed_point, DetEqProblem};
use seltrain::selection::Policy;
use seltrain::{Error, Result};

#[derive(Parser)]
#[command(name = "seltrain", version, about = "Selective uplink training simulator for massive MIMO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the scenario's rng_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the scenario's rate unit.
    #[arg(long)]
    unit: Option<String>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (1 runs serially).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct Sampling {
    /// Comma-separated policies out of DUS, RUS, US, FT.
    #[arg(long, default_value = "DUS,RUS,US,FT")]
    policies: String,
    #[arg(long, default_value_t = 0)]
    tau_min: usize,
    /// Defaults to the block length.
    #[arg(long)]
    tau_max: Option<usize>,
    #[arg(long, default_value_t = 1)]
    tau_step: usize,
    #[arg(long, default_value_t = 1)]
    drops: usize,
    #[arg(long, default_value_t = 100)]
    realizations: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Average rate against training length at fixed K.
    SweepTau {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Average rate against the number of users, at the offline-optimal tau.
    SweepDensity {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sampling: Sampling,
        /// Comma-separated user counts.
        #[arg(long, default_value = "10,20,30,40,50,60")]
        k_list: String,
    },
    /// Per-block trace of a single episode.
    Episode {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "DUS")]
        policy: String,
        #[arg(long)]
        tau: usize,
        #[arg(long, default_value_t = 0)]
        drop_index: u64,
        #[arg(long, default_value_t = 0)]
        realization: u64,
        /// Also dump the true channel trajectory in binary form.
        #[arg(long)]
        dump_channel: Option<PathBuf>,
    },
    /// One fixed-point solve from a file of normalised variances.
    SolveDeteq {
        #[command(flatten)]
        common: Common,
        /// One variance per line (commas or whitespace also separate values).
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 0)]
        tau: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
    },
}

fn load_config(common: &Common) -> Result<SystemConfig> {
    let mut cfg = match &common.config {
        Some(p) => SystemConfig::load(p)?,
        None => SystemConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.rng_seed = seed;
    }
    if let Some(u) = &common.unit {
        cfg.rate_unit = u.parse::<RateUnit>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| {
            x.parse::<T>()
                .map_err(|_| Error::Config(format!("bad {what} entry '{x}'")))
        })
        .collect()
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn build_spec(common: &Common, sampling: &Sampling, k_list: Vec<usize>) -> Result<SweepSpec> {
    let config = load_config(common)?;
    let policies = sampling
        .policies
        .split(',')
        .map(str::parse::<Policy>)
        .collect::<Result<Vec<_>>>()?;
    let tau_max = sampling.tau_max.unwrap_or(config.block_length);
    Ok(SweepSpec {
        taus: tau_grid(sampling.tau_min, tau_max, sampling.tau_step)?,
        config,
        policies,
        k_list,
        n_drops: sampling.drops,
        n_realizations: sampling.realizations,
        threads: common.threads,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SweepTau { common, sampling } => {
            let spec = build_spec(&common, &sampling, Vec::new())?;
            let result = sweep_tau(&spec)?;
            let mut w = output(common.out.as_deref())?;
            write_sweep_csv(&mut w, &result, spec.config.rate_unit)?;
            w.flush()?;
        }
        Command::SweepDensity {
            common,
            sampling,
            k_list,
        } => {
            let spec = build_spec(&common, &sampling, parse_list(&k_list, "K")?)?;
            let result = sweep_density(&spec)?;
            let mut w = output(common.out.as_deref())?;
            write_sweep_csv(&mut w, &result, spec.config.rate_unit)?;
            w.flush()?;
        }
        Command::Episode {
            common,
            policy,
            tau,
            drop_index,
            realization,
            dump_channel,
        } => {
            let cfg = load_config(&common)?;
            let policy: Policy = policy.parse()?;
            let drop = drop_for(&cfg, drop_index as usize);
            let mut s = derive_stream(cfg.rng_seed, Purpose::Channel, drop_index, realization, 0);
            let traj = channel_trajectory(&drop, cfg.n_antennas, cfg.n_blocks, cfg.temporal_corr, &mut s);
            let labels = EpisodeLabels {
                seed: cfg.rng_seed,
                drop: drop_index,
                realization,
            };
            let ep = run_episode_on(&cfg, &drop, &traj, policy, tau, labels, EpisodeOptions::default())?;
            if let Some(p) = dump_channel {
                let mut f = BufWriter::new(File::create(p)?);
                write_trajectory(&mut f, &traj)?;
                f.flush()?;
            }
            let mut w = output(common.out.as_deref())?;
            write_episode_csv(&mut w, &ep, cfg.rate_unit)?;
            w.flush()?;
        }
        Command::SolveDeteq {
            common,
            profile,
            tau,
            tol,
            max_iter,
        } => {
            let cfg = load_config(&common)?;
            let text = std::fs::read_to_string(&profile)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", profile.display())))?;
            let v_bar = text
                .lines()
                .map(|l| l.split('#').next().unwrap_or(""))
                .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
                .filter(|x| !x.is_empty())
                .map(|x| {
                    x.parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad variance '{x}'")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if v_bar.is_empty() {
                return Err(Error::Config("variance profile is empty".into()));
            }
            if tau > cfg.block_length {
                return Err(Error::Infeasible(format!(
                    "tau {tau} exceeds block length {}",
                    cfg.block_length
                )));
            }
            let problem = DetEqProblem {
                v_bar,
                n_antennas: cfg.n_antennas,
                tau,
                block_length: cfg.block_length,
            };
            let fp = solve_fixed_point(&problem, tol, max_iter)?;
            let rate = det_eq_rate(&problem, &fp)?;
            let mut w = output(common.out.as_deref())?;
            writeln!(w, "k_users,n_antennas,tau,t,iterations,residual,deteq_rate")?;
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                problem.n_users(),
                problem.n_antennas,
                tau,
                fp.t,
                fp.iterations,
                fp.residual,
                cfg.rate_unit.from_nats(rate)
            )?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("seltrain: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
