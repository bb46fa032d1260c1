use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{channel_trajectory, ChannelState};
use crate::config::{SystemConfig, UserDrop};
use crate::csi::{
    advance_csi_filtered, build_pilot_matrix, initial_csi, simulate_training, CsiStats,
    FourierTrainer, GaussianNoise, PilotMatrix, TrainingObservation, ZeroNoise,
};
use crate::error::{Error, Result};
use crate::rate::{
    block_rate_sample, det_eq_rate_of, equivalent_noise_over, normalized_variances_over,
};
use crate::selection::{
    score_users, select_all, select_closest, select_dus, select_random, Policy, SelectionOutcome,
};

use super::stats::mean;
use super::stream::{derive_stream, Purpose};

/// Identifies one episode inside a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeLabels {
    pub seed: u64,
    pub drop: u64,
    pub realization: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EpisodeOptions {
    /// Replace receiver noise during training by zeros (test hook).
    pub noiseless_training: bool,
}

/// Outcome of one block. Rates are per user per channel use, in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRecord {
    pub block: usize,
    pub selected: Vec<usize>,
    pub beta: f64,
    pub mc_rate: f64,
    pub deteq_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub policy: Policy,
    pub tau: usize,
    /// Block 0: everyone trained with `K` pilots. Its rates are not computed.
    pub warm_up: BlockRecord,
    /// Blocks `1..J`.
    pub blocks: Vec<BlockRecord>,
}

impl EpisodeResult {
    pub fn mc_mean(&self) -> f64 {
        mean(&self.blocks.iter().map(|b| b.mc_rate).collect::<Vec<_>>())
    }

    pub fn deteq_mean(&self) -> f64 {
        mean(&self.blocks.iter().map(|b| b.deteq_rate).collect::<Vec<_>>())
    }
}

fn check_feasible(config: &SystemConfig, policy: Policy, tau: usize) -> Result<()> {
    if tau > config.block_length {
        return Err(Error::Infeasible(format!(
            "tau {tau} exceeds block length {}",
            config.block_length
        )));
    }
    if !policy.is_feasible(tau, config.n_users) {
        return Err(Error::Infeasible(format!(
            "{policy} needs tau >= K = {}, got {tau}",
            config.n_users
        )));
    }
    Ok(())
}

fn select(
    policy: Policy,
    prev: &CsiStats,
    drop: &UserDrop,
    config: &SystemConfig,
    tau: usize,
    labels: EpisodeLabels,
    block: usize,
) -> Result<SelectionOutcome> {
    let k = config.n_users;
    Ok(match policy {
        Policy::Dus => select_dus(&score_users(prev, drop, config.temporal_corr, tau), tau, k),
        Policy::Rus => {
            let mut s = derive_stream(labels.seed, Purpose::Selection, labels.drop, labels.realization, block as u64);
            select_random(k, tau, &mut s)
        }
        Policy::Us => select_closest(drop, tau),
        Policy::Ft => select_all(k, tau)?,
    })
}

fn served_users(policy: Policy, selection: &SelectionOutcome, k: usize) -> Vec<usize> {
    if policy.serves_only_trained() {
        let mut s = selection.trained.clone();
        s.sort_unstable();
        s
    } else {
        (0..k).collect()
    }
}

fn deteq_for(stats: &CsiStats, served: &[usize], config: &SystemConfig, tau: usize) -> Result<f64> {
    let problem = normalized_variances_over(stats, served, config.n_antennas, tau, config.block_length);
    det_eq_rate_of(&problem)
}

fn observe(
    channel: &ChannelState,
    selected: &[usize],
    pilots: &PilotMatrix,
    labels: EpisodeLabels,
    block: usize,
    options: EpisodeOptions,
) -> Result<TrainingObservation> {
    if options.noiseless_training {
        return simulate_training(channel, selected, pilots, &mut ZeroNoise);
    }
    let mut s = derive_stream(labels.seed, Purpose::TrainingNoise, labels.drop, labels.realization, block as u64);
    simulate_training(channel, selected, pilots, &mut GaussianNoise(&mut s))
}

fn observe_filtered(
    trainer: &FourierTrainer,
    channel: &ChannelState,
    selected: &[usize],
    labels: EpisodeLabels,
    block: usize,
    options: EpisodeOptions,
) -> Result<DMatrix<Complex64>> {
    if options.noiseless_training {
        return trainer.train_and_filter(channel, selected, &mut ZeroNoise);
    }
    let mut s = derive_stream(labels.seed, Purpose::TrainingNoise, labels.drop, labels.realization, block as u64);
    trainer.train_and_filter(channel, selected, &mut GaussianNoise(&mut s))
}

/// Runs one episode on its own channel trajectory, drawn from the
/// `(Channel, drop, realization)` stream.
pub fn run_episode(
    config: &SystemConfig,
    drop: &UserDrop,
    policy: Policy,
    tau: usize,
    labels: EpisodeLabels,
) -> Result<EpisodeResult> {
    let mut s = derive_stream(labels.seed, Purpose::Channel, labels.drop, labels.realization, 0);
    let trajectory = channel_trajectory(drop, config.n_antennas, config.n_blocks, config.temporal_corr, &mut s);
    run_episode_on(config, drop, &trajectory, policy, tau, labels, EpisodeOptions::default())
}

/// Runs the block protocol over a given trajectory of `J` channel blocks.
///
/// Block 0 trains every user with `K` pilots to initialise CSI. Blocks
/// `1..J` select users under `policy`, train them with `tau` pilots,
/// predict the rest, and record one Monte Carlo rate sample plus the
/// deterministic-equivalent rate of the tracked variances.
pub fn run_episode_on(
    config: &SystemConfig,
    drop: &UserDrop,
    trajectory: &[ChannelState],
    policy: Policy,
    tau: usize,
    labels: EpisodeLabels,
    options: EpisodeOptions,
) -> Result<EpisodeResult> {
    check_feasible(config, policy, tau)?;
    let k = config.n_users;
    if drop.n_users() != k || trajectory.len() != config.n_blocks {
        return Err(Error::Contract(format!(
            "episode expects {k} users and {} blocks, got {} and {}",
            config.n_blocks,
            drop.n_users(),
            trajectory.len()
        )));
    }

    let warm_pilots = build_pilot_matrix(k, k)?;
    let all: Vec<usize> = (0..k).collect();
    let obs = observe(&trajectory[0], &all, &warm_pilots, labels, 0, options)?;
    let mut csi = initial_csi(&obs, &warm_pilots, drop)?;
    let warm_up = BlockRecord {
        block: 0,
        selected: all,
        beta: csi.stats.v_tilde.iter().sum(),
        mc_rate: f64::NAN,
        deteq_rate: f64::NAN,
    };

    let trainer = FourierTrainer::new(tau);
    let mut blocks = Vec::with_capacity(config.n_blocks - 1);
    for (b, channel) in trajectory.iter().enumerate().skip(1) {
        let selection = select(policy, &csi.stats, drop, config, tau, labels, b)?;
        let r = observe_filtered(&trainer, channel, &selection.trained, labels, b, options)?;
        csi = advance_csi_filtered(&csi, &selection.trained, &r, drop, config.temporal_corr, tau)?;

        let served = served_users(policy, &selection, k);
        let noise = equivalent_noise_over(&csi.stats, &served);
        let mc_rate = if served.len() == k {
            block_rate_sample(&csi.h_hat, &noise, tau, config.block_length, k)?
        } else {
            let h = csi.h_hat.select_columns(served.iter());
            block_rate_sample(&h, &noise, tau, config.block_length, k)?
        };
        let deteq_rate = deteq_for(&csi.stats, &served, config, tau)?;
        blocks.push(BlockRecord {
            block: b,
            selected: selection.trained,
            beta: noise.beta,
            mc_rate,
            deteq_rate,
        });
    }
    Ok(EpisodeResult {
        policy,
        tau,
        warm_up,
        blocks,
    })
}

/// Deterministic-equivalent rates of blocks `1..J` from variance tracking
/// alone. Matches the `deteq_rate` column of [`run_episode_on`] for the
/// same labels, without drawing any channel.
pub fn deteq_episode(
    config: &SystemConfig,
    drop: &UserDrop,
    policy: Policy,
    tau: usize,
    labels: EpisodeLabels,
) -> Result<Vec<f64>> {
    check_feasible(config, policy, tau)?;
    let k = config.n_users;
    let mut stats = CsiStats::fully_trained(drop, k);
    let mut out = Vec::with_capacity(config.n_blocks - 1);
    for b in 1..config.n_blocks {
        let selection = select(policy, &stats, drop, config, tau, labels, b)?;
        stats = stats.advance(&selection.trained, drop, config.temporal_corr, tau)?;
        let served = served_users(policy, &selection, k);
        out.push(deteq_for(&stats, &served, config, tau)?);
    }
    Ok(out)
}
