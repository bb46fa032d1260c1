use rayon::prelude::*;

use crate::channel::channel_trajectory;
use crate::config::{sample_user_drop, SystemConfig, UserDrop};
use crate::error::{Error, Result};
use crate::selection::Policy;

use super::episode::{deteq_episode, run_episode_on, EpisodeLabels, EpisodeOptions};
use super::stats::{mean, std_error};
use super::stream::{derive_stream, Purpose};

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub config: SystemConfig,
    pub policies: Vec<Policy>,
    pub taus: Vec<usize>,
    /// User counts for density sweeps; ignored by [`sweep_tau`].
    pub k_list: Vec<usize>,
    pub n_drops: usize,
    pub n_realizations: usize,
    /// Worker threads; `None` uses rayon's global pool.
    pub threads: Option<usize>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.policies.is_empty() {
            return Err(Error::Config("policy list is empty".into()));
        }
        if self.taus.is_empty() {
            return Err(Error::Config("tau grid is empty".into()));
        }
        if let Some(t) = self.taus.iter().find(|&&t| t > self.config.block_length) {
            return Err(Error::Config(format!(
                "tau {t} exceeds block length {}",
                self.config.block_length
            )));
        }
        if self.n_drops == 0 || self.n_realizations == 0 {
            return Err(Error::Config("drops and realizations must be >= 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        Ok(())
    }
}

/// One output row. Rates are in nats; conversion happens when writing.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub policy: Policy,
    pub tau: usize,
    pub k_users: usize,
    pub n_antennas: usize,
    pub block_length: usize,
    pub mc_rate_mean: f64,
    pub mc_rate_stderr: f64,
    pub deteq_rate_mean: f64,
    pub n_drops: usize,
    pub n_realizations: usize,
    pub is_tau_star: bool,
    /// Per-episode Monte Carlo means, ordered by (drop, realization).
    pub episode_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn row(&self, policy: Policy, tau: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.policy == policy && r.tau == tau)
    }

    pub fn rows_for(&self, policy: Policy) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.policy == policy)
    }
}

/// `tau_min, tau_min + step, ...` up to `tau_max` inclusive.
pub fn tau_grid(tau_min: usize, tau_max: usize, step: usize) -> Result<Vec<usize>> {
    if step == 0 || tau_min > tau_max {
        return Err(Error::Config(format!(
            "bad tau grid {tau_min}..={tau_max} step {step}"
        )));
    }
    Ok((tau_min..=tau_max).step_by(step).collect())
}

/// Drop number `d` of a scenario.
pub fn drop_for(config: &SystemConfig, d: usize) -> UserDrop {
    sample_user_drop(config, &mut derive_stream(config.rng_seed, Purpose::Drop, d as u64, 0, 0))
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Monte Carlo episodes for each `(policy, tau)` combination over all
/// `(drop, realization)` units. Returns, per combination, the per-unit
/// `(mc_mean, deteq_mean)` in unit order.
fn monte_carlo(
    config: &SystemConfig,
    drops: &[UserDrop],
    combos: &[(Policy, usize)],
    n_realizations: usize,
    threads: Option<usize>,
) -> Result<Vec<Vec<(f64, f64)>>> {
    let units: Vec<(usize, usize)> = (0..drops.len())
        .flat_map(|d| (0..n_realizations).map(move |r| (d, r)))
        .collect();
    let per_unit: Vec<Result<Vec<(f64, f64)>>> = with_pool(threads, || {
        units
            .par_iter()
            .map(|&(d, r)| {
                let labels = EpisodeLabels {
                    seed: config.rng_seed,
                    drop: d as u64,
                    realization: r as u64,
                };
                let mut s = derive_stream(config.rng_seed, Purpose::Channel, d as u64, r as u64, 0);
                let trajectory = channel_trajectory(
                    &drops[d],
                    config.n_antennas,
                    config.n_blocks,
                    config.temporal_corr,
                    &mut s,
                );
                combos
                    .iter()
                    .map(|&(policy, tau)| {
                        let ep = run_episode_on(
                            config,
                            &drops[d],
                            &trajectory,
                            policy,
                            tau,
                            labels,
                            EpisodeOptions::default(),
                        )?;
                        Ok((ep.mc_mean(), ep.deteq_mean()))
                    })
                    .collect()
            })
            .collect()
    })?;
    let per_unit: Vec<Vec<(f64, f64)>> = per_unit.into_iter().collect::<Result<_>>()?;
    Ok((0..combos.len())
        .map(|i| per_unit.iter().map(|u| u[i]).collect())
        .collect())
}

fn summarize(
    config: &SystemConfig,
    policy: Policy,
    tau: usize,
    samples: &[(f64, f64)],
    n_drops: usize,
    n_realizations: usize,
) -> SweepRow {
    let mc: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let de: Vec<f64> = samples.iter().map(|s| s.1).collect();
    SweepRow {
        policy,
        tau,
        k_users: config.n_users,
        n_antennas: config.n_antennas,
        block_length: config.block_length,
        mc_rate_mean: mean(&mc),
        mc_rate_stderr: std_error(&mc),
        deteq_rate_mean: mean(&de),
        n_drops,
        n_realizations,
        is_tau_star: false,
        episode_means: mc,
    }
}

/// Index of the largest value; ties go to the earliest entry.
fn argmax_first(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Average rate against training length at fixed `K`.
///
/// FT rows exist only for `tau >= K`. Within each policy the row with the
/// largest deterministic-equivalent mean (smallest `tau` on ties) is marked
/// as `tau*`.
pub fn sweep_tau(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let config = &spec.config;
    let drops: Vec<UserDrop> = (0..spec.n_drops).map(|d| drop_for(config, d)).collect();
    let combos: Vec<(Policy, usize)> = spec
        .policies
        .iter()
        .flat_map(|&p| spec.taus.iter().map(move |&t| (p, t)))
        .filter(|&(p, t)| p.is_feasible(t, config.n_users))
        .collect();
    let samples = monte_carlo(config, &drops, &combos, spec.n_realizations, spec.threads)?;
    let mut rows: Vec<SweepRow> = combos
        .iter()
        .zip(&samples)
        .map(|(&(p, t), s)| summarize(config, p, t, s, spec.n_drops, spec.n_realizations))
        .collect();
    for &p in &spec.policies {
        let idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].policy == p).collect();
        if let Some(best) = argmax_first(idx.iter().map(|&i| rows[i].deteq_rate_mean)) {
            rows[idx[best]].is_tau_star = true;
        }
    }
    Ok(SweepResult { rows })
}

/// Average rate against user count.
///
/// For every `(policy, K)` the training length is first chosen offline as
/// the grid point maximising the deterministic equivalent averaged over
/// drops and blocks; Monte Carlo episodes are then run at that length only.
pub fn sweep_density(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    if spec.k_list.is_empty() || spec.k_list.contains(&0) {
        return Err(Error::Config("K list must be non-empty and positive".into()));
    }
    let mut rows = Vec::new();
    for &k in &spec.k_list {
        let config = SystemConfig {
            n_users: k,
            ..spec.config.clone()
        };
        let drops: Vec<UserDrop> = (0..spec.n_drops).map(|d| drop_for(&config, d)).collect();
        let mut combos = Vec::new();
        for &policy in &spec.policies {
            let taus: Vec<usize> = spec
                .taus
                .iter()
                .copied()
                .filter(|&t| policy.is_feasible(t, k))
                .collect();
            if taus.is_empty() {
                continue;
            }
            let scores: Vec<f64> = with_pool(spec.threads, || {
                taus.par_iter()
                    .map(|&tau| {
                        let per_drop = drops
                            .iter()
                            .enumerate()
                            .map(|(d, drop)| {
                                let labels = EpisodeLabels {
                                    seed: config.rng_seed,
                                    drop: d as u64,
                                    realization: 0,
                                };
                                deteq_episode(&config, drop, policy, tau, labels).map(|v| mean(&v))
                            })
                            .collect::<Result<Vec<f64>>>()?;
                        Ok(mean(&per_drop))
                    })
                    .collect::<Result<Vec<f64>>>()
            })??;
            let best = argmax_first(scores.iter().copied()).expect("non-empty grid");
            combos.push((policy, taus[best]));
        }
        let samples = monte_carlo(&config, &drops, &combos, spec.n_realizations, spec.threads)?;
        for (&(p, t), s) in combos.iter().zip(&samples) {
            let mut row = summarize(&config, p, t, s, spec.n_drops, spec.n_realizations);
            row.is_tau_star = true;
            rows.push(row);
        }
    }
    Ok(SweepResult { rows })
}
