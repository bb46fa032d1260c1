use std::io::Write;

use crate::config::RateUnit;
use crate::error::Result;

use super::episode::EpisodeResult;
use super::sweep::SweepResult;

pub const CSV_HEADER: &str = "policy,tau,k_users,n_antennas,block_length,mc_rate_mean,mc_rate_stderr,deteq_rate_mean,n_drops,n_realizations,is_tau_star";

/// Writes sweep rows with rates converted to `unit`.
pub fn write_sweep_csv<W: Write>(mut w: W, result: &SweepResult, unit: RateUnit) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in &result.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.policy,
            r.tau,
            r.k_users,
            r.n_antennas,
            r.block_length,
            unit.from_nats(r.mc_rate_mean),
            unit.from_nats(r.mc_rate_stderr),
            unit.from_nats(r.deteq_rate_mean),
            r.n_drops,
            r.n_realizations,
            r.is_tau_star
        )?;
    }
    Ok(())
}

/// Per-block trace of one episode. Selected users are 1-based and
/// space-separated; the warm-up block has empty rate fields.
pub fn write_episode_csv<W: Write>(mut w: W, ep: &EpisodeResult, unit: RateUnit) -> Result<()> {
    writeln!(w, "block,policy,tau,n_trained,trained_users,beta,mc_rate,deteq_rate")?;
    let users = |s: &[usize]| {
        s.iter()
            .map(|u| (u + 1).to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let b = &ep.warm_up;
    writeln!(
        w,
        "{},{},{},{},{},{},,",
        b.block,
        ep.policy,
        b.selected.len(),
        b.selected.len(),
        users(&b.selected),
        b.beta
    )?;
    for b in &ep.blocks {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            b.block,
            ep.policy,
            ep.tau,
            b.selected.len(),
            users(&b.selected),
            b.beta,
            unit.from_nats(b.mc_rate),
            unit.from_nats(b.deteq_rate)
        )?;
    }
    Ok(())
}
