//! Per-block training-set policies.
//!
//! A training set trades the residual error of users that are predicted
//! against the error left after fresh training. With tracked variances the
//! total residual error of a block is
//!
//! ```text
//! F(S) = 1 + sum_{k in S} beta_t[k] + sum_{k not in S} beta_p[k]
//!      = F(empty) - sum_{k in S} delta[k],     delta = beta_p - beta_t
//! ```
//!
//! so the best set of at most `tau` users is made of the largest deltas.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::config::UserDrop;
use crate::csi::{predicted_variances, trained_variances, CsiStats};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Policy {
    /// Dynamic user selection: train the users with the largest error reduction.
    Dus,
    /// Random user selection, redrawn every block.
    Rus,
    /// User scheduling: train and serve only the closest users.
    Us,
    /// Full training of every user.
    Ft,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Dus, Policy::Rus, Policy::Us, Policy::Ft];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Dus => "DUS",
            Policy::Rus => "RUS",
            Policy::Us => "US",
            Policy::Ft => "FT",
        }
    }

    /// Whether the policy can run with training length `tau` and `k` users.
    pub fn is_feasible(self, tau: usize, k: usize) -> bool {
        match self {
            Policy::Ft => tau >= k,
            _ => true,
        }
    }

    /// Under US only the trained users transmit data.
    pub fn serves_only_trained(self) -> bool {
        matches!(self, Policy::Us)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "DUS" => Ok(Policy::Dus),
            "RUS" => Ok(Policy::Rus),
            "US" => Ok(Policy::Us),
            "FT" => Ok(Policy::Ft),
            other => Err(Error::Config(format!("unknown policy '{other}'"))),
        }
    }
}

/// Users to train in one block. `trained[j]` is assigned pilot row `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionOutcome {
    pub trained: Vec<usize>,
    pub policy: Policy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionScore {
    pub beta_t: Vec<f64>,
    pub beta_p: Vec<f64>,
    pub delta: Vec<f64>,
}

impl SelectionScore {
    pub fn from_parts(beta_t: Vec<f64>, beta_p: Vec<f64>) -> Self {
        let delta = beta_p.iter().zip(&beta_t).map(|(p, t)| p - t).collect();
        Self {
            beta_t,
            beta_p,
            delta,
        }
    }

    pub fn n_users(&self) -> usize {
        self.delta.len()
    }

    /// `F(S)`, summed in user order so equal sets give bit-identical values.
    pub fn objective(&self, trained: &[usize]) -> f64 {
        let mut mask = vec![false; self.n_users()];
        for &u in trained {
            mask[u] = true;
        }
        1.0 + (0..self.n_users())
            .map(|k| if mask[k] { self.beta_t[k] } else { self.beta_p[k] })
            .sum::<f64>()
    }
}

/// Training and prediction error variances for the coming block, from the
/// previous block's tracked statistics.
pub fn score_users(prev: &CsiStats, drop: &UserDrop, c: f64, tau: usize) -> SelectionScore {
    let (beta_t, beta_p) = drop
        .variances
        .iter()
        .zip(&prev.v_hat)
        .map(|(&v, &vh)| (trained_variances(v, tau).1, predicted_variances(v, vh, c).1))
        .unzip();
    SelectionScore::from_parts(beta_t, beta_p)
}

fn all_users(k: usize, policy: Policy) -> SelectionOutcome {
    SelectionOutcome {
        trained: (0..k).collect(),
        policy,
    }
}

/// Dynamic user selection. With `K <= tau` everyone trains (in index
/// order); otherwise the `tau` largest deltas, in descending delta order,
/// ties to the smaller index.
pub fn select_dus(score: &SelectionScore, tau: usize, k: usize) -> SelectionOutcome {
    if k <= tau {
        return all_users(k, Policy::Dus);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| score.delta[b].total_cmp(&score.delta[a]).then(a.cmp(&b)));
    order.truncate(tau);
    SelectionOutcome {
        trained: order,
        policy: Policy::Dus,
    }
}

/// Uniform subset of `min(tau, K)` users, returned in index order.
pub fn select_random<R: Rng + ?Sized>(k: usize, tau: usize, rng: &mut R) -> SelectionOutcome {
    let m = tau.min(k);
    let mut trained = rand::seq::index::sample(rng, k, m).into_vec();
    trained.sort_unstable();
    SelectionOutcome {
        trained,
        policy: Policy::Rus,
    }
}

/// The `min(tau, K)` users nearest the base station, returned in index order.
pub fn select_closest(drop: &UserDrop, tau: usize) -> SelectionOutcome {
    let k = drop.n_users();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| drop.distances[a].total_cmp(&drop.distances[b]).then(a.cmp(&b)));
    order.truncate(tau.min(k));
    order.sort_unstable();
    SelectionOutcome {
        trained: order,
        policy: Policy::Us,
    }
}

pub fn select_all(k: usize, tau: usize) -> Result<SelectionOutcome> {
    if tau < k {
        return Err(Error::Infeasible(format!(
            "full training of {k} users needs tau >= {k}, got {tau}"
        )));
    }
    Ok(all_users(k, Policy::Ft))
}

/// Largest `K` accepted by [`brute_force_oracle`].
pub const ORACLE_MAX_USERS: usize = 20;

/// Exhaustive minimisation of `F(S)` over all sets with `|S| <= tau`.
///
/// Among equal minima the smallest set wins, then the one whose sorted
/// index list is lexicographically smallest. Returns the set (sorted) and
/// its objective.
pub fn brute_force_oracle(score: &SelectionScore, tau: usize, k: usize) -> Result<(SelectionOutcome, f64)> {
    if k > ORACLE_MAX_USERS {
        return Err(Error::Guard {
            k,
            limit: ORACLE_MAX_USERS,
        });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 0u32..(1u32 << k) {
        if mask.count_ones() as usize > tau {
            continue;
        }
        let set: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).collect();
        let f = score.objective(&set);
        let better = match &best {
            None => true,
            Some((bf, bs)) => f < *bf || (f == *bf && (set.len(), &set) < (bs.len(), bs)),
        };
        if better {
            best = Some((f, set));
        }
    }
    let (f, trained) = best.expect("empty set is always admissible");
    Ok((
        SelectionOutcome {
            trained,
            policy: Policy::Dus,
        },
        f,
    ))
}

/// True when a DUS selection trains a user whose delta is negative, i.e.
/// when filling the training set to `tau` users increases `F`.
pub fn has_negative_pick(score: &SelectionScore, outcome: &SelectionOutcome) -> bool {
    outcome.trained.iter().any(|&u| score.delta[u] < 0.0)
}
