//! Achievable-rate evaluation.
//!
//! Residual CSI error is folded into white equivalent noise of power
//! `1 + beta`, `beta = sum_k v_tilde[k]`, and the obtained channel is
//! treated as the true one. The per-user rate of a block is then
//!
//! ```text
//! R = (1 - tau/T0) (1/K) log det(I_N + H_hat H_hat^H / (1 + beta))
//! ```
//!
//! estimated either by Monte Carlo samples of the log-det or by its
//! deterministic equivalent. With `v_bar[k] = v_hat[k] / (1 + beta)` and
//! `rho = N/K`, the equivalent is driven by the scalar `t` solving
//!
//! ```text
//! t = 1 / ( (1/K) sum_k v_bar[k] / (1 + rho v_bar[k] t) + 1/K )
//! ```
//!
//! All values here are in nats.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::csi::CsiStats;
use crate::error::{Error, Result};
use crate::linalg::log_det_identity_plus;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalentNoise {
    pub beta: f64,
    pub noise_power: f64,
}

impl EquivalentNoise {
    pub fn from_beta(beta: f64) -> Self {
        Self {
            beta,
            noise_power: 1.0 + beta,
        }
    }
}

/// Equivalent noise when every user transmits data.
pub fn equivalent_noise(stats: &CsiStats) -> EquivalentNoise {
    EquivalentNoise::from_beta(stats.v_tilde.iter().sum())
}

/// Equivalent noise when only `served` users transmit.
pub fn equivalent_noise_over(stats: &CsiStats, served: &[usize]) -> EquivalentNoise {
    EquivalentNoise::from_beta(served.iter().map(|&k| stats.v_tilde[k]).sum())
}

/// Fraction of the block left for data.
pub fn data_fraction(tau: usize, block_length: usize) -> f64 {
    1.0 - tau as f64 / block_length as f64
}

/// One Monte Carlo sample of the per-user rate.
///
/// `h_hat` holds the columns of the users that transmit; `k_users` is the
/// normalisation (the full user count, also under user scheduling).
pub fn block_rate_sample(
    h_hat: &DMatrix<Complex64>,
    noise: &EquivalentNoise,
    tau: usize,
    block_length: usize,
    k_users: usize,
) -> Result<f64> {
    if tau > block_length {
        return Err(Error::Contract(format!("tau {tau} exceeds block length {block_length}")));
    }
    let ld = log_det_identity_plus(h_hat, 1.0 / noise.noise_power)?;
    if tau == block_length {
        return Ok(0.0);
    }
    Ok(data_fraction(tau, block_length) * ld / k_users as f64)
}

/// Normalised obtained-channel variances feeding the deterministic equivalent.
#[derive(Debug, Clone, PartialEq)]
pub struct DetEqProblem {
    pub v_bar: Vec<f64>,
    pub n_antennas: usize,
    pub tau: usize,
    pub block_length: usize,
}

impl DetEqProblem {
    pub fn n_users(&self) -> usize {
        self.v_bar.len()
    }

    fn rho(&self) -> f64 {
        self.n_antennas as f64 / self.n_users() as f64
    }
}

/// `v_bar[k] = v_hat[k] / (1 + beta)` for all users.
pub fn normalized_variances(stats: &CsiStats, n_antennas: usize, tau: usize, block_length: usize) -> DetEqProblem {
    let served: Vec<usize> = (0..stats.n_users()).collect();
    normalized_variances_over(stats, &served, n_antennas, tau, block_length)
}

/// As [`normalized_variances`] with only `served` users transmitting; the
/// others get `v_bar = 0` but still count in `K`.
pub fn normalized_variances_over(
    stats: &CsiStats,
    served: &[usize],
    n_antennas: usize,
    tau: usize,
    block_length: usize,
) -> DetEqProblem {
    let noise = equivalent_noise_over(stats, served);
    let mut v_bar = vec![0.0; stats.n_users()];
    for &k in served {
        v_bar[k] = stats.v_hat[k] / noise.noise_power;
    }
    DetEqProblem {
        v_bar,
        n_antennas,
        tau,
        block_length,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointResult {
    pub t: f64,
    pub iterations: usize,
    /// Last successive-iterate difference.
    pub residual: f64,
    pub tol: f64,
}

/// One application of the fixed-point map.
pub fn fixed_point_map(problem: &DetEqProblem, t: f64) -> f64 {
    let k = problem.n_users() as f64;
    let rho = problem.rho();
    let s: f64 = problem.v_bar.iter().map(|&v| v / (1.0 + rho * v * t)).sum();
    1.0 / (s / k + 1.0 / k)
}

/// Iterates the map from `t = 1` until successive iterates differ by at most `tol`.
pub fn solve_fixed_point(problem: &DetEqProblem, tol: f64, max_iter: usize) -> Result<FixedPointResult> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if problem.n_users() == 0 || problem.n_antennas == 0 {
        return Err(Error::Contract("empty deterministic-equivalent problem".into()));
    }
    if problem.v_bar.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Contract("normalised variances must be finite and non-negative".into()));
    }
    let mut t = 1.0;
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iter {
        let next = fixed_point_map(problem, t);
        residual = (next - t).abs();
        t = next;
        if residual <= tol {
            return Ok(FixedPointResult {
                t,
                iterations: iter,
                residual,
                tol,
            });
        }
    }
    Err(Error::Convergence {
        last: t,
        iterations: max_iter,
        residual,
    })
}

/// Deterministic-equivalent per-user rate in nats.
pub fn det_eq_rate(problem: &DetEqProblem, fp: &FixedPointResult) -> Result<f64> {
    if !(fp.residual <= fp.tol) || !(fp.t > 0.0 && fp.t.is_finite()) {
        return Err(Error::Contract(format!(
            "fixed point not converged (t = {}, residual = {})",
            fp.t, fp.residual
        )));
    }
    if problem.tau >= problem.block_length {
        return Ok(0.0);
    }
    let k = problem.n_users() as f64;
    let n = problem.n_antennas as f64;
    let rho = problem.rho();
    let t = fp.t;
    let mut acc = -n * (t / k).ln();
    for &v in &problem.v_bar {
        let x = rho * v * t;
        acc += x.ln_1p() - x / (1.0 + x);
    }
    Ok(data_fraction(problem.tau, problem.block_length) * acc / k)
}

/// Default solver settings used by the experiment layer.
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Solves and evaluates in one step.
pub fn det_eq_rate_of(problem: &DetEqProblem) -> Result<f64> {
    let fp = solve_fixed_point(problem, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    det_eq_rate(problem, &fp)
}
