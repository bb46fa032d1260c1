//! Channel state acquisition: orthogonal pilots, matched filtering, scalar
//! MMSE estimation and one-step linear prediction.
//!
//! Every user's obtained channel has identical variance across antennas, so
//! the tracked statistics are one `(v_hat, v_tilde)` pair per user. The pair
//! always sums to the user's channel power `v` exactly, in floating point
//! as well as analytically (see [`split_error`]).

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::channel::{sample_cn, ChannelState};
use crate::config::UserDrop;
use crate::error::{Error, Result};

/// Rows of the `tau`-point DFT matrix, one per trained user.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix {
    rows: DMatrix<Complex64>,
    tau: usize,
}

impl PilotMatrix {
    pub fn rows(&self) -> &DMatrix<Complex64> {
        &self.rows
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn row(&self, j: usize) -> Vec<Complex64> {
        self.rows.row(j).iter().copied().collect()
    }
}

/// First `n_selected` rows of the `tau x tau` Fourier matrix.
///
/// Zero rows are allowed (nobody trains). Orthogonality `P P^H = tau I` is
/// checked before returning.
pub fn build_pilot_matrix(n_selected: usize, tau: usize) -> Result<PilotMatrix> {
    if n_selected > tau {
        return Err(Error::Capacity {
            requested: n_selected,
            tau,
        });
    }
    let rows = DMatrix::from_fn(n_selected, tau, |k, t| {
        // reduce k*t mod tau first so the phase stays accurate for large tau
        let phase = -2.0 * PI * ((k * t) % tau) as f64 / tau as f64;
        Complex64::from_polar(1.0, phase)
    });
    let gram = &rows * rows.adjoint();
    let tol = 1e-9 * tau.max(1) as f64;
    for i in 0..n_selected {
        for j in 0..n_selected {
            let want = if i == j { tau as f64 } else { 0.0 };
            if (gram[(i, j)] - want).norm() > tol {
                return Err(Error::Contract(format!(
                    "pilot rows {i},{j} not orthogonal for tau = {tau}"
                )));
            }
        }
    }
    Ok(PilotMatrix { rows, tau })
}

/// Received pilot block `Y = H_S X_S + noise`, shape `N x tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingObservation {
    pub y: DMatrix<Complex64>,
}

/// Source of the receiver's additive `CN(0, 1)` noise.
pub trait NoiseSource {
    fn next_noise(&mut self) -> Complex64;
}

/// Unit-variance complex Gaussian noise from an RNG.
pub struct GaussianNoise<'a, R: Rng + ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> NoiseSource for GaussianNoise<'_, R> {
    #[inline]
    fn next_noise(&mut self) -> Complex64 {
        sample_cn(self.0, 1.0)
    }
}

/// Noiseless receiver, for tests.
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn next_noise(&mut self) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
}

/// Simulates one training phase. User `selected[j]` sends pilot row `j`;
/// users outside `selected` stay silent.
///
/// Noise is drawn column by column (channel use by channel use).
pub fn simulate_training<S: NoiseSource + ?Sized>(
    channel: &ChannelState,
    selected: &[usize],
    pilots: &PilotMatrix,
    noise: &mut S,
) -> Result<TrainingObservation> {
    if selected.len() != pilots.n_rows() {
        return Err(Error::Contract(format!(
            "{} selected users but {} pilot rows",
            selected.len(),
            pilots.n_rows()
        )));
    }
    if let Some(&bad) = selected.iter().find(|&&k| k >= channel.n_users()) {
        return Err(Error::Contract(format!("user {bad} out of range")));
    }
    let n = channel.n_antennas();
    let tau = pilots.tau();
    let mut y = DMatrix::zeros(n, tau);
    for t in 0..tau {
        let mut col = y.column_mut(t);
        for (j, &user) in selected.iter().enumerate() {
            let p = pilots.rows[(j, t)];
            let h = channel.h.column(user);
            for i in 0..n {
                col[i] += h[i] * p;
            }
        }
        for i in 0..n {
            col[i] += noise.next_noise();
        }
    }
    Ok(TrainingObservation { y })
}

/// Correlates the observation with one pilot row and scales by `1/sqrt(tau)`,
/// giving `sqrt(tau) h_k + n` with unit-variance noise per antenna.
pub fn matched_filter(obs: &TrainingObservation, pilot_row: &[Complex64], tau: usize) -> Result<DVector<Complex64>> {
    if pilot_row.len() != tau || obs.y.ncols() != tau {
        return Err(Error::Contract(format!(
            "pilot length {} / observation width {} != tau {tau}",
            pilot_row.len(),
            obs.y.ncols()
        )));
    }
    let n = obs.y.nrows();
    let scale = 1.0 / (tau as f64).sqrt();
    let mut r = DVector::zeros(n);
    for (t, p) in pilot_row.iter().enumerate() {
        let pc = p.conj();
        let col = obs.y.column(t);
        for i in 0..n {
            r[i] += col[i] * pc;
        }
    }
    Ok(r * Complex64::new(scale, 0.0))
}

/// Splits channel power `v` into `(obtained, error)` given the error
/// variance, such that `obtained + error == v` holds exactly in `f64`.
///
/// Whichever part is at least `v/2` is formed by subtraction from `v`; the
/// other is then recovered by an exact (Sterbenz) subtraction.
pub fn split_error(v: f64, error: f64) -> (f64, f64) {
    if error <= 0.5 * v {
        let obtained = v - error;
        (obtained, v - obtained)
    } else {
        (v - error, error)
    }
}

/// Same as [`split_error`] but starting from the obtained-channel variance.
pub fn split_obtained(v: f64, obtained: f64) -> (f64, f64) {
    let (e, o) = split_error(v, obtained);
    (o, e)
}

/// Variances after training with `tau` pilots: `(tau v^2/(tau v+1), v/(1+tau v))`.
pub fn trained_variances(v: f64, tau: usize) -> (f64, f64) {
    split_error(v, v / (1.0 + tau as f64 * v))
}

/// Variances after predicting from a previous obtained variance `prev_v_hat`.
pub fn predicted_variances(v: f64, prev_v_hat: f64, c: f64) -> (f64, f64) {
    split_obtained(v, c * c * prev_v_hat)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub h_hat: DVector<Complex64>,
    pub v_hat: f64,
    pub v_tilde: f64,
}

/// Per-entry MMSE estimate of `h` from `r = sqrt(tau) h + n`, prior `CN(0, v)`.
pub fn mmse_estimate(r: &DVector<Complex64>, v: f64, tau: usize) -> Estimate {
    let tau_f = tau as f64;
    let coeff = tau_f.sqrt() * v / (tau_f * v + 1.0);
    let (v_hat, v_tilde) = trained_variances(v, tau);
    Estimate {
        h_hat: r * Complex64::new(coeff, 0.0),
        v_hat,
        v_tilde,
    }
}

/// One-step prediction `h_hat = c h_prev` for a user that did not train.
pub fn predict(prev_h_hat: &DVector<Complex64>, prev_v_hat: f64, v: f64, c: f64) -> Estimate {
    let (v_hat, v_tilde) = predicted_variances(v, prev_v_hat, c);
    Estimate {
        h_hat: prev_h_hat * Complex64::new(c, 0.0),
        v_hat,
        v_tilde,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiSource {
    Trained,
    Predicted,
}

/// Tracked second-order statistics of every user's obtained channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiStats {
    pub v_hat: Vec<f64>,
    pub v_tilde: Vec<f64>,
    pub source: Vec<CsiSource>,
    pub block_index: usize,
}

impl CsiStats {
    /// Statistics after training every user with `tau` pilots in block 0.
    pub fn fully_trained(drop: &UserDrop, tau: usize) -> Self {
        let (v_hat, v_tilde) = drop
            .variances
            .iter()
            .map(|&v| trained_variances(v, tau))
            .unzip();
        Self {
            v_hat,
            v_tilde,
            source: vec![CsiSource::Trained; drop.n_users()],
            block_index: 0,
        }
    }

    pub fn n_users(&self) -> usize {
        self.v_hat.len()
    }

    /// Variance bookkeeping for the next block: trained users restart from
    /// the stationary prior, everyone else is predicted.
    pub fn advance(&self, selected: &[usize], drop: &UserDrop, c: f64, tau: usize) -> Result<Self> {
        let k = self.n_users();
        let mut trained = vec![false; k];
        for &u in selected {
            if u >= k || trained[u] {
                return Err(Error::Contract(format!("invalid or duplicate user {u} in selection")));
            }
            trained[u] = true;
        }
        let mut next = self.clone();
        next.block_index += 1;
        for u in 0..k {
            let v = drop.variances[u];
            let (vh, vt) = if trained[u] {
                next.source[u] = CsiSource::Trained;
                trained_variances(v, tau)
            } else {
                next.source[u] = CsiSource::Predicted;
                predicted_variances(v, self.v_hat[u], c)
            };
            next.v_hat[u] = vh;
            next.v_tilde[u] = vt;
        }
        Ok(next)
    }

    /// Largest `|v_hat + v_tilde - v|` over users.
    pub fn conservation_error(&self, drop: &UserDrop) -> f64 {
        (0..self.n_users())
            .map(|u| (self.v_hat[u] + self.v_tilde[u] - drop.variances[u]).abs())
            .fold(0.0, f64::max)
    }
}

/// Obtained channels (column per user) plus their tracked statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiState {
    pub h_hat: DMatrix<Complex64>,
    pub stats: CsiStats,
}

impl CsiState {
    pub fn n_users(&self) -> usize {
        self.h_hat.ncols()
    }

    pub fn block_index(&self) -> usize {
        self.stats.block_index
    }

    pub fn v_hat(&self, k: usize) -> f64 {
        self.stats.v_hat[k]
    }

    pub fn v_tilde(&self, k: usize) -> f64 {
        self.stats.v_tilde[k]
    }

    pub fn source(&self, k: usize) -> CsiSource {
        self.stats.source[k]
    }
}

/// Block-0 CSI: every user trained, user `k` on pilot row `k`.
pub fn initial_csi(
    obs: &TrainingObservation,
    pilots: &PilotMatrix,
    drop: &UserDrop,
) -> Result<CsiState> {
    let k = drop.n_users();
    if pilots.n_rows() != k {
        return Err(Error::Contract(format!(
            "warm-up needs {k} pilot rows, got {}",
            pilots.n_rows()
        )));
    }
    let tau = pilots.tau();
    let mut h_hat = DMatrix::zeros(obs.y.nrows(), k);
    for u in 0..k {
        let r = matched_filter(obs, &pilots.row(u), tau)?;
        let est = mmse_estimate(&r, drop.variances[u], tau);
        h_hat.set_column(u, &est.h_hat);
    }
    Ok(CsiState {
        h_hat,
        stats: CsiStats::fully_trained(drop, tau),
    })
}

/// Moves CSI one block forward. `selected[j]` trained on pilot row `j`.
pub fn advance_csi(
    prev: &CsiState,
    selected: &[usize],
    obs: &TrainingObservation,
    pilots: &PilotMatrix,
    drop: &UserDrop,
    c: f64,
    tau: usize,
) -> Result<CsiState> {
    if selected.len() != pilots.n_rows() {
        return Err(Error::Contract(format!(
            "{} selected users but {} pilot rows",
            selected.len(),
            pilots.n_rows()
        )));
    }
    if !selected.is_empty() && pilots.tau() != tau {
        return Err(Error::Contract(format!(
            "pilot length {} != tau {tau}",
            pilots.tau()
        )));
    }
    let mut filtered = DMatrix::zeros(prev.h_hat.nrows(), selected.len());
    for j in 0..selected.len() {
        let r = matched_filter(obs, &pilots.row(j), tau)?;
        filtered.set_column(j, &r);
    }
    advance_csi_filtered(prev, selected, &filtered, drop, c, tau)
}

/// [`advance_csi`] from matched-filter outputs already computed; column `j`
/// of `filtered` belongs to `selected[j]`.
pub fn advance_csi_filtered(
    prev: &CsiState,
    selected: &[usize],
    filtered: &DMatrix<Complex64>,
    drop: &UserDrop,
    c: f64,
    tau: usize,
) -> Result<CsiState> {
    if filtered.ncols() != selected.len() || filtered.nrows() != prev.h_hat.nrows() {
        return Err(Error::Contract("filtered observations do not match the selection".into()));
    }
    let stats = prev.stats.advance(selected, drop, c, tau)?;
    let mut h_hat = prev.h_hat.clone();
    let mut is_trained = vec![false; prev.n_users()];
    for (j, &u) in selected.iter().enumerate() {
        let r = filtered.column(j).into_owned();
        let est = mmse_estimate(&r, drop.variances[u], tau);
        h_hat.set_column(u, &est.h_hat);
        is_trained[u] = true;
    }
    for (u, trained) in is_trained.into_iter().enumerate() {
        if !trained {
            let mut col = h_hat.column_mut(u);
            col *= Complex64::new(c, 0.0);
        }
    }
    Ok(CsiState { h_hat, stats })
}

/// Training and matched filtering through FFTs.
///
/// With Fourier pilots, antenna `i`'s received row is the forward DFT of
/// its channel coefficients placed at the users' pilot indices, and
/// correlating with every pilot row is an inverse DFT. This gives the same
/// result as [`simulate_training`] followed by [`matched_filter`] (up to
/// rounding) at `O(N tau log tau)` instead of `O(N tau |S|)`, and consumes
/// the noise source in the same order.
pub struct FourierTrainer {
    tau: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FourierTrainer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierTrainer").field("tau", &self.tau).finish()
    }
}

impl FourierTrainer {
    pub fn new(tau: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            tau,
            forward: planner.plan_fft_forward(tau),
            inverse: planner.plan_fft_inverse(tau),
        }
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Matched-filter outputs `N x |S|`; user `selected[j]` uses pilot row `j`.
    pub fn train_and_filter<S: NoiseSource + ?Sized>(
        &self,
        channel: &ChannelState,
        selected: &[usize],
        noise: &mut S,
    ) -> Result<DMatrix<Complex64>> {
        let tau = self.tau;
        if selected.len() > tau {
            return Err(Error::Capacity {
                requested: selected.len(),
                tau,
            });
        }
        if let Some(&bad) = selected.iter().find(|&&k| k >= channel.n_users()) {
            return Err(Error::Contract(format!("user {bad} out of range")));
        }
        let n = channel.n_antennas();
        let mut out = DMatrix::zeros(n, selected.len());
        if tau == 0 {
            return Ok(out);
        }
        // noise is laid out column-major like the direct simulation
        let mut noise_block = DMatrix::zeros(n, tau);
        for t in 0..tau {
            for i in 0..n {
                noise_block[(i, t)] = noise.next_noise();
            }
        }
        let scale = 1.0 / (tau as f64).sqrt();
        let mut buf = vec![Complex64::new(0.0, 0.0); tau];
        let mut scratch = vec![
            Complex64::new(0.0, 0.0);
            self.forward
                .get_inplace_scratch_len()
                .max(self.inverse.get_inplace_scratch_len())
        ];
        for i in 0..n {
            buf.fill(Complex64::new(0.0, 0.0));
            for (j, &u) in selected.iter().enumerate() {
                buf[j] = channel.h[(i, u)];
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            for (t, y) in buf.iter_mut().enumerate() {
                *y += noise_block[(i, t)];
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            for j in 0..selected.len() {
                out[(i, j)] = buf[j] * scale;
            }
        }
        Ok(out)
    }
}
