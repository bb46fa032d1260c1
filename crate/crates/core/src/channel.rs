//! True channel generation under first-order Gauss-Markov fading.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::UserDrop;
use crate::error::{Error, Result};

/// One draw of `CN(0, variance)`: real and imaginary parts each `N(0, variance/2)`.
#[inline]
pub fn sample_cn<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// The true `N x K` channel of one block. Column `k` belongs to user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub h: DMatrix<Complex64>,
    pub block_index: usize,
}

impl ChannelState {
    pub fn n_antennas(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.h.ncols()
    }
}

/// Stationary draw: every entry of column `k` is `CN(0, v_k)`.
pub fn init_channel<R: Rng + ?Sized>(drop: &UserDrop, n_antennas: usize, rng: &mut R) -> ChannelState {
    let k = drop.n_users();
    let mut h = DMatrix::zeros(n_antennas, k);
    for (col, &v) in drop.variances.iter().enumerate() {
        for row in 0..n_antennas {
            h[(row, col)] = sample_cn(rng, v);
        }
    }
    ChannelState { h, block_index: 0 }
}

/// `h(b) = c h(b-1) + z` with `z ~ CN(0, (1 - c^2) v_k)`.
///
/// Innovations are drawn even when `c = 1` so that the stream position does
/// not depend on `c`; their variance is then exactly zero.
pub fn evolve_channel<R: Rng + ?Sized>(
    prev: &ChannelState,
    c: f64,
    drop: &UserDrop,
    rng: &mut R,
) -> ChannelState {
    let innovation = 1.0 - c * c;
    let mut h = prev.h.clone();
    for (col, &v) in drop.variances.iter().enumerate() {
        let var = innovation * v;
        for row in 0..h.nrows() {
            let z = sample_cn(rng, var);
            h[(row, col)] = h[(row, col)] * c + z;
        }
    }
    ChannelState {
        h,
        block_index: prev.block_index + 1,
    }
}

/// Generates blocks `0..n_blocks` from one stream.
pub fn channel_trajectory<R: Rng + ?Sized>(
    drop: &UserDrop,
    n_antennas: usize,
    n_blocks: usize,
    c: f64,
    rng: &mut R,
) -> Vec<ChannelState> {
    let mut out = Vec::with_capacity(n_blocks);
    if n_blocks == 0 {
        return out;
    }
    out.push(init_channel(drop, n_antennas, rng));
    for _ in 1..n_blocks {
        let next = evolve_channel(out.last().unwrap(), c, drop, rng);
        out.push(next);
    }
    out
}

/// Writes a trajectory as `N, K, J` (u64 little-endian) followed by each
/// block's entries in row-major order as `(re, im)` f64 little-endian pairs.
pub fn write_trajectory<W: Write>(mut w: W, blocks: &[ChannelState]) -> Result<()> {
    let (n, k) = blocks
        .first()
        .map(|b| (b.n_antennas(), b.n_users()))
        .unwrap_or((0, 0));
    for dim in [n, k, blocks.len()] {
        w.write_all(&(dim as u64).to_le_bytes())?;
    }
    for b in blocks {
        if b.n_antennas() != n || b.n_users() != k {
            return Err(Error::Contract("trajectory blocks differ in shape".into()));
        }
        for row in 0..n {
            for col in 0..k {
                let z = b.h[(row, col)];
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_trajectory<R: Read>(mut r: R) -> Result<Vec<ChannelState>> {
    let mut word = [0u8; 8];
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        r.read_exact(&mut word)?;
        *d = u64::from_le_bytes(word) as usize;
    }
    let [n, k, j] = dims;
    let mut out = Vec::with_capacity(j);
    for b in 0..j {
        let mut h = DMatrix::zeros(n, k);
        for row in 0..n {
            for col in 0..k {
                r.read_exact(&mut word)?;
                let re = f64::from_le_bytes(word);
                r.read_exact(&mut word)?;
                let im = f64::from_le_bytes(word);
                h[(row, col)] = Complex64::new(re, im);
            }
        }
        out.push(ChannelState { h, block_index: b });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn drop_of(v: &[f64]) -> UserDrop {
        UserDrop::from_variances(v.to_vec())
    }

    #[test]
    fn zero_variance_gives_zero_matrix() {
        let d = drop_of(&[0.0, 0.0, 0.0]);
        let ch = init_channel(&d, 4, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(ch.h.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert_eq!(ch.block_index, 0);
    }

    #[test]
    fn init_variance_and_determinism() {
        let d = drop_of(&[1.0]);
        let n = 100_000;
        let a = init_channel(&d, n, &mut ChaCha8Rng::seed_from_u64(5));
        let b = init_channel(&d, n, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        let var = a.h.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.02, "var = {var}");
    }

    #[test]
    fn static_channel_when_c_is_one() {
        let d = drop_of(&[0.7, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h0 = init_channel(&d, 8, &mut rng);
        let h1 = evolve_channel(&h0, 1.0, &d, &mut rng);
        assert_eq!(h1.h, h0.h);
        assert_eq!(h1.block_index, 1);
        assert_eq!(h1.h.shape(), h0.h.shape());
    }

    #[test]
    fn memoryless_when_c_is_zero() {
        let d = drop_of(&[3.0]);
        let n = 50_000;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h0 = init_channel(&d, n, &mut rng);
        let h1 = evolve_channel(&h0, 0.0, &d, &mut rng);
        let var = h1.h.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        assert!((var / 3.0 - 1.0).abs() < 0.03);
        let cross: Complex64 = h1.h.iter().zip(h0.h.iter()).map(|(a, b)| a * b.conj()).sum();
        assert!((cross / n as f64).norm() < 0.1);
    }

    #[test]
    fn lag_one_autocorrelation() {
        let c = 0.9881;
        let d = drop_of(&[1.0]);
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h0 = init_channel(&d, n, &mut rng);
        let h1 = evolve_channel(&h0, c, &d, &mut rng);
        let num: Complex64 = h1.h.iter().zip(h0.h.iter()).map(|(a, b)| a * b.conj()).sum();
        let den = h0.h.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let rho = num.re / den;
        assert!((rho - c).abs() < 0.005, "rho = {rho}");
        let var1 = h1.h.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        // stationarity: 3 standard errors of an exponential(1) mean
        assert!((var1 - 1.0).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn trajectory_dump_roundtrip() {
        let d = drop_of(&[1.0, 0.25]);
        let traj = channel_trajectory(&d, 3, 4, 0.9, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(traj.len(), 4);
        assert_eq!(traj[3].block_index, 3);
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj).unwrap();
        assert_eq!(buf.len(), 24 + 4 * 3 * 2 * 16);
        // row-major: second complex entry is (row 0, col 1)
        let re = f64::from_le_bytes(buf[40..48].try_into().unwrap());
        assert_eq!(re, traj[0].h[(0, 1)].re);
        assert_eq!(read_trajectory(buf.as_slice()).unwrap(), traj);
    }
}
