//! Hermitian Gram matrices and log-determinants.

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// `I + scale * A^H A` for the columns of `a`.
pub fn identity_plus_column_gram(a: &DMatrix<Complex64>, scale: f64) -> DMatrix<Complex64> {
    let k = a.ncols();
    let mut g = DMatrix::<Complex64>::identity(k, k);
    for j in 0..k {
        let cj = a.column(j);
        for l in j..k {
            let cl = a.column(l);
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, y) in cj.iter().zip(cl.iter()) {
                acc += x.conj() * y;
            }
            let v = acc * scale;
            g[(j, l)] += v;
            if l != j {
                g[(l, j)] += v.conj();
            }
        }
    }
    g
}

/// `I + scale * A A^H`.
pub fn identity_plus_row_gram(a: &DMatrix<Complex64>, scale: f64) -> DMatrix<Complex64> {
    identity_plus_column_gram(&a.adjoint(), scale)
}

/// Log-determinant of a Hermitian positive-definite matrix via Cholesky.
pub fn hpd_log_det(m: DMatrix<Complex64>) -> Result<f64> {
    let n = m.nrows();
    let chol = Cholesky::new(m)
        .ok_or_else(|| Error::Contract("matrix is not Hermitian positive definite".into()))?;
    let l = chol.l_dirty();
    Ok((0..n).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// `log det(I + scale * A A^H)`, evaluated on whichever side is smaller.
///
/// The `N x N` and `K x K` forms are equal by Sylvester's determinant
/// identity.
pub fn log_det_identity_plus(a: &DMatrix<Complex64>, scale: f64) -> Result<f64> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Contract("non-finite matrix entry".into()));
    }
    if a.ncols() == 0 || a.nrows() == 0 {
        return Ok(0.0);
    }
    let g = if a.ncols() <= a.nrows() {
        identity_plus_column_gram(a, scale)
    } else {
        identity_plus_row_gram(a, scale)
    };
    hpd_log_det(g)
}
