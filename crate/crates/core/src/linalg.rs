//! Small dense linear-algebra helpers on top of `nalgebra`.

use crate::{CMatrix, Complex64, Error, RMatrix, Result};
use nalgebra::{Cholesky, Dyn};

/// Replaces `m` by (m + mᴴ)/2 and returns the asymmetry removed, relative to
/// the largest entry magnitude.
pub fn enforce_hermitian(m: &mut CMatrix) -> f64 {
    let scale = max_abs_c(m).max(f64::MIN_POSITIVE);
    let mut asym = 0.0f64;
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            let a = m[(i, j)];
            let b = m[(j, i)].conj();
            asym = asym.max((a - b).norm());
            let avg = (a + b) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    asym / scale
}

/// Real counterpart of [`enforce_hermitian`].
pub fn enforce_symmetric(m: &mut RMatrix) -> f64 {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let mut asym = 0.0f64;
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let a = m[(i, j)];
            let b = m[(j, i)];
            asym = asym.max((a - b).abs());
            let avg = 0.5 * (a + b);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    asym / scale
}

/// Real embedding `[[Re X, −Im X], [Im X, Re X]]` of a complex matrix.
pub fn real_embedding(x: &CMatrix) -> RMatrix {
    let (r, c) = x.shape();
    RMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let v = x[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    })
}

pub fn max_abs_c(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.norm()))
}

/// max |a − b| / max(max |b|, tiny), entrywise.
pub fn rel_diff(a: &RMatrix, b: &RMatrix) -> f64 {
    let scale = b.amax().max(f64::MIN_POSITIVE);
    (a - b).amax() / scale
}

pub fn rel_diff_c(a: &CMatrix, b: &CMatrix) -> f64 {
    let scale = max_abs_c(b).max(f64::MIN_POSITIVE);
    max_abs_c(&(a - b)) / scale
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(m: RMatrix, what: &str) -> Result<RMatrix> {
    let chol = Cholesky::new(m).ok_or_else(|| Error::singular(what))?;
    let inv = chol.inverse();
    if inv.iter().all(|v| v.is_finite()) {
        Ok(inv)
    } else {
        Err(Error::singular(what))
    }
}

/// Solves `a · X = b` for a symmetric positive-definite `a`.
pub fn spd_solve(a: RMatrix, b: &RMatrix, what: &str) -> Result<RMatrix> {
    let chol = Cholesky::new(a).ok_or_else(|| Error::singular(what))?;
    finite_or_singular(chol.solve(b), what)
}

/// Solves `a · X = b` for a Hermitian positive-definite `a`, falling back to
/// LU when the Cholesky factorization breaks down numerically.
pub fn hpd_solve(a: CMatrix, b: &CMatrix, what: &str) -> Result<CMatrix> {
    if let Some(chol) = Cholesky::<Complex64, Dyn>::new(a.clone()) {
        let x = chol.solve(b);
        if x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Ok(x);
        }
    }
    let x = a.lu().solve(b).ok_or_else(|| Error::singular(what))?;
    if x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(x)
    } else {
        Err(Error::singular(what))
    }
}

fn finite_or_singular(x: RMatrix, what: &str) -> Result<RMatrix> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::singular(what))
    }
}
