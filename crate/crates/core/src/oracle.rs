//! Reference computations used to verify the solver: brute-force
//! enumerations, iterative minimizers and Monte-Carlo moment estimators.
//! None of them shares code with the paths they check.

use crate::{CMatrix, CVector, Complex64, RMatrix, RVector};
use std::f64::consts::FRAC_1_SQRT_2;

/// argmin ‖t − v‖² over t ≥ 0 by enumerating every active set.
pub fn nonneg_projection_bruteforce(v: &RVector) -> RVector {
    let n = v.len();
    assert!(n <= 20, "enumeration over 2^{n} active sets");
    let mut best = (f64::INFINITY, RVector::zeros(n));
    for mask in 0u32..(1 << n) {
        let cand = RVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { 0.0 } else { v[i] });
        if cand.iter().any(|c| *c < 0.0) {
            continue;
        }
        let cost = (&cand - v).norm_squared();
        if cost < best.0 {
            best = (cost, cand);
        }
    }
    best.1
}

/// argmin ‖x − v‖² over x ∈ {±1/√2}ⁿ by enumerating all sign patterns.
pub fn qpsk_projection_bruteforce(v: &RVector) -> RVector {
    let n = v.len();
    assert!(n <= 20, "enumeration over 2^{n} sign patterns");
    let mut best = (f64::INFINITY, RVector::zeros(n));
    for mask in 0u32..(1 << n) {
        let cand = RVector::from_fn(n, |i, _| {
            if mask >> i & 1 == 1 {
                -FRAC_1_SQRT_2
            } else {
                FRAC_1_SQRT_2
            }
        });
        let cost = (&cand - v).norm_squared();
        if cost < best.0 {
            best = (cost, cand);
        }
    }
    best.1
}

/// Nearest of the four QPSK points by explicit distance comparison.
pub fn qpsk_min_distance(v: Complex64) -> Complex64 {
    let pts = [
        Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
        Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    ];
    pts.into_iter()
        .min_by(|a, b| (a - v).norm_sqr().total_cmp(&(b - v).norm_sqr()))
        .expect("four points")
}

/// Minimizes ½ uᵀ Q u − bᵀu for symmetric positive-definite Q by conjugate
/// gradients, where `apply` computes Q·u.
pub fn conjugate_gradient(apply: impl Fn(&RVector) -> RVector, b: &RVector, max_iter: usize) -> RVector {
    let mut u = RVector::zeros(b.len());
    let mut res = b.clone();
    let mut dir = res.clone();
    let mut rr = res.norm_squared();
    let stop = 1e-30 * b.norm_squared().max(f64::MIN_POSITIVE);
    for _ in 0..max_iter {
        if rr <= stop {
            break;
        }
        let qd = apply(&dir);
        let alpha = rr / dir.dot(&qd);
        u.axpy(alpha, &dir, 1.0);
        res.axpy(-alpha, &qd, 1.0);
        let rr_new = res.norm_squared();
        dir = &res + &dir * (rr_new / rr);
        rr = rr_new;
    }
    u
}

/// Explicit sign-refined subproblem data for the z̃-update.
pub struct ZSubproblem<'a> {
    pub b_tilde: &'a RMatrix,
    pub a_tilde: &'a RMatrix,
    pub rho: f64,
    pub t: &'a RVector,
    pub u1: &'a RVector,
    pub x: &'a RVector,
    pub u2: &'a RVector,
}

impl ZSubproblem<'_> {
    /// z̃ᵀB̃z̃ + ρ‖t − z̃ + u₁‖² + ρ‖x − Ãz̃ + u₂‖².
    pub fn objective(&self, z: &RVector) -> f64 {
        z.dot(&(self.b_tilde * z))
            + self.rho * (self.t - z + self.u1).norm_squared()
            + self.rho * (self.x - self.a_tilde * z + self.u2).norm_squared()
    }

    pub fn gradient(&self, z: &RVector) -> RVector {
        self.b_tilde * z * 2.0
            - (self.t - z + self.u1) * (2.0 * self.rho)
            - self.a_tilde.transpose() * (self.x - self.a_tilde * z + self.u2) * (2.0 * self.rho)
    }

    /// Minimizer by conjugate gradients on the normal equations, applying the
    /// Hessian through B̃ and Ã (no precomputed inverse).
    pub fn minimize(&self) -> RVector {
        let rhs = (self.t + self.u1 + self.a_tilde.transpose() * (self.x + self.u2)) * self.rho;
        let apply = |v: &RVector| {
            self.b_tilde * v + v * self.rho + self.a_tilde.transpose() * (self.a_tilde * v) * self.rho
        };
        // Two passes of n steps absorb rounding in ill-conditioned cases.
        let first = conjugate_gradient(apply, &rhs, 4 * rhs.len());
        let correction = conjugate_gradient(apply, &(&rhs - apply(&first)), 4 * rhs.len());
        first + correction
    }
}

/// Running first and second moments of xᵢ x̄ⱼ (or xᵢ ȳⱼ) for Monte-Carlo
/// covariance checks with per-entry standard errors.
#[derive(Debug, Clone)]
pub struct CrossMoments {
    n: usize,
    sum: CMatrix,
    sq_re: RMatrix,
    sq_im: RMatrix,
}

impl CrossMoments {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            n: 0,
            sum: CMatrix::zeros(rows, cols),
            sq_re: RMatrix::zeros(rows, cols),
            sq_im: RMatrix::zeros(rows, cols),
        }
    }

    pub fn push(&mut self, a: &CVector, b: &CVector) {
        self.n += 1;
        for j in 0..b.len() {
            let bj = b[j].conj();
            for i in 0..a.len() {
                let v = a[i] * bj;
                self.sum[(i, j)] += v;
                self.sq_re[(i, j)] += v.re * v.re;
                self.sq_im[(i, j)] += v.im * v.im;
            }
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    /// Sample mean of a bᴴ.
    pub fn mean(&self) -> CMatrix {
        &self.sum / Complex64::new(self.n as f64, 0.0)
    }

    /// Standard errors of the real and imaginary parts of [`Self::mean`].
    pub fn standard_errors(&self) -> (RMatrix, RMatrix) {
        let n = self.n as f64;
        let mean = self.mean();
        let se = |sq: &RMatrix, part: &dyn Fn(Complex64) -> f64| {
            RMatrix::from_fn(sq.nrows(), sq.ncols(), |i, j| {
                let m = part(mean[(i, j)]);
                ((sq[(i, j)] / n - m * m).max(0.0) / (n - 1.0)).sqrt()
            })
        };
        (se(&self.sq_re, &|c| c.re), se(&self.sq_im, &|c| c.im))
    }

    /// Largest |mean − expected| in units of the standard error, over real and
    /// imaginary parts. Entries with zero standard error must match exactly
    /// (up to `exact_tol`).
    pub fn max_z_score(&self, expected: &CMatrix, exact_tol: f64) -> f64 {
        let mean = self.mean();
        let (se_re, se_im) = self.standard_errors();
        let mut worst = 0.0f64;
        for i in 0..mean.nrows() {
            for j in 0..mean.ncols() {
                let d = mean[(i, j)] - expected[(i, j)];
                for (dev, se) in [(d.re.abs(), se_re[(i, j)]), (d.im.abs(), se_im[(i, j)])] {
                    let z = if se > 0.0 {
                        dev / se
                    } else if dev <= exact_tol {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    worst = worst.max(z);
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projections_by_enumeration() {
        let v = RVector::from_vec(vec![-0.5, 2.0, 0.0]);
        assert_eq!(nonneg_projection_bruteforce(&v).as_slice(), &[0.0, 2.0, 0.0]);
        let v = RVector::from_vec(vec![0.3, -0.01]);
        assert_eq!(qpsk_projection_bruteforce(&v).as_slice(), &[FRAC_1_SQRT_2, -FRAC_1_SQRT_2]);
    }

    #[test]
    fn cg_solves_spd_system() {
        let q = RMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let b = RVector::from_vec(vec![1.0, -2.0, 0.5]);
        let u = conjugate_gradient(|v| &q * v, &b, 10);
        assert!((&q * u - b).amax() < 1e-12);
    }

    #[test]
    fn cross_moments_of_constant_vectors() {
        let mut m = CrossMoments::new(2, 2);
        let a = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]);
        for _ in 0..10 {
            m.push(&a, &a);
        }
        let expected = &a * a.adjoint();
        assert_eq!(m.max_z_score(&expected, 1e-15), 0.0);
    }
}
