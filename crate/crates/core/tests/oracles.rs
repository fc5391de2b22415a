//! Monte-Carlo and numerical-optimization oracles for the model and the
//! detectors.

use onebit_mimo::admm::{ml_unquantized, precompute_block, z_update, AdmmState, ProblemScaling};
use onebit_mimo::model::{sgn, transmit, SymbolFrame};
use onebit_mimo::oracle::{conjugate_gradient, qpsk_min_distance, CrossMoments, ZSubproblem};
use onebit_mimo::receivers::{slice_processed, slice_qpsk};
use onebit_mimo::rng::{complex_normal, standard_normal, substream, Purpose, StreamId, SimRng};
use onebit_mimo::validate::random_block;
use onebit_mimo::{CVector, RMatrix, RVector};

fn rng(seed: u64) -> SimRng {
    substream(seed, StreamId::setup(0, 0, Purpose::Fading))
}

fn gaussian(n: usize, rng: &mut SimRng) -> RVector {
    RVector::from_fn(n, |_, _| standard_normal(rng))
}

#[test]
fn received_signal_residual_has_covariance_sigma() {
    let mut rng = rng(11);
    let block = random_block(4, 2, 0.9, &mut rng).unwrap();
    let mut moments = CrossMoments::new(4, 4);
    for _ in 0..200_000 {
        let frame = SymbolFrame::random(2, &mut rng);
        let (y, _) = transmit(&block, &frame, &mut rng).unwrap();
        let residual: CVector = y - &block.g_eff * &frame.s;
        moments.push(&residual, &residual);
    }
    // Maximum over 32 real and imaginary entries.
    let z = moments.max_z_score(&block.sigma, 0.0);
    assert!(z <= 4.0, "max z-score {z}");
}

#[test]
fn unquantized_ml_minimizes_the_weighted_residual() {
    // argmin_x (z − Hx)ᵀ C⁻¹ (z − Hx), found by conjugate gradients on the
    // normal equations with C⁻¹ applied through a Cholesky solve.
    let mut rng = rng(12);
    for _ in 0..20 {
        let block = random_block(16, 3, 0.98, &mut rng).unwrap();
        let frame = SymbolFrame::random(3, &mut rng);
        let (_, z) = transmit(&block, &frame, &mut rng).unwrap();
        let scale = block.c.diagonal().mean();
        let c = &block.c / scale;
        let chol = c.clone().cholesky().unwrap();
        let h = &block.h;
        let rhs = h.transpose() * chol.solve(&(&z / scale.sqrt()));
        let apply = |v: &RVector| h.transpose() * chol.solve(&(h * v));
        let first = conjugate_gradient(apply, &rhs, 200);
        let x_cg = (&first + conjugate_gradient(apply, &(&rhs - apply(&first)), 200)) * scale.sqrt();

        let x_ml = ml_unquantized(&block, &z).unwrap();
        let rel = (&x_ml - &x_cg).norm() / x_cg.norm();
        assert!(rel < 1e-8, "relative gap {rel}");
    }
}

#[test]
fn z_update_zeroes_the_subproblem_gradient() {
    let mut rng = rng(13);
    for _ in 0..50 {
        let block = random_block(6, 2, 0.98, &mut rng).unwrap();
        let pre = precompute_block(&block, 0.2, ProblemScaling::NoiseNormalized).unwrap();
        let r = RVector::from_fn(12, |_, _| sgn(standard_normal(&mut rng)));
        let state = AdmmState {
            z_tilde: RVector::zeros(12),
            t: gaussian(12, &mut rng).abs(),
            x: gaussian(4, &mut rng),
            u1: gaussian(12, &mut rng),
            u2: gaussian(4, &mut rng),
        };
        let (z, _) = z_update(&pre, &r, &state);
        let d = RMatrix::from_diagonal(&r);
        let a_tilde = &pre.a * &d;
        let b_tilde = &d * &pre.b * &d;
        let sub = ZSubproblem {
            b_tilde: &b_tilde,
            a_tilde: &a_tilde,
            rho: pre.rho,
            t: &state.t,
            u1: &state.u1,
            x: &state.x,
            u2: &state.u2,
        };
        let scale = 1.0 + b_tilde.norm() * z.norm() + sub.gradient(&RVector::zeros(12)).norm();
        let g = sub.gradient(&z).norm();
        assert!(g < 1e-8 * scale, "gradient norm {g} at scale {scale}");
    }
}

#[test]
fn sign_slicing_equals_minimum_distance() {
    let mut rng = rng(14);
    let mut values: Vec<_> = (0..1000).map(|_| complex_normal(&mut rng, 2.0)).collect();
    values.extend([0.0, -0.0].map(|v| onebit_mimo::Complex64::new(v, -v)));
    for v in &values {
        assert_eq!(slice_qpsk(*v), qpsk_min_distance(*v), "at {v}");
    }
    let frame = slice_processed(&CVector::from_vec(values.clone()));
    for (k, v) in values.iter().enumerate() {
        assert_eq!(frame.s[k], slice_qpsk(*v));
    }
}
