//! Fast self-checks of the model, receivers and ADMM updates against the
//! independent references in [`crate::oracle`]. Backs the `validate`
//! subcommand; the measurement functions are also reused with larger
//! sample sizes by the acceptance tests.

use crate::admm::{
    admm_detect, precompute_block, t_update, x_update, z_update, AdmmConfig, AdmmState, AdmmVariant,
    ProblemScaling,
};
use crate::linalg::{rel_diff, rel_diff_c, spd_inverse};
use crate::model::{effective_noise, quantize_one_bit, sgn, stack_complex_vector, ChannelBlock, ImpairmentParams};
use crate::oracle::{nonneg_projection_bruteforce, qpsk_projection_bruteforce, CrossMoments, ZSubproblem};
use crate::receivers::{bussgang_with_clamp, make_combiner, ReceiverKind};
use crate::rng::{complex_normal, standard_normal, substream, Purpose, StreamId, SimRng};
use crate::scenario::{draw_block, make_drop, CellConfig, PowerControlConfig};
use crate::{CMatrix, CVector, Complex64, RMatrix, RVector, Result};
use serde::Serialize;

/// Draws a block from the default cell and power-control setup with uniform
/// hardware quality `kappa` and σ² = 2·10⁻¹³.
pub fn random_block(antennas: usize, users: usize, kappa: f64, rng: &mut SimRng) -> Result<ChannelBlock> {
    let drop = make_drop(&CellConfig::default(), &PowerControlConfig::default(), users, rng)?;
    let imp = ImpairmentParams::uniform(kappa, kappa, users, 2e-13)?;
    draw_block(&drop.beta, &drop.p, antennas, &imp, rng)
}

fn instance_rng(seed: u64, instance: u64) -> SimRng {
    substream(seed, StreamId::setup(instance, 0, Purpose::Fading))
}

fn random_signs(n: usize, rng: &mut SimRng) -> RVector {
    RVector::from_fn(n, |_, _| sgn(standard_normal(rng)))
}

fn random_vector(n: usize, rng: &mut SimRng) -> RVector {
    RVector::from_fn(n, |_, _| standard_normal(rng))
}

/// Worst absolute deviation of each closed-form update from its oracle.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct UpdateOracleErrors {
    pub z: f64,
    pub t: f64,
    pub x: f64,
}

/// Compares the z̃-, t- and x-updates with oracle minimizers of their
/// subproblems on `instances` random blocks with M = 4, K = 2 (2M = 8,
/// 2K = 4), in noise-normalized units.
pub fn update_oracle_errors(instances: u64, seed: u64) -> Result<UpdateOracleErrors> {
    let mut worst = UpdateOracleErrors { z: 0.0, t: 0.0, x: 0.0 };
    for i in 0..instances {
        let mut rng = instance_rng(seed, i);
        let block = random_block(4, 2, 0.98, &mut rng)?;
        let pre = precompute_block(&block, 0.2, ProblemScaling::NoiseNormalized)?;
        let r = random_signs(8, &mut rng);
        let state = AdmmState {
            z_tilde: RVector::zeros(8),
            t: random_vector(8, &mut rng).abs(),
            x: random_vector(4, &mut rng),
            u1: random_vector(8, &mut rng),
            u2: random_vector(4, &mut rng),
        };

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
        let (z_closed, _) = z_update(&pre, &r, &state);
        worst.z = worst.z.max((&z_closed - sub.minimize()).amax());

        let v = random_vector(8, &mut rng) * 2.0;
        let t_closed = v.map(|a| t_update(a, AdmmVariant::Hard));
        worst.t = worst.t.max((t_closed - nonneg_projection_bruteforce(&v)).amax());

        let v = random_vector(4, &mut rng);
        let x_closed = v.map(|a| x_update(a, AdmmVariant::Hard));
        worst.x = worst.x.max((x_closed - qpsk_projection_bruteforce(&v)).amax());
    }
    Ok(worst)
}

/// Largest relative gap between diag(r)·M0·diag(r) and the directly inverted
/// per-symbol system (B̃/ρ + I + ÃᵀÃ)⁻¹ over random (block, r) pairs with
/// 2M = 8.
pub fn sign_refinement_error(instances: u64, seed: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..instances {
        let mut rng = instance_rng(seed ^ 0x5157, i);
        let block = random_block(4, 2, 0.98, &mut rng)?;
        let pre = precompute_block(&block, 0.2, ProblemScaling::NoiseNormalized)?;
        let r = random_signs(8, &mut rng);
        let d = RMatrix::from_diagonal(&r);
        let a_tilde = &pre.a * &d;
        let b_tilde = &d * &pre.b * &d;
        let system = &b_tilde / pre.rho + RMatrix::identity(8, 8) + a_tilde.transpose() * &a_tilde;
        let direct = system
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| crate::Error::singular("per-symbol z-update system"))?;
        worst = worst.max(rel_diff(&(&d * &pre.m0 * &d), &direct));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BussgangStats {
    /// max |Ê[e ỹᴴ]| with ỹ = diag(C_yy)^(−1/2) y.
    pub max_cross_covariance: f64,
    /// Largest deviation of the sample covariance of r̃ from C_r̃r̃, in
    /// standard errors.
    pub max_crr_z_score: f64,
    /// max |diag(C_r̃r̃) − 1|.
    pub crr_diagonal_error: f64,
}

/// Monte-Carlo check of the Bussgang gain and the arcsine law for one random
/// block. `gaussian_symbols` draws s ~ CN(0, I) (the regime in which both
/// are exact); otherwise QPSK symbols are used.
pub fn bussgang_statistics(
    antennas: usize,
    users: usize,
    draws: usize,
    seed: u64,
    clamp_limit: f64,
    gaussian_symbols: bool,
) -> Result<BussgangStats> {
    let mut rng = instance_rng(seed ^ 0xb055, 0);
    let block = random_block(antennas, users, 0.98, &mut rng)?;
    let bg = bussgang_with_clamp(&block, clamp_limit)?;
    let inv_sqrt: Vec<f64> = (0..antennas).map(|m| 1.0 / bg.c_yy[(m, m)].re.sqrt()).collect();

    let mut cross = CrossMoments::new(antennas, antennas);
    let mut crr = CrossMoments::new(antennas, antennas);
    for _ in 0..draws {
        let s = if gaussian_symbols {
            CVector::from_fn(users, |_, _| complex_normal(&mut rng, 1.0))
        } else {
            crate::model::SymbolFrame::random(users, &mut rng).s
        };
        let y = &block.g_eff * s + effective_noise(&block, &mut rng);
        let obs = quantize_one_bit(&stack_complex_vector(&y));
        let e = CVector::from_fn(antennas, |m, _| obs.r_complex[m] - y[m] * bg.f_diag[m]);
        let y_norm = CVector::from_fn(antennas, |m, _| y[m] * inv_sqrt[m]);
        cross.push(&e, &y_norm);
        crr.push(&obs.r_complex, &obs.r_complex);
    }
    let max_cross_covariance = cross.mean().iter().fold(0.0f64, |a, v| a.max(v.norm()));
    let crr_diagonal_error = (0..antennas)
        .map(|m| (bg.c_rr[(m, m)] - Complex64::new(1.0, 0.0)).norm())
        .fold(0.0, f64::max);
    Ok(BussgangStats {
        max_cross_covariance,
        max_crr_z_score: crr.max_z_score(&bg.c_rr, 1e-12),
        crr_diagonal_error,
    })
}

/// Largest deviation, in standard errors, of the sample covariance of μ
/// from Σ over `draws` draws for a random M×K block.
pub fn effective_noise_z_score(antennas: usize, users: usize, draws: usize, seed: u64) -> Result<f64> {
    let mut rng = instance_rng(seed ^ 0x516a, 0);
    let block = random_block(antennas, users, 0.98, &mut rng)?;
    let mut moments = CrossMoments::new(antennas, antennas);
    for _ in 0..draws {
        let mu = effective_noise(&block, &mut rng);
        moments.push(&mu, &mu);
    }
    Ok(moments.max_z_score(&block.sigma, 0.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ValidationOptions {
    /// Tolerance for the update-oracle comparisons.
    pub tolerance: f64,
    pub seed: u64,
    /// Negative-control hook: clamp arcsine arguments to `[−l, l]`.
    pub arcsine_clamp: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            seed: 2024,
            arcsine_clamp: 1.0,
        }
    }
}

fn check(name: &'static str, value: f64, limit: f64, what: &str) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: value < limit,
        detail: format!("{what} = {value:.3e} (limit {limit:.1e})"),
    }
}

fn failed(name: &'static str, err: crate::Error) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: false,
        detail: format!("error: {err}"),
    }
}

/// Runs the fast invariant suite and reports one outcome per check.
pub fn run_validation(opts: &ValidationOptions) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let seed = opts.seed;

    out.push(match structural_errors(seed) {
        Ok(s) => check("sigma-hermitian-psd", s.sigma, 1e-10, "max(asymmetry, −λmin(Σ−σ²I)/σ²)"),
        Err(e) => failed("sigma-hermitian-psd", e),
    });
    out.push(match structural_errors(seed) {
        Ok(s) => check("real-stack-quadratic-form", s.quadratic_form, 1e-12, "relative error of wᴴΣw vs 2·ŵᵀCŵ"),
        Err(e) => failed("real-stack-quadratic-form", e),
    });
    out.push(match structural_errors(seed) {
        Ok(s) => check("ml-estimator-identities", s.estimator, 1e-8, "max(|AH − I|, |BH|/|B|)"),
        Err(e) => failed("ml-estimator-identities", e),
    });
    out.push(match structural_errors(seed) {
        Ok(s) => check("zf-inverts-channel", s.zero_forcing, 1e-8, "|W_ZF G̃ − I|"),
        Err(e) => failed("zf-inverts-channel", e),
    });

    match bussgang_statistics(8, 2, 100_000, seed, opts.arcsine_clamp, true) {
        Ok(b) => {
            out.push(check("bussgang-crr-diagonal", b.crr_diagonal_error, 1e-12, "max |diag C_r̃r̃ − 1|"));
            out.push(check(
                "bussgang-uncorrelated",
                b.max_cross_covariance,
                0.02,
                "max |Ê[e ỹᴴ]| (Gaussian input, M=8, K=2, 1e5 draws)",
            ));
        }
        Err(e) => {
            out.push(failed("bussgang-crr-diagonal", crate::Error::invalid("bussgang", e.to_string())));
            out.push(failed("bussgang-uncorrelated", e));
        }
    }

    out.push(match sign_refinement_error(20, seed) {
        Ok(v) => check("sign-refinement-identity", v, 1e-8, "relative gap to direct inverse"),
        Err(e) => failed("sign-refinement-identity", e),
    });

    match update_oracle_errors(20, seed) {
        Ok(u) => {
            out.push(check("z-update-oracle", u.z, opts.tolerance, "max |z̃ − argmin|"));
            out.push(check("t-update-oracle", u.t, opts.tolerance, "max |t − argmin|"));
            out.push(check("x-update-oracle", u.x, opts.tolerance, "max |x − argmin|"));
        }
        Err(e) => {
            out.push(failed("z-update-oracle", crate::Error::invalid("oracle", e.to_string())));
            out.push(failed("t-update-oracle", crate::Error::invalid("oracle", e.to_string())));
            out.push(failed("x-update-oracle", e));
        }
    }

    out.push(match admm_feasibility(seed) {
        Ok(()) => CheckOutcome {
            name: "admm-iterate-invariants",
            passed: true,
            detail: "hard and soft iterates stayed feasible/in range".into(),
        },
        Err(e) => failed("admm-iterate-invariants", e),
    });
    out
}

struct StructuralErrors {
    sigma: f64,
    quadratic_form: f64,
    estimator: f64,
    zero_forcing: f64,
}

fn structural_errors(seed: u64) -> Result<StructuralErrors> {
    let mut rng = instance_rng(seed ^ 0x57, 0);
    let block = random_block(8, 3, 0.98, &mut rng)?;
    let sigma2 = block.impairments.sigma2;

    let asym = rel_diff_c(&block.sigma, &block.sigma.adjoint());
    let shifted = &block.sigma - CMatrix::identity(8, 8) * Complex64::new(sigma2, 0.0);
    let lambda_min = shifted.symmetric_eigenvalues().min();
    let sigma = asym.max(-lambda_min / sigma2);

    let mut quadratic_form = 0.0f64;
    for _ in 0..10 {
        let w = CVector::from_fn(8, |_, _| complex_normal(&mut rng, 1.0));
        let lhs = (w.adjoint() * &block.sigma * &w)[(0, 0)].re;
        let ws = stack_complex_vector(&w);
        let rhs = (ws.transpose() * &block.c * &ws)[(0, 0)] * 2.0;
        quadratic_form = quadratic_form.max((lhs - rhs).abs() / rhs.abs());
    }

    let pre = precompute_block(&block, 0.2, ProblemScaling::NoiseNormalized)?;
    let h = &block.h * pre.scale;
    let estimator = rel_diff(&(&pre.a * &h), &RMatrix::identity(6, 6))
        .max((&pre.b * &h).amax() / pre.b.amax());
    // M0 must be positive definite.
    spd_inverse(pre.m0.clone(), "M0")?;

    let zf = make_combiner(&block, ReceiverKind::Zf)?;
    let zero_forcing = rel_diff_c(&(&zf.w * &block.g_eff), &CMatrix::identity(3, 3));
    Ok(StructuralErrors {
        sigma,
        quadratic_form,
        estimator,
        zero_forcing,
    })
}

fn admm_feasibility(seed: u64) -> Result<()> {
    let mut rng = instance_rng(seed ^ 0xfea5, 0);
    let block = random_block(16, 4, 0.98, &mut rng)?;
    for variant in [AdmmVariant::Hard, AdmmVariant::Soft] {
        let cfg = AdmmConfig {
            variant,
            check_invariants: true,
            ..AdmmConfig::default()
        };
        let pre = precompute_block(&block, cfg.rho, cfg.scaling)?;
        for _ in 0..10 {
            let frame = crate::model::SymbolFrame::random(4, &mut rng);
            let (_, z) = crate::model::transmit(&block, &frame, &mut rng)?;
            admm_detect(&pre, &quantize_one_bit(&z).r, &cfg, &mut rng)?;
        }
    }
    Ok(())
}
