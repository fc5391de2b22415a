//! Sign-refined QCQP detector solved by scaled ADMM.
//!
//! With the one-bit signs `r`, the sign-refined variable z̃ = diag(r) z and
//! A = (HᵀC⁻¹H)⁻¹HᵀC⁻¹, the detector solves
//!
//! ```text
//! minimize    z̃ᵀ B̃ z̃
//! subject to  t = z̃,  x = Ã z̃,  t ≥ 0,  x_k² = 1/2
//! ```
//!
//! with Ã = A diag(r) and B̃ = diag(r) B diag(r), B = (I − HA)ᵀC⁻¹(I − HA).
//! Since diag(r)² = I, the z̃-update system matrix factors as
//! diag(r) (B/ρ + I + AᵀA) diag(r), so its inverse is diag(r) M0 diag(r) with
//! M0 computed once per coherence block.

use crate::linalg::{enforce_symmetric, spd_inverse, spd_solve};
use crate::model::{sgn, ChannelBlock, SymbolFrame};
use crate::rng::standard_normal;
use crate::{Error, RMatrix, RVector, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdmmVariant {
    /// Exact projections: max(0, ·) and (1/√2) sgn(·).
    Hard,
    /// Softened projections: softplus and (1/√2) tanh.
    Soft,
}

impl fmt::Display for AdmmVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdmmVariant::Hard => "hard",
            AdmmVariant::Soft => "soft",
        })
    }
}

impl FromStr for AdmmVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hard" => Ok(AdmmVariant::Hard),
            "soft" => Ok(AdmmVariant::Soft),
            _ => Err(Error::invalid("variant", format!("expected `hard` or `soft`, got `{s}`"))),
        }
    }
}

/// Units in which the iterations run.
///
/// The QCQP is invariant under z ↦ c·z (A and B rescale accordingly), but the
/// ADMM iterations are not: the identity term of the z̃-update and the unit
/// scale of the Gaussian initialization fix an absolute scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemScaling {
    /// Raw received-signal units (watts).
    Physical,
    /// z rescaled so that the mean per-antenna effective noise variance
    /// (mean diagonal of Σ) equals one.
    NoiseNormalized,
}

impl FromStr for ProblemScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "physical" => Ok(ProblemScaling::Physical),
            "noise-normalized" => Ok(ProblemScaling::NoiseNormalized),
            _ => Err(Error::invalid(
                "scaling",
                format!("expected `physical` or `noise-normalized`, got `{s}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmConfig {
    /// Augmented-Lagrangian penalty ρ > 0.
    pub rho: f64,
    /// Fixed number of iterations; there is no early stopping.
    pub iterations: usize,
    pub variant: AdmmVariant,
    pub scaling: ProblemScaling,
    /// Verify iterate feasibility/range after every iteration and fail with
    /// [`Error::InvariantViolation`] otherwise.
    pub check_invariants: bool,
    /// Record per-iteration residuals in [`AdmmOutcome::trace`].
    pub record_trace: bool,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho: 0.2,
            iterations: 100,
            variant: AdmmVariant::Soft,
            scaling: ProblemScaling::NoiseNormalized,
            check_invariants: false,
            record_trace: false,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::invalid("admm.rho", format!("must be positive, got {}", self.rho)));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("admm.iterations", "must be at least 1"));
        }
        Ok(())
    }
}

/// ML estimator of x from the unquantized signal: A = (HᵀC⁻¹H)⁻¹HᵀC⁻¹.
pub fn ml_estimator(h: &RMatrix, c: &RMatrix) -> Result<RMatrix> {
    if c.nrows() != h.nrows() || !c.is_square() {
        return Err(Error::dims("ml_estimator: C", h.nrows(), format!("{:?}", c.shape())));
    }
    let cinv_h = spd_solve(c.clone(), h, "noise covariance C")?;
    let mut normal = h.transpose() * &cinv_h;
    enforce_symmetric(&mut normal);
    spd_solve(normal, &cinv_h.transpose(), "normal matrix HᵀC⁻¹H")
}

/// x̂ = (HᵀC⁻¹H)⁻¹HᵀC⁻¹ z for an unquantized stacked observation `z`.
pub fn ml_unquantized(block: &ChannelBlock, z: &RVector) -> Result<RVector> {
    if z.len() != block.h.nrows() {
        return Err(Error::dims("ml_unquantized: z", block.h.nrows(), z.len()));
    }
    Ok(ml_estimator(&block.h, &block.c)? * z)
}

/// Per-block matrices shared by every channel use of the block.
#[derive(Debug, Clone)]
pub struct BlockPrecompute {
    /// A (2K×2M) in solver units.
    pub a: RMatrix,
    /// Sign-free cost kernel B (2M×2M) in solver units.
    pub b: RMatrix,
    /// (B/ρ + I + AᵀA)⁻¹.
    pub m0: RMatrix,
    pub rho: f64,
    /// Solver units are `scale` × physical units of z.
    pub scale: f64,
}

impl BlockPrecompute {
    /// Builds A, B and M0 directly from a real model `z = H x + v`,
    /// v ~ N(0, C), already expressed in solver units.
    pub fn from_real_model(h: &RMatrix, c: &RMatrix, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid("rho", "must be positive"));
        }
        let n = h.nrows();
        let a = ml_estimator(h, c)?;
        let residual = RMatrix::identity(n, n) - h * &a;
        let cinv_residual = spd_solve(c.clone(), &residual, "noise covariance C")?;
        let mut b = residual.transpose() * cinv_residual;
        enforce_symmetric(&mut b);

        let mut system = &b / rho + a.transpose() * &a;
        for i in 0..n {
            system[(i, i)] += 1.0;
        }
        enforce_symmetric(&mut system);
        let mut m0 = spd_inverse(system, "ADMM z-update system B/rho + I + AᵀA")?;
        enforce_symmetric(&mut m0);
        Ok(Self {
            a,
            b,
            m0,
            rho,
            scale: 1.0,
        })
    }

    pub fn antennas2(&self) -> usize {
        self.m0.nrows()
    }

    pub fn users2(&self) -> usize {
        self.a.nrows()
    }
}

/// Computes the once-per-block ADMM matrices for `block`.
pub fn precompute_block(
    block: &ChannelBlock,
    rho: f64,
    scaling: ProblemScaling,
) -> Result<BlockPrecompute> {
    let scale = match scaling {
        ProblemScaling::Physical => 1.0,
        ProblemScaling::NoiseNormalized => {
            let m = block.antennas();
            let mean_var = block.sigma.diagonal().iter().map(|v| v.re).sum::<f64>() / m as f64;
            1.0 / mean_var.sqrt()
        }
    };
    let h = &block.h * scale;
    let c = &block.c * (scale * scale);
    let mut pre = BlockPrecompute::from_real_model(&h, &c, rho)?;
    pre.scale = scale;
    Ok(pre)
}

/// Primal and scaled dual variables for one symbol-vector detection.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub z_tilde: RVector,
    pub t: RVector,
    pub x: RVector,
    pub u1: RVector,
    pub u2: RVector,
}

impl AdmmState {
    /// Zero duals, t = |standard normal|, x = standard normal.
    pub fn initial<R: Rng + ?Sized>(antennas2: usize, users2: usize, rng: &mut R) -> Self {
        let t = RVector::from_fn(antennas2, |_, _| standard_normal(rng).abs());
        let x = RVector::from_fn(users2, |_, _| standard_normal(rng));
        Self {
            z_tilde: RVector::zeros(antennas2),
            t,
            x,
            u1: RVector::zeros(antennas2),
            u2: RVector::zeros(users2),
        }
    }
}

/// Overflow-safe softplus ln(1 + eᵃ).
pub fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

/// t-update: projection of `v = z̃ − u₁` onto the nonnegative orthant (hard)
/// or its softplus surrogate.
pub fn t_update(v: f64, variant: AdmmVariant) -> f64 {
    match variant {
        AdmmVariant::Hard => v.max(0.0),
        AdmmVariant::Soft => softplus(v),
    }
}

/// x-update: projection of `v = Ãz̃ − u₂` onto {±1/√2} (hard) or its tanh
/// surrogate.
pub fn x_update(v: f64, variant: AdmmVariant) -> f64 {
    match variant {
        AdmmVariant::Hard => FRAC_1_SQRT_2 * sgn(v),
        AdmmVariant::Soft => FRAC_1_SQRT_2 * v.tanh(),
    }
}

/// Residuals after one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationResidual {
    /// ‖t − z̃‖.
    pub primal_t: f64,
    /// ‖x − Ãz̃‖.
    pub primal_x: f64,
    /// z̃ᵀB̃z̃.
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    pub x: RVector,
    pub state: AdmmState,
    pub trace: Option<Vec<IterationResidual>>,
}

/// Scratch space reused across iterations.
struct Workspace {
    rhs: RVector,
    w: RVector,
    az: RVector,
    xu: RVector,
}

/// z̃-update via the sign-refinement identity. Leaves the unrefined
/// minimizer w = diag(r) z̃ in `ws.w` and Ãz̃ = A w in `ws.az`.
fn z_update_into(pre: &BlockPrecompute, r: &RVector, state: &mut AdmmState, ws: &mut Workspace) {
    ws.xu.copy_from(&state.x);
    ws.xu += &state.u2;
    for i in 0..r.len() {
        ws.rhs[i] = r[i] * (state.t[i] + state.u1[i]);
    }
    ws.rhs.gemv_tr(1.0, &pre.a, &ws.xu, 1.0);
    ws.w.gemv(1.0, &pre.m0, &ws.rhs, 0.0);
    state.z_tilde.copy_from(&ws.w);
    state.z_tilde.component_mul_assign(r);
    ws.az.gemv(1.0, &pre.a, &ws.w, 0.0);
}

/// The closed-form z̃-update alone, returning (z̃, Ãz̃). Exposed for
/// verification against a direct solve of its subproblem.
pub fn z_update(pre: &BlockPrecompute, r: &RVector, state: &AdmmState) -> (RVector, RVector) {
    let mut s = state.clone();
    let mut ws = Workspace::new(pre);
    z_update_into(pre, r, &mut s, &mut ws);
    (s.z_tilde, ws.az)
}

impl Workspace {
    fn new(pre: &BlockPrecompute) -> Self {
        Self {
            rhs: RVector::zeros(pre.antennas2()),
            w: RVector::zeros(pre.antennas2()),
            az: RVector::zeros(pre.users2()),
            xu: RVector::zeros(pre.users2()),
        }
    }
}

/// Runs the detector on one quantized observation.
///
/// `r` holds the ±1 one-bit outputs; `rng` supplies the initialization.
pub fn admm_detect<R: Rng + ?Sized>(
    pre: &BlockPrecompute,
    r: &RVector,
    cfg: &AdmmConfig,
    rng: &mut R,
) -> Result<AdmmOutcome> {
    cfg.validate()?;
    if (cfg.rho - pre.rho).abs() > f64::EPSILON * pre.rho {
        return Err(Error::invalid(
            "rho",
            format!("config has {}, block was precomputed with {}", cfg.rho, pre.rho),
        ));
    }
    let n = pre.antennas2();
    if r.len() != n {
        return Err(Error::dims("admm_detect: sign vector", n, r.len()));
    }
    if r.iter().any(|v| v.abs() != 1.0) {
        return Err(Error::invalid("r", "entries must be ±1"));
    }
    let state = AdmmState::initial(n, pre.users2(), rng);
    admm_iterate(pre, r, cfg, state)
}

/// Runs `cfg.iterations` ADMM rounds from an explicit starting state.
pub fn admm_iterate(
    pre: &BlockPrecompute,
    r: &RVector,
    cfg: &AdmmConfig,
    mut state: AdmmState,
) -> Result<AdmmOutcome> {
    let mut ws = Workspace::new(pre);
    let mut trace = cfg.record_trace.then(|| Vec::with_capacity(cfg.iterations));

    for iteration in 1..=cfg.iterations {
        z_update_into(pre, r, &mut state, &mut ws);

        for i in 0..state.t.len() {
            let v = state.z_tilde[i] - state.u1[i];
            state.t[i] = t_update(v, cfg.variant);
            if cfg.check_invariants {
                check_t(v, state.t[i], cfg.variant, iteration)?;
            }
        }
        for i in 0..state.x.len() {
            let v = ws.az[i] - state.u2[i];
            state.x[i] = x_update(v, cfg.variant);
            if cfg.check_invariants {
                check_x(v, state.x[i], cfg.variant, iteration)?;
            }
        }

        let (mut res_t, mut res_x) = (0.0, 0.0);
        for i in 0..state.u1.len() {
            let d = state.t[i] - state.z_tilde[i];
            state.u1[i] += d;
            res_t += d * d;
        }
        for i in 0..state.u2.len() {
            let d = state.x[i] - ws.az[i];
            state.u2[i] += d;
            res_x += d * d;
        }
        if !(res_t.is_finite() && res_x.is_finite())
            || !state.u1.iter().chain(state.u2.iter()).all(|v| v.is_finite())
        {
            return Err(Error::Divergence { iteration });
        }

        if let Some(trace) = trace.as_mut() {
            // z̃ᵀB̃z̃ = wᵀBw with w = diag(r) z̃.
            let objective = ws.w.dot(&(&pre.b * &ws.w));
            trace.push(IterationResidual {
                primal_t: res_t.sqrt(),
                primal_x: res_x.sqrt(),
                objective,
            });
        }
    }

    Ok(AdmmOutcome {
        x: state.x.clone(),
        state,
        trace,
    })
}

fn check_t(v: f64, t: f64, variant: AdmmVariant, iteration: usize) -> Result<()> {
    let ok = match variant {
        AdmmVariant::Hard => t >= 0.0,
        // softplus(v) > 0 unless e^v underflows.
        AdmmVariant::Soft => t > 0.0 || (-v.abs()).exp() == 0.0,
    };
    if ok && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvariantViolation {
            iteration,
            detail: format!("{variant} t-update produced {t} from {v}"),
        })
    }
}

fn check_x(v: f64, x: f64, variant: AdmmVariant, iteration: usize) -> Result<()> {
    let ok = match variant {
        AdmmVariant::Hard => x.abs() == FRAC_1_SQRT_2,
        // |tanh| < 1 holds exactly; only within a few ulp of saturation may
        // the scaled value round onto ±1/√2.
        AdmmVariant::Soft => {
            x.abs() < FRAC_1_SQRT_2
                || (x.abs() == FRAC_1_SQRT_2 && v.tanh().abs() > 1.0 - 4.0 * f64::EPSILON)
        }
    };
    if ok && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvariantViolation {
            iteration,
            detail: format!("{variant} x-update produced {x} from {v}"),
        })
    }
}

/// Symbol decisions from the final x (sgn(0) = +1).
pub fn slice_admm(x_final: &RVector) -> Result<SymbolFrame> {
    if !x_final.len().is_multiple_of(2) {
        return Err(Error::dims("slice_admm: x", "even length", x_final.len()));
    }
    if !x_final.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("x_final", "must be finite"));
    }
    Ok(SymbolFrame::from_stacked_signs(x_final))
}
