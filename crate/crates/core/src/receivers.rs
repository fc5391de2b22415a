//! Linear receivers applied to the one-bit observation r̃.
//!
//! Quantization-unaware combiners (MRC, ZF, MMSE) account for the hardware
//! impairments through Σ but ignore the quantizer. The Bussgang-aware
//! variants (BMRC, BZF, BMMSE) model r̃ = F y + e with the Bussgang gain F and
//! the arcsine-law covariance of r̃.

use crate::linalg::hpd_solve;
use crate::model::{ChannelBlock, SymbolFrame};
use crate::{CMatrix, CVector, Complex64, Error, RVector, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

/// Diagonal loading added to C_r̃r̃ before the BMMSE solve.
pub const BMMSE_JITTER: f64 = 1e-12;

/// Largest tolerated overshoot of a normalized correlation past ±1.
pub const MAX_ARCSINE_OVERSHOOT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReceiverKind {
    Mrc,
    Zf,
    Mmse,
    Bmrc,
    Bzf,
    Bmmse,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 6] = [
        ReceiverKind::Mrc,
        ReceiverKind::Zf,
        ReceiverKind::Mmse,
        ReceiverKind::Bmrc,
        ReceiverKind::Bzf,
        ReceiverKind::Bmmse,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ReceiverKind::Mrc => "MRC",
            ReceiverKind::Zf => "ZF",
            ReceiverKind::Mmse => "MMSE",
            ReceiverKind::Bmrc => "BMRC",
            ReceiverKind::Bzf => "BZF",
            ReceiverKind::Bmmse => "BMMSE",
        }
    }

    pub fn is_bussgang(self) -> bool {
        matches!(self, ReceiverKind::Bmrc | ReceiverKind::Bzf | ReceiverKind::Bmmse)
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ReceiverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReceiverKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid("receiver", format!("unknown receiver `{s}`")))
    }
}

/// Second-order statistics of the one-bit quantizer for one block.
#[derive(Debug, Clone)]
pub struct BussgangData {
    /// Diagonal of the Bussgang gain F = √(2/π) diag(C_yy)^(−1/2).
    pub f_diag: RVector,
    /// C_yy = G̃G̃ᴴ + Σ.
    pub c_yy: CMatrix,
    /// Arcsine-law covariance of r̃.
    pub c_rr: CMatrix,
}

impl BussgangData {
    pub fn f_matrix(&self) -> CMatrix {
        CMatrix::from_diagonal(&self.f_diag.map(|v| Complex64::new(v, 0.0)))
    }

    /// F G̃ (row `m` of G̃ scaled by F_mm).
    fn scaled_channel(&self, g_eff: &CMatrix) -> CMatrix {
        let mut fg = g_eff.clone();
        for (m, mut row) in fg.row_iter_mut().enumerate() {
            row *= Complex64::new(self.f_diag[m], 0.0);
        }
        fg
    }
}

pub fn bussgang(block: &ChannelBlock) -> Result<BussgangData> {
    bussgang_with_clamp(block, 1.0)
}

/// [`bussgang`] with the arcsine arguments clamped to `[−limit, limit]`.
/// `limit = 1` is the only correct setting; other values exist so the
/// validation suite can run a negative control.
pub fn bussgang_with_clamp(block: &ChannelBlock, limit: f64) -> Result<BussgangData> {
    let mut c_yy = &block.g_eff * block.g_eff.adjoint() + &block.sigma;
    crate::linalg::enforce_hermitian(&mut c_yy);
    let m = c_yy.nrows();

    let mut inv_sqrt = RVector::zeros(m);
    for i in 0..m {
        let d = c_yy[(i, i)].re;
        if d.is_nan() || d <= 0.0 {
            return Err(Error::invalid(
                "C_yy",
                format!("diagonal entry {i} is not positive ({d})"),
            ));
        }
        inv_sqrt[i] = 1.0 / d.sqrt();
    }
    let f_diag = inv_sqrt.map(|v| (2.0 / PI).sqrt() * v);

    let arcsine = |rho: f64| -> f64 {
        debug_assert!(
            rho.abs() <= 1.0 + MAX_ARCSINE_OVERSHOOT,
            "normalized correlation {rho} overshoots ±1"
        );
        (2.0 / PI) * rho.clamp(-limit, limit).asin()
    };
    let c_rr = CMatrix::from_fn(m, m, |i, j| {
        if i == j {
            // Unit self-correlation by definition; asin is too steep at 1 to
            // evaluate it from the rounded normalization.
            Complex64::new(arcsine(1.0), 0.0)
        } else {
            let rho = c_yy[(i, j)] * (inv_sqrt[i] * inv_sqrt[j]);
            Complex64::new(arcsine(rho.re), arcsine(rho.im))
        }
    });
    Ok(BussgangData { f_diag, c_yy, c_rr })
}

/// Receive combining matrix W (K×M); user k's statistic is (W r̃)ₖ.
#[derive(Debug, Clone)]
pub struct CombinerMatrix {
    pub w: CMatrix,
    pub kind: ReceiverKind,
}

/// Builds the combiner of `kind`, computing the Bussgang statistics if needed.
pub fn make_combiner(block: &ChannelBlock, kind: ReceiverKind) -> Result<CombinerMatrix> {
    if kind.is_bussgang() {
        let bg = bussgang(block)?;
        make_combiner_with(block, kind, &bg)
    } else {
        make_combiner_with(block, kind, &BussgangData::empty())
    }
}

impl BussgangData {
    pub(crate) fn empty() -> Self {
        Self {
            f_diag: RVector::zeros(0),
            c_yy: CMatrix::zeros(0, 0),
            c_rr: CMatrix::zeros(0, 0),
        }
    }
}

/// Builds the combiner of `kind` reusing precomputed Bussgang statistics.
pub fn make_combiner_with(
    block: &ChannelBlock,
    kind: ReceiverKind,
    bg: &BussgangData,
) -> Result<CombinerMatrix> {
    let g = &block.g_eff;
    if kind.is_bussgang() && bg.f_diag.len() != block.antennas() {
        return Err(Error::dims("make_combiner: Bussgang data", block.antennas(), bg.f_diag.len()));
    }
    let w = match kind {
        ReceiverKind::Mrc => g.adjoint(),
        ReceiverKind::Zf => zero_forcing(g, "ZF Gram matrix G̃ᴴG̃")?,
        ReceiverKind::Mmse => {
            let c_yy = g * g.adjoint() + &block.sigma;
            hpd_solve(c_yy, g, "MMSE covariance G̃G̃ᴴ + Σ")?.adjoint()
        }
        ReceiverKind::Bmrc => bg.scaled_channel(g).adjoint(),
        ReceiverKind::Bzf => zero_forcing(&bg.scaled_channel(g), "BZF Gram matrix G̃ᴴFᴴFG̃")?,
        ReceiverKind::Bmmse => {
            let m = block.antennas();
            let loaded = &bg.c_rr + CMatrix::identity(m, m) * Complex64::new(BMMSE_JITTER, 0.0);
            hpd_solve(loaded, &bg.scaled_channel(g), "BMMSE covariance C_r̃r̃")?.adjoint()
        }
    };
    Ok(CombinerMatrix { w, kind })
}

/// (AᴴA)⁻¹Aᴴ via a Hermitian solve on the Gram matrix.
fn zero_forcing(a: &CMatrix, what: &str) -> Result<CMatrix> {
    let gram = a.adjoint() * a;
    if !gram_is_well_conditioned(&gram) {
        return Err(Error::singular(what));
    }
    hpd_solve(gram, &a.adjoint(), what)
}

/// Rejects Gram matrices whose eigenvalue spread exceeds what a double can
/// resolve.
fn gram_is_well_conditioned(gram: &CMatrix) -> bool {
    let eig = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    lo > hi * 1e-14 && lo > 0.0
}

/// Nearest QPSK point (±1 ± j)/√2 to `v`, with sgn(0) = +1 per component.
pub fn slice_qpsk(v: Complex64) -> Complex64 {
    Complex64::new(
        crate::model::sgn(v.re) * FRAC_1_SQRT_2,
        crate::model::sgn(v.im) * FRAC_1_SQRT_2,
    )
}

/// Applies W to r̃ and slices each user's statistic to QPSK.
pub fn detect_linear(comb: &CombinerMatrix, r_complex: &CVector) -> Result<SymbolFrame> {
    if comb.w.ncols() != r_complex.len() {
        return Err(Error::dims("detect_linear: observation", comb.w.ncols(), r_complex.len()));
    }
    let processed = &comb.w * r_complex;
    Ok(slice_processed(&processed))
}

/// Sign-slices a vector of processed statistics into a frame.
pub fn slice_processed(processed: &CVector) -> SymbolFrame {
    let k = processed.len();
    let stacked = RVector::from_fn(2 * k, |i, _| {
        if i < k {
            processed[i].re
        } else {
            processed[i - k].im
        }
    });
    SymbolFrame::from_stacked_signs(&stacked)
}
