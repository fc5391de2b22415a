//! System model: impaired uplink signal, effective-noise covariance, real
//! stacking and one-bit quantization.
//!
//! The received signal at the base station is
//!
//! ```text
//! y = √κʳ Σₖ gₖ (√(κᵗₖ pₖ) sₖ + ηᵗₖ) + ηʳ + n  =  G̃ s + μ
//! ```
//!
//! where the effective noise μ is conditionally CN(0, Σ) given the channels.

use crate::linalg::{enforce_hermitian, enforce_symmetric, real_embedding};
use crate::rng::complex_normal;
use crate::{CMatrix, CVector, Complex64, Error, RMatrix, RVector, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

/// Largest relative asymmetry tolerated before the Hermitian clean-up step.
const MAX_ASYMMETRY: f64 = 1e-12;

/// Hardware quality coefficients and thermal noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpairmentParams {
    /// Base-station hardware quality κʳ ∈ (0, 1].
    pub kappa_r: f64,
    /// Per-user transmitter quality κᵗₖ ∈ (0, 1].
    pub kappa_t: Vec<f64>,
    /// Thermal noise variance σ² in watts.
    pub sigma2: f64,
}

impl ImpairmentParams {
    pub fn new(kappa_r: f64, kappa_t: Vec<f64>, sigma2: f64) -> Result<Self> {
        let params = Self {
            kappa_r,
            kappa_t,
            sigma2,
        };
        params.validate()?;
        Ok(params)
    }

    /// Same transmitter quality for all `users`.
    pub fn uniform(kappa_r: f64, kappa_t: f64, users: usize, sigma2: f64) -> Result<Self> {
        Self::new(kappa_r, vec![kappa_t; users], sigma2)
    }

    /// Ideal transceivers: κʳ = κᵗₖ = 1.
    pub fn ideal(users: usize, sigma2: f64) -> Result<Self> {
        Self::uniform(1.0, 1.0, users, sigma2)
    }

    pub fn users(&self) -> usize {
        self.kappa_t.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_kappas(self)?;
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::invalid("sigma2", format!("must be positive, got {}", self.sigma2)));
        }
        Ok(())
    }
}

fn check_kappas(imp: &ImpairmentParams) -> Result<()> {
    if !(imp.kappa_r > 0.0 && imp.kappa_r <= 1.0) {
        return Err(Error::invalid("kappa_r", format!("must lie in (0, 1], got {}", imp.kappa_r)));
    }
    if let Some((k, v)) = imp
        .kappa_t
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0 && **v <= 1.0))
    {
        return Err(Error::invalid(format!("kappa_t[{k}]"), format!("must lie in (0, 1], got {v}")));
    }
    Ok(())
}

/// Σ = κʳ Σₖ (1 − κᵗₖ) pₖ gₖ gₖᴴ + D, with D diagonal and
/// D_mm = (1 − κʳ) Σₖ pₖ |g_km|² + σ².
///
/// Only the κ ranges and σ² ≥ 0 are checked here, so that the noiseless
/// limit can be evaluated; with σ² > 0 the result is positive definite.
pub fn build_sigma(g: &CMatrix, p: &[f64], imp: &ImpairmentParams) -> Result<CMatrix> {
    let (m, k) = g.shape();
    if p.len() != k {
        return Err(Error::dims("build_sigma: power vector", k, p.len()));
    }
    if imp.users() != k {
        return Err(Error::dims("build_sigma: kappa_t", k, imp.users()));
    }
    check_kappas(imp)?;
    if imp.sigma2.is_nan() || imp.sigma2 < 0.0 {
        return Err(Error::invalid("sigma2", "must be non-negative"));
    }

    let mut sigma = CMatrix::zeros(m, m);
    for (user, col) in g.column_iter().enumerate() {
        let w = imp.kappa_r * (1.0 - imp.kappa_t[user]) * p[user];
        if w != 0.0 {
            sigma.gerc(Complex64::new(w, 0.0), &col, &col, Complex64::new(1.0, 0.0));
        }
    }
    for ant in 0..m {
        let rx_power: f64 = (0..k).map(|u| p[u] * g[(ant, u)].norm_sqr()).sum();
        sigma[(ant, ant)] += Complex64::new((1.0 - imp.kappa_r) * rx_power + imp.sigma2, 0.0);
    }
    let asym = enforce_hermitian(&mut sigma);
    debug_assert!(asym < MAX_ASYMMETRY, "Sigma asymmetry {asym}");
    Ok(sigma)
}

/// Real-valued model `z = H x + v`: H = [[Re G̃, −Im G̃], [Im G̃, Re G̃]] and
/// C = ½ [[Re Σ, −Im Σ], [Im Σ, Re Σ]].
pub fn real_stack(g_eff: &CMatrix, sigma: &CMatrix) -> Result<(RMatrix, RMatrix)> {
    let m = g_eff.nrows();
    if sigma.shape() != (m, m) {
        return Err(Error::dims("real_stack: Sigma", format!("{m}x{m}"), format!("{:?}", sigma.shape())));
    }
    let h = real_embedding(g_eff);
    let mut c = real_embedding(sigma) * 0.5;
    let asym = enforce_symmetric(&mut c);
    debug_assert!(asym < MAX_ASYMMETRY, "C asymmetry {asym}");
    Ok((h, c))
}

/// One coherence block: channels, powers and every derived covariance.
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct ChannelBlock {
    /// Raw channels, M×K with gₖ as columns.
    pub g: CMatrix,
    /// Transmit powers in watts.
    pub p: Vec<f64>,
    /// Effective channel G̃ with columns √(κʳκᵗₖpₖ) gₖ.
    pub g_eff: CMatrix,
    /// Effective-noise covariance Σ (M×M, Hermitian positive definite).
    pub sigma: CMatrix,
    /// Real stacked channel (2M×2K).
    pub h: RMatrix,
    /// Real noise covariance (2M×2M).
    pub c: RMatrix,
    pub impairments: ImpairmentParams,
}

impl ChannelBlock {
    pub fn new(g: CMatrix, p: Vec<f64>, impairments: ImpairmentParams) -> Result<Self> {
        impairments.validate()?;
        let k = g.ncols();
        if p.len() != k {
            return Err(Error::dims("ChannelBlock: power vector", k, p.len()));
        }
        if let Some(bad) = p.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("p", format!("powers must be positive, got {bad}")));
        }
        let sigma = build_sigma(&g, &p, &impairments)?;
        let mut g_eff = g.clone();
        for (user, mut col) in g_eff.column_iter_mut().enumerate() {
            col *= Complex64::new(
                (impairments.kappa_r * impairments.kappa_t[user] * p[user]).sqrt(),
                0.0,
            );
        }
        let (h, c) = real_stack(&g_eff, &sigma)?;
        Ok(Self {
            g,
            p,
            g_eff,
            sigma,
            h,
            c,
            impairments,
        })
    }

    pub fn antennas(&self) -> usize {
        self.g.nrows()
    }

    pub fn users(&self) -> usize {
        self.g.ncols()
    }
}

/// A transmitted (or detected) QPSK symbol vector in complex, stacked-real and
/// bit form. Bit `i` is the sign of `x[i]`: 0 ↔ +1/√2, 1 ↔ −1/√2.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub s: CVector,
    pub x: RVector,
    pub bits: Vec<u8>,
}

impl SymbolFrame {
    /// Builds the frame from 2K bits ordered as `[Re bits; Im bits]`.
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if !bits.len().is_multiple_of(2) {
            return Err(Error::dims("SymbolFrame: bit count", "even", bits.len()));
        }
        if bits.iter().any(|b| *b > 1) {
            return Err(Error::invalid("bits", "entries must be 0 or 1"));
        }
        let k = bits.len() / 2;
        let x = RVector::from_iterator(
            2 * k,
            bits.iter().map(|b| if *b == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 }),
        );
        let s = CVector::from_fn(k, |i, _| Complex64::new(x[i], x[k + i]));
        Ok(Self { s, x, bits })
    }

    /// Hard decision on stacked real values with sgn(0) = +1.
    pub fn from_stacked_signs(values: &RVector) -> Self {
        let bits = values.iter().map(|v| u8::from(*v < 0.0)).collect();
        Self::from_bits(bits).expect("stacked vector has even length by construction")
    }

    pub fn random<R: Rng + ?Sized>(users: usize, rng: &mut R) -> Self {
        let bits = (0..2 * users).map(|_| rng.random_range(0..2u8)).collect();
        Self::from_bits(bits).expect("valid bits")
    }

    pub fn users(&self) -> usize {
        self.s.len()
    }

    /// Number of differing bits for `user` (real and imaginary bit).
    pub fn user_bit_errors(&self, other: &SymbolFrame, user: usize) -> u32 {
        let k = self.users();
        u32::from(self.bits[user] != other.bits[user]) + u32::from(self.bits[k + user] != other.bits[k + user])
    }
}

/// One-bit ADC output: stacked signs `r` and the complex form r̃.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedObservation {
    pub r: RVector,
    pub r_complex: CVector,
}

impl QuantizedObservation {
    pub fn antennas(&self) -> usize {
        self.r_complex.len()
    }
}

/// Elementwise sign with sgn(0) = +1.
pub fn sgn(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Quantizes the stacked real signal `z = [Re y; Im y]`.
pub fn quantize_one_bit(z: &RVector) -> QuantizedObservation {
    let r = z.map(sgn);
    let m = r.len() / 2;
    let r_complex = CVector::from_fn(m, |i, _| {
        Complex64::new(r[i] * FRAC_1_SQRT_2, r[m + i] * FRAC_1_SQRT_2)
    });
    QuantizedObservation { r, r_complex }
}

/// `[Re y; Im y]`.
pub fn stack_complex_vector(y: &CVector) -> RVector {
    let m = y.len();
    RVector::from_fn(2 * m, |i, _| if i < m { y[i].re } else { y[i - m].im })
}

/// Draws the effective noise μ = √κʳ Σₖ gₖ ηᵗₖ + ηʳ + n, which is
/// conditionally CN(0, Σ) given the channels.
pub fn effective_noise<R: Rng + ?Sized>(block: &ChannelBlock, rng: &mut R) -> CVector {
    let (m, k) = block.g.shape();
    let imp = &block.impairments;
    let eta_t = CVector::from_fn(k, |u, _| complex_normal(rng, (1.0 - imp.kappa_t[u]) * block.p[u]));
    let mut mu = &block.g * eta_t * Complex64::new(imp.kappa_r.sqrt(), 0.0);
    for ant in 0..m {
        let rx_power: f64 = (0..k).map(|u| block.p[u] * block.g[(ant, u)].norm_sqr()).sum();
        let eta_r = complex_normal(rng, (1.0 - imp.kappa_r) * rx_power);
        let noise = complex_normal(rng, imp.sigma2);
        mu[ant] += eta_r + noise;
    }
    mu
}

/// Draws one channel use of the impaired uplink, y = G̃ s + μ. Returns the
/// complex received vector `y` and its stacked form `z`.
pub fn transmit<R: Rng + ?Sized>(
    block: &ChannelBlock,
    frame: &SymbolFrame,
    rng: &mut R,
) -> Result<(CVector, RVector)> {
    let k = block.users();
    if frame.users() != k {
        return Err(Error::dims("transmit: symbol frame", k, frame.users()));
    }
    let y = &block.g_eff * &frame.s + effective_noise(block, rng);
    let z = stack_complex_vector(&y);
    Ok((y, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Purpose, StreamId};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_block(m: usize, k: usize, kappa: f64, seed: u64) -> ChannelBlock {
        let mut rng = substream(seed, StreamId::setup(0, 0, Purpose::Fading));
        let g = CMatrix::from_fn(m, k, |_, _| complex_normal(&mut rng, 1.0));
        let p = (0..k).map(|u| 0.5 + u as f64).collect();
        ChannelBlock::new(g, p, ImpairmentParams::uniform(kappa, kappa, k, 0.1).unwrap()).unwrap()
    }

    #[test]
    fn ideal_hardware_sigma_is_white() {
        let block = random_block(5, 3, 1.0, 1);
        let sigma = build_sigma(&block.g, &block.p, &ImpairmentParams::ideal(3, 2e-13).unwrap()).unwrap();
        assert_eq!(sigma, CMatrix::identity(5, 5) * c(2e-13, 0.0));
    }

    #[test]
    fn scalar_sigma_by_hand() {
        let g = CMatrix::from_element(1, 1, c(1.0, 0.0));
        let imp = ImpairmentParams {
            kappa_r: 0.98,
            kappa_t: vec![0.98],
            sigma2: 0.0,
        };
        let sigma = build_sigma(&g, &[1.0], &imp).unwrap();
        assert!((sigma[(0, 0)].re - 0.0396).abs() < 1e-15);
        assert_eq!(sigma[(0, 0)].im, 0.0);
    }

    #[test]
    fn sigma_is_hermitian_and_dominates_thermal_noise() {
        let block = random_block(6, 3, 0.9, 2);
        let sigma = &block.sigma;
        assert_eq!(sigma, &sigma.adjoint());
        let shifted = sigma - CMatrix::identity(6, 6) * c(block.impairments.sigma2, 0.0);
        let min_eig = shifted.symmetric_eigenvalues().min();
        assert!(min_eig >= -1e-10 * block.impairments.sigma2);
    }

    #[test]
    fn real_stack_scalar_example() {
        let g_eff = CMatrix::from_element(1, 1, c(1.0, 1.0));
        let sigma = CMatrix::from_element(1, 1, c(2.0, 0.0));
        let (h, cov) = real_stack(&g_eff, &sigma).unwrap();
        assert_eq!(h, RMatrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, 1.0]));
        assert_eq!(cov, RMatrix::identity(2, 2));
    }

    #[test]
    fn real_stack_of_real_inputs_has_zero_off_blocks() {
        let g_eff = CMatrix::from_fn(3, 2, |i, j| c(i as f64 + 2.0 * j as f64, 0.0));
        let sigma = CMatrix::from_fn(3, 3, |i, j| c(if i == j { 2.0 } else { 0.5 }, 0.0));
        let (h, cov) = real_stack(&g_eff, &sigma).unwrap();
        assert!(h.view((0, 2), (3, 2)).iter().all(|v| *v == 0.0));
        assert!(h.view((3, 0), (3, 2)).iter().all(|v| *v == 0.0));
        assert!(cov.view((0, 3), (3, 3)).iter().all(|v| *v == 0.0));
        assert!(cov.view((3, 0), (3, 3)).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn quadratic_form_identity() {
        let block = random_block(4, 2, 0.95, 3);
        let mut rng = substream(3, StreamId::setup(1, 0, Purpose::Noise));
        for _ in 0..20 {
            let w = CVector::from_fn(4, |_, _| complex_normal(&mut rng, 1.0));
            let lhs = (w.adjoint() * &block.sigma * &w)[(0, 0)];
            let ws = stack_complex_vector(&w);
            let rhs = (ws.transpose() * (&block.c * 2.0) * &ws)[(0, 0)];
            assert!(lhs.im.abs() < 1e-12 * lhs.re.abs());
            assert!((lhs.re - rhs).abs() < 1e-12 * rhs.abs());
        }
    }

    #[test]
    fn c_is_symmetric_positive_definite() {
        let block = random_block(5, 2, 0.9, 4);
        assert_eq!(block.c, block.c.transpose());
        assert!(block.c.clone().symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn quantizer_examples() {
        let q = quantize_one_bit(&RVector::from_vec(vec![0.3, -1.2]));
        assert_eq!(q.r.as_slice(), &[1.0, -1.0]);
        let q = quantize_one_bit(&RVector::from_vec(vec![0.0, 0.0]));
        assert_eq!(q.r.as_slice(), &[1.0, 1.0]);
        let q = quantize_one_bit(&RVector::from_vec(vec![0.5, -2.0]));
        assert_eq!(q.r_complex[0], c(FRAC_1_SQRT_2, -FRAC_1_SQRT_2));
    }

    #[test]
    fn noiseless_ideal_transmit_reproduces_signal() {
        let mut rng = substream(5, StreamId::setup(0, 0, Purpose::Fading));
        let g = CMatrix::from_fn(6, 2, |_, _| complex_normal(&mut rng, 1.0));
        let block = ChannelBlock::new(g, vec![0.1, 0.05], ImpairmentParams::ideal(2, 1e-30).unwrap()).unwrap();
        let frame = SymbolFrame::random(2, &mut rng);
        let (y, z) = transmit(&block, &frame, &mut rng).unwrap();
        let clean = &block.g_eff * &frame.s;
        for (a, b) in y.iter().zip(clean.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
        assert_eq!(z, stack_complex_vector(&y));
    }

    #[test]
    fn transmit_is_deterministic_per_seed() {
        let block = random_block(4, 2, 0.98, 6);
        let frame = SymbolFrame::from_bits(vec![0, 1, 1, 0]).unwrap();
        let draw = || {
            let mut rng = substream(77, StreamId::channel_use(0, 0, 3, Purpose::Noise));
            transmit(&block, &frame, &mut rng).unwrap().0
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn frame_bits_and_symbols_agree() {
        let frame = SymbolFrame::from_bits(vec![0, 1, 1, 1]).unwrap();
        assert_eq!(frame.s[0], c(FRAC_1_SQRT_2, -FRAC_1_SQRT_2));
        assert_eq!(frame.s[1], c(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2));
        assert_eq!(SymbolFrame::from_stacked_signs(&frame.x), frame);
    }

    #[test]
    fn rejects_bad_impairments() {
        assert!(ImpairmentParams::uniform(0.0, 0.9, 2, 1.0).is_err());
        assert!(ImpairmentParams::uniform(1.0, 1.1, 2, 1.0).is_err());
        assert!(ImpairmentParams::uniform(1.0, 0.9, 2, 0.0).is_err());
        let g = CMatrix::zeros(3, 2);
        let imp = ImpairmentParams::ideal(2, 1.0).unwrap();
        assert!(matches!(
            build_sigma(&g, &[1.0], &imp),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
