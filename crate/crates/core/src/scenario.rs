//! Experimental universe: user drops in a square cell, distance-based path
//! loss, uplink power control and i.i.d. Rayleigh fading per coherence block.

use crate::model::{ChannelBlock, ImpairmentParams};
use crate::rng::complex_normal;
use crate::{CMatrix, Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Square cell with the base station at its center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellConfig {
    /// Side length of the square cell in meters.
    pub side_m: f64,
    /// Users closer than this to the BS are redrawn.
    pub min_dist_m: f64,
    /// Path-loss intercept in dB at 1 km.
    pub pl_const_db: f64,
    /// Path-loss slope in dB per decade of distance (km).
    pub pl_slope: f64,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            side_m: 250.0,
            min_dist_m: 10.0,
            pl_const_db: 130.0,
            pl_slope: 37.6,
        }
    }
}

impl CellConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.side_m > 0.0 && self.side_m.is_finite()) {
            return Err(Error::invalid("cell.side_m", "must be positive"));
        }
        if !(self.min_dist_m >= 0.0 && self.min_dist_m < self.side_m / 2.0) {
            return Err(Error::invalid("cell.min_dist_m", "must lie in [0, side_m/2)"));
        }
        if !self.pl_const_db.is_finite() || !self.pl_slope.is_finite() {
            return Err(Error::invalid("cell.pl_const_db/pl_slope", "must be finite"));
        }
        Ok(())
    }

    /// Path loss in dB at distance `d_km` kilometers.
    pub fn path_loss_db(&self, d_km: f64) -> f64 {
        self.pl_const_db + self.pl_slope * d_km.log10()
    }

    /// Linear large-scale fading coefficient at distance `d_km`.
    pub fn beta(&self, d_km: f64) -> f64 {
        10f64.powf(-self.path_loss_db(d_km) / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerControlConfig {
    pub p_max_w: f64,
    /// Allowed SNR spread above the worst user, in dB.
    pub delta_db: f64,
}

impl Default for PowerControlConfig {
    fn default() -> Self {
        Self {
            p_max_w: 0.1,
            delta_db: 15.0,
        }
    }
}

impl PowerControlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_max_w > 0.0 && self.p_max_w.is_finite()) {
            return Err(Error::invalid("power.p_max_w", "must be positive"));
        }
        if !(self.delta_db >= 0.0 && self.delta_db.is_finite()) {
            return Err(Error::invalid("power.delta_db", "must be non-negative"));
        }
        Ok(())
    }
}

/// Large-scale state of the K users for one channel setup.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDrop {
    /// Planar positions in meters relative to the BS.
    pub positions: Vec<[f64; 2]>,
    pub beta: Vec<f64>,
    pub p: Vec<f64>,
    /// User indices sorted by ascending average SNR.
    pub snr_order: Vec<usize>,
}

impl UserDrop {
    pub fn users(&self) -> usize {
        self.beta.len()
    }
}

/// Places `users` uniformly in the cell (rejecting points closer than
/// `min_dist_m`) and returns positions with their path-loss coefficients.
pub fn drop_users<R: Rng + ?Sized>(
    cfg: &CellConfig,
    users: usize,
    rng: &mut R,
) -> Result<(Vec<[f64; 2]>, Vec<f64>)> {
    if users == 0 {
        return Err(Error::invalid("users", "must be at least 1"));
    }
    cfg.validate()?;
    let half = cfg.side_m / 2.0;
    let mut positions = Vec::with_capacity(users);
    while positions.len() < users {
        let pos = [rng.random_range(-half..half), rng.random_range(-half..half)];
        if pos[0].hypot(pos[1]) >= cfg.min_dist_m {
            positions.push(pos);
        }
    }
    let beta = positions
        .iter()
        .map(|q| cfg.beta(q[0].hypot(q[1]) / 1000.0))
        .collect();
    Ok((positions, beta))
}

/// Caps every user's SNR at Δ dB above the worst user's:
/// pₖ = min(p_max, p_max · β_min · 10^(Δ/10) / βₖ).
pub fn power_control(beta: &[f64], pc: &PowerControlConfig) -> Vec<f64> {
    let beta_min = beta.iter().copied().fold(f64::INFINITY, f64::min);
    let cap = pc.p_max_w * beta_min * 10f64.powf(pc.delta_db / 10.0);
    beta.iter().map(|b| pc.p_max_w.min(cap / b)).collect()
}

/// Indices sorting users by ascending received power pₖβₖ (ties keep index
/// order).
pub fn snr_order(beta: &[f64], p: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..beta.len()).collect();
    order.sort_by(|&a, &b| (p[a] * beta[a]).total_cmp(&(p[b] * beta[b])));
    order
}

/// Draws positions, path loss and power allocation for one setup.
pub fn make_drop<R: Rng + ?Sized>(
    cell: &CellConfig,
    power: &PowerControlConfig,
    users: usize,
    rng: &mut R,
) -> Result<UserDrop> {
    power.validate()?;
    let (positions, beta) = drop_users(cell, users, rng)?;
    let p = power_control(&beta, power);
    let snr_order = snr_order(&beta, &p);
    Ok(UserDrop {
        positions,
        beta,
        p,
        snr_order,
    })
}

/// i.i.d. Rayleigh fading g_km ~ CN(0, βₖ) for `antennas` BS antennas, then
/// the full [`ChannelBlock`].
pub fn draw_block<R: Rng + ?Sized>(
    beta: &[f64],
    p: &[f64],
    antennas: usize,
    impairments: &ImpairmentParams,
    rng: &mut R,
) -> Result<ChannelBlock> {
    if antennas == 0 {
        return Err(Error::invalid("antennas", "must be at least 1"));
    }
    if let Some(b) = beta.iter().find(|b| b.is_nan() || **b <= 0.0) {
        return Err(Error::invalid("beta", format!("must be positive, got {b}")));
    }
    // Column-major fill: one user's M coefficients at a time.
    let mut g = CMatrix::zeros(antennas, beta.len());
    for (user, b) in beta.iter().enumerate() {
        for ant in 0..antennas {
            g[(ant, user)] = complex_normal(rng, *b);
        }
    }
    ChannelBlock::new(g, p.to_vec(), impairments.clone())
}
