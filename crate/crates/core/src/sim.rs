//! Monte-Carlo BER campaigns.
//!
//! Each channel setup draws a user drop and one coherence block, prepares
//! every requested detector once, then runs `uses` channel uses in which all
//! detectors see the same quantized observation. Setups run in parallel;
//! every random draw comes from a substream keyed by (setup, attempt,
//! channel use, purpose), and per-setup results are reduced in setup order,
//! so the report does not depend on the worker count.

use crate::admm::{admm_detect, precompute_block, slice_admm, AdmmConfig, AdmmVariant, BlockPrecompute};
use crate::model::{quantize_one_bit, transmit, ImpairmentParams, QuantizedObservation, SymbolFrame};
use crate::receivers::{bussgang, detect_linear, make_combiner_with, BussgangData, CombinerMatrix, ReceiverKind};
use crate::rng::{substream, Purpose, StreamId};
use crate::scenario::{draw_block, make_drop, CellConfig, PowerControlConfig};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::time::Instant;

/// Resampling attempts for a setup whose channel draw is singular.
pub const MAX_SETUP_ATTEMPTS: u32 = 4;

/// A detector to evaluate in a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DetectorSpec {
    Linear { kind: ReceiverKind },
    Admm { config: AdmmConfig },
}

impl DetectorSpec {
    pub fn linear(kind: ReceiverKind) -> Self {
        DetectorSpec::Linear { kind }
    }

    pub fn admm(config: AdmmConfig) -> Self {
        DetectorSpec::Admm { config }
    }

    pub fn label(&self) -> String {
        match self {
            DetectorSpec::Linear { kind } => kind.label().to_string(),
            DetectorSpec::Admm { config } => match config.variant {
                AdmmVariant::Hard => "ADMM-HARD".to_string(),
                AdmmVariant::Soft => "ADMM-SOFT".to_string(),
            },
        }
    }

    /// Parses a detector token: a receiver name (`mrc`, `bmmse`, ...),
    /// `admm` (variant from `admm_defaults`), `admm-hard` or `admm-soft`.
    pub fn parse(token: &str, admm_defaults: &AdmmConfig) -> Result<Self> {
        let t = token.trim().to_ascii_lowercase();
        let admm = |variant| {
            DetectorSpec::admm(AdmmConfig {
                variant,
                ..admm_defaults.clone()
            })
        };
        match t.as_str() {
            "admm" => Ok(admm(admm_defaults.variant)),
            "admm-hard" => Ok(admm(AdmmVariant::Hard)),
            "admm-soft" => Ok(admm(AdmmVariant::Soft)),
            other => other.parse().map(DetectorSpec::linear),
        }
    }

    /// The full comparison set: six linear receivers and both ADMM variants.
    pub fn all(admm_defaults: &AdmmConfig) -> Vec<Self> {
        let mut v: Vec<_> = ReceiverKind::ALL.into_iter().map(DetectorSpec::linear).collect();
        for variant in [AdmmVariant::Soft, AdmmVariant::Hard] {
            v.push(DetectorSpec::admm(AdmmConfig {
                variant,
                ..admm_defaults.clone()
            }));
        }
        v
    }
}

/// Cell, power control and impairment settings shared by all setups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub cell: CellConfig,
    pub power: PowerControlConfig,
    pub kappa_r: f64,
    /// One value for all users, or one per user.
    pub kappa_t: Vec<f64>,
    pub sigma2: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            cell: CellConfig::default(),
            power: PowerControlConfig::default(),
            kappa_r: 0.98,
            kappa_t: vec![0.98],
            sigma2: 2e-13,
        }
    }
}

impl ScenarioConfig {
    pub fn impairments(&self, users: usize) -> Result<ImpairmentParams> {
        let kappa_t = match self.kappa_t.len() {
            1 => vec![self.kappa_t[0]; users],
            n if n == users => self.kappa_t.clone(),
            n => return Err(Error::dims("scenario: kappa_t", format!("1 or {users}"), n)),
        };
        ImpairmentParams::new(self.kappa_r, kappa_t, self.sigma2)
    }

    pub fn validate(&self, users: usize) -> Result<()> {
        self.cell.validate()?;
        self.power.validate()?;
        self.impairments(users).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    /// BS antennas M.
    pub antennas: usize,
    /// Users K.
    pub users: usize,
    pub setups: u64,
    /// Channel uses per setup.
    pub uses: u64,
    pub detectors: Vec<DetectorSpec>,
    pub master_seed: u64,
    /// Worker threads; 0 uses all available cores.
    pub workers: usize,
    pub scenario: ScenarioConfig,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::invalid("users", "must be at least 1"));
        }
        if self.antennas < self.users {
            return Err(Error::invalid(
                "antennas",
                format!("need at least as many antennas as users ({} < {})", self.antennas, self.users),
            ));
        }
        if self.setups == 0 {
            return Err(Error::invalid("setups", "must be at least 1"));
        }
        if self.uses == 0 {
            return Err(Error::invalid("uses", "must be at least 1"));
        }
        if self.detectors.is_empty() {
            return Err(Error::invalid("detectors", "at least one detector is required"));
        }
        let mut labels = HashSet::new();
        for d in &self.detectors {
            if let DetectorSpec::Admm { config } = d {
                config.validate()?;
            }
            if !labels.insert(d.label()) {
                return Err(Error::invalid("detectors", format!("duplicate detector `{}`", d.label())));
            }
        }
        self.scenario.validate(self.users)
    }
}

/// Hook called with every quantized observation, before detection.
pub trait ObservationObserver: Sync {
    fn observe(&self, setup: u64, channel_use: u64, obs: &QuantizedObservation);
}

struct NoObserver;

impl ObservationObserver for NoObserver {
    fn observe(&self, _: u64, _: u64, _: &QuantizedObservation) {}
}

/// Error counts of one channel setup, users in ascending-SNR order.
#[derive(Debug, Clone, PartialEq)]
pub struct SetupResult {
    pub setup: u64,
    /// Attempt that succeeded (0 unless the first draw was singular).
    pub attempt: u32,
    /// `bit_errors[detector][rank]`.
    pub bit_errors: Vec<Vec<u64>>,
    /// Average SNR pₖβₖ·M·κʳκᵗₖ/σ² (linear) per rank.
    pub snr: Vec<f64>,
}

enum Prepared {
    Linear(CombinerMatrix),
    Admm { pre: usize, config: AdmmConfig },
}

pub fn run_setup(cfg: &CampaignConfig, setup: u64) -> Result<SetupResult> {
    run_setup_observed(cfg, setup, &NoObserver)
}

/// [`run_setup`] with an observation hook. Singular channel draws are
/// resampled on a fresh substream up to [`MAX_SETUP_ATTEMPTS`] times.
pub fn run_setup_observed(
    cfg: &CampaignConfig,
    setup: u64,
    observer: &dyn ObservationObserver,
) -> Result<SetupResult> {
    let mut last = None;
    for attempt in 0..MAX_SETUP_ATTEMPTS {
        match run_attempt(cfg, setup, attempt, observer) {
            Ok(res) => return Ok(res),
            Err(e) if e.is_singular() => {
                log::warn!("setup {setup} attempt {attempt}: {e}; resampling");
                last = Some(e);
            }
            Err(e) => {
                return Err(Error::Setup {
                    setup,
                    source: Box::new(e),
                })
            }
        }
    }
    Err(Error::Setup {
        setup,
        source: Box::new(last.expect("at least one attempt")),
    })
}

fn run_attempt(
    cfg: &CampaignConfig,
    setup: u64,
    attempt: u32,
    observer: &dyn ObservationObserver,
) -> Result<SetupResult> {
    let seed = cfg.master_seed;
    let k = cfg.users;
    let scenario = &cfg.scenario;
    let imp = scenario.impairments(k)?;

    let drop = make_drop(
        &scenario.cell,
        &scenario.power,
        k,
        &mut substream(seed, StreamId::setup(setup, attempt, Purpose::UserDrop)),
    )?;
    let block = draw_block(
        &drop.beta,
        &drop.p,
        cfg.antennas,
        &imp,
        &mut substream(seed, StreamId::setup(setup, attempt, Purpose::Fading)),
    )?;

    let needs_bussgang = cfg
        .detectors
        .iter()
        .any(|d| matches!(d, DetectorSpec::Linear { kind } if kind.is_bussgang()));
    let bg = if needs_bussgang {
        Some(bussgang(&block)?)
    } else {
        None
    };
    let no_bussgang = BussgangData::empty();
    let mut precomputed: Vec<((u64, crate::admm::ProblemScaling), BlockPrecompute)> = Vec::new();
    let mut prepared = Vec::with_capacity(cfg.detectors.len());
    for det in &cfg.detectors {
        prepared.push(match det {
            DetectorSpec::Linear { kind } => {
                Prepared::Linear(make_combiner_with(&block, *kind, bg.as_ref().unwrap_or(&no_bussgang))?)
            }
            DetectorSpec::Admm { config } => {
                let key = (config.rho.to_bits(), config.scaling);
                let pre = match precomputed.iter().position(|(k, _)| *k == key) {
                    Some(i) => i,
                    None => {
                        precomputed.push((key, precompute_block(&block, config.rho, config.scaling)?));
                        precomputed.len() - 1
                    }
                };
                Prepared::Admm {
                    pre,
                    config: config.clone(),
                }
            }
        });
    }

    let mut errors = vec![vec![0u64; k]; cfg.detectors.len()];
    for channel_use in 0..cfg.uses {
        let id = |purpose| StreamId::channel_use(setup, attempt, channel_use, purpose);
        let frame = SymbolFrame::random(k, &mut substream(seed, id(Purpose::Symbols)));
        let (_, z) = transmit(&block, &frame, &mut substream(seed, id(Purpose::Noise)))?;
        let obs = quantize_one_bit(&z);
        observer.observe(setup, channel_use, &obs);

        for (det, counts) in prepared.iter().zip(errors.iter_mut()) {
            let estimate = match det {
                Prepared::Linear(comb) => detect_linear(comb, &obs.r_complex)?,
                Prepared::Admm { pre, config } => {
                    let mut rng = substream(seed, id(Purpose::AdmmInit));
                    let out = admm_detect(&precomputed[*pre].1, &obs.r, config, &mut rng)?;
                    slice_admm(&out.x)?
                }
            };
            for (user, c) in counts.iter_mut().enumerate() {
                *c += u64::from(frame.user_bit_errors(&estimate, user));
            }
        }
    }

    let m = cfg.antennas as f64;
    let snr = drop
        .snr_order
        .iter()
        .map(|&u| drop.p[u] * drop.beta[u] * m * imp.kappa_r * imp.kappa_t[u] / imp.sigma2)
        .collect();
    let bit_errors = errors
        .into_iter()
        .map(|per_user| drop.snr_order.iter().map(|&u| per_user[u]).collect())
        .collect();
    Ok(SetupResult {
        setup,
        attempt,
        bit_errors,
        snr,
    })
}

/// Per-detector error counts, indexed by ascending-SNR user rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorReport {
    pub label: String,
    pub spec: DetectorSpec,
    pub bit_errors: Vec<u64>,
    pub total_bits: Vec<u64>,
}

impl DetectorReport {
    pub fn ber(&self) -> Vec<f64> {
        self.bit_errors
            .iter()
            .zip(&self.total_bits)
            .map(|(e, t)| *e as f64 / *t as f64)
            .collect()
    }

    /// BER pooled over all users.
    pub fn average_ber(&self) -> f64 {
        let e: u64 = self.bit_errors.iter().sum();
        let t: u64 = self.total_bits.iter().sum();
        e as f64 / t as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerReport {
    pub config: CampaignConfig,
    pub detectors: Vec<DetectorReport>,
    /// Mean over setups of the per-rank SNR, in dB.
    pub avg_snr_db: Vec<f64>,
    pub setups_completed: u64,
    pub setups_failed: u64,
    /// Setups that needed more than one attempt.
    pub setups_resampled: u64,
    pub wall_time_s: f64,
}

impl BerReport {
    pub fn detector(&self, label: &str) -> Option<&DetectorReport> {
        self.detectors.iter().find(|d| d.label == label)
    }
}

/// Runs every setup of the campaign and reduces the counts.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<BerReport> {
    cfg.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    let results: Vec<Result<SetupResult>> =
        pool.install(|| (0..cfg.setups).into_par_iter().map(|s| run_setup(cfg, s)).collect());

    let k = cfg.users;
    let mut bit_errors = vec![vec![0u64; k]; cfg.detectors.len()];
    let mut snr_sum = vec![0.0f64; k];
    let (mut completed, mut failed, mut resampled) = (0u64, 0u64, 0u64);
    for res in results {
        match res {
            Ok(r) => {
                completed += 1;
                resampled += u64::from(r.attempt > 0);
                for (acc, counts) in bit_errors.iter_mut().zip(&r.bit_errors) {
                    for (a, c) in acc.iter_mut().zip(counts) {
                        *a += c;
                    }
                }
                for (acc, s) in snr_sum.iter_mut().zip(&r.snr) {
                    *acc += s;
                }
            }
            Err(e) if e.is_singular() => {
                log::warn!("{e}; setup dropped");
                failed += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if failed * 100 > cfg.setups {
        return Err(Error::CampaignAborted {
            failed,
            total: cfg.setups,
        });
    }

    let bits_per_user = 2 * cfg.uses * completed;
    let detectors = cfg
        .detectors
        .iter()
        .zip(bit_errors)
        .map(|(spec, errs)| DetectorReport {
            label: spec.label(),
            spec: spec.clone(),
            bit_errors: errs,
            total_bits: vec![bits_per_user; k],
        })
        .collect();
    let avg_snr_db = snr_sum
        .iter()
        .map(|s| 10.0 * (s / completed.max(1) as f64).log10())
        .collect();
    Ok(BerReport {
        config: cfg.clone(),
        detectors,
        avg_snr_db,
        setups_completed: completed,
        setups_failed: failed,
        setups_resampled: resampled,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
