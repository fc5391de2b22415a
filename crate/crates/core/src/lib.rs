//! Uplink QPSK detection for massive MIMO with one-bit ADCs and additive
//! transceiver hardware impairments.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`]: impaired received signal, effective-noise covariance,
//!   real-valued stacking and the one-bit quantizer.
//! * [`scenario`]: user drops, path loss, uplink power control and Rayleigh
//!   fading draws for one coherence block.
//! * [`receivers`]: quantization-unaware (MRC/ZF/MMSE) and Bussgang-aware
//!   (BMRC/BZF/BMMSE) linear combiners with QPSK slicing.
//! * [`admm`]: the sign-refined QCQP detector solved by scaled ADMM with
//!   closed-form (hard) or softened updates.
//! * [`sim`]: deterministic, parallel Monte-Carlo BER campaigns.
//! * [`config`] / [`report`] / [`validate`]: the batch front-end pieces used
//!   by the `onebit-mimo` binary.

pub mod admm;
pub mod config;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod receivers;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod validate;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub type CMatrix = nalgebra::DMatrix<Complex64>;
pub type CVector = nalgebra::DVector<Complex64>;
pub type RMatrix = nalgebra::DMatrix<f64>;
pub type RVector = nalgebra::DVector<f64>;
