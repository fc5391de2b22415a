//! Counter-style random substreams.
//!
//! Every random draw in a campaign comes from a ChaCha8 stream keyed by the
//! master seed and selected by a [`StreamId`] (setup, resample attempt,
//! channel use, purpose). Results therefore never depend on how setups are
//! scheduled across worker threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

/// What a substream is used for. Distinct purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    UserDrop = 1,
    Fading = 2,
    Symbols = 3,
    Noise = 4,
    AdmmInit = 5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub setup: u64,
    pub attempt: u32,
    /// Channel use inside the setup; `u64::MAX` for per-setup draws.
    pub channel_use: u64,
    pub purpose: Purpose,
}

impl StreamId {
    pub const PER_SETUP: u64 = u64::MAX;

    pub fn setup(setup: u64, attempt: u32, purpose: Purpose) -> Self {
        Self {
            setup,
            attempt,
            channel_use: Self::PER_SETUP,
            purpose,
        }
    }

    pub fn channel_use(setup: u64, attempt: u32, channel_use: u64, purpose: Purpose) -> Self {
        Self {
            setup,
            attempt,
            channel_use,
            purpose,
        }
    }

    fn stream_word(&self) -> u64 {
        let mut h = splitmix64(self.setup);
        h = splitmix64(h ^ u64::from(self.attempt));
        h = splitmix64(h ^ self.channel_use);
        splitmix64(h ^ self.purpose as u64)
    }
}

/// Opens the substream `id` under `master_seed`.
pub fn substream(master_seed: u64, id: StreamId) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(id.stream_word());
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One draw from CN(0, `variance`): real and imaginary parts are independent
/// N(0, variance/2).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
