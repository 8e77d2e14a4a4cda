//! Rayleigh block-fading gains, link rates and channel-inversion power.
//!
//! Every link uses the free-space `1/d²` attenuation and a half-rate
//! penalty for the two orthogonal slots of decode-and-forward relaying.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Squared channel magnitude `|h|²` of one link for one slot.
///
/// Under Rayleigh fading with unit mean this is exponentially distributed
/// with mean 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FadingSample(f64);

impl FadingSample {
    /// Wraps a known gain. Negative or non-finite values are rejected.
    pub fn new(gain_sq: f64) -> Option<Self> {
        (gain_sq.is_finite() && gain_sq >= 0.0).then_some(Self(gain_sq))
    }

    /// Inverse-CDF transform of a uniform variate on `(0, 1]`.
    pub fn from_uniform(u: f64) -> Self {
        debug_assert!(u > 0.0 && u <= 1.0, "uniform variate {u} outside (0, 1]");
        // -ln(1) is -0.0; normalise so the sample compares equal to zero bitwise.
        Self(-u.ln() + 0.0)
    }

    #[inline]
    pub fn gain_sq(self) -> f64 {
        self.0
    }
}

/// Draws one unit-mean exponential power gain.
pub fn draw_gain<R: Rng + ?Sized>(rng: &mut R) -> FadingSample {
    // gen::<f64>() is uniform on [0, 1); flip it onto (0, 1].
    let u = 1.0 - rng.gen::<f64>();
    FadingSample::from_uniform(u)
}

/// Seeded source of fading gains.
///
/// Each `(seed, stream)` pair names an independent ChaCha8 stream, so trials
/// and grid points can run on any thread and still see the same draws.
#[derive(Debug, Clone)]
pub struct GainStream {
    rng: ChaCha8Rng,
}

impl GainStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn draw(&mut self) -> FadingSample {
        draw_gain(&mut self.rng)
    }

    pub fn fill(&mut self, out: &mut [FadingSample]) {
        for g in out {
            *g = self.draw();
        }
    }
}

/// Derives a child seed from `seed` and a key, used to give every grid point
/// and every trial its own reproducible stream.
pub fn derive_seed(seed: u64, key: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LinkError {
    #[error("transmit power must be finite and non-negative, got {0}")]
    TxPower(f64),
    #[error("noise variance must be finite and positive, got {0}")]
    NoiseVar(f64),
    #[error("distance must be finite and positive, got {0}")]
    Distance(f64),
}

/// Transmit power, receiver noise and link distance for one hop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    tx_power: f64,
    noise_var: f64,
    distance: f64,
}

impl LinkBudget {
    pub fn new(tx_power: f64, noise_var: f64, distance: f64) -> Result<Self, LinkError> {
        if !(tx_power.is_finite() && tx_power >= 0.0) {
            return Err(LinkError::TxPower(tx_power));
        }
        if !(noise_var.is_finite() && noise_var > 0.0) {
            return Err(LinkError::NoiseVar(noise_var));
        }
        if !(distance.is_finite() && distance > 0.0) {
            return Err(LinkError::Distance(distance));
        }
        Ok(Self { tx_power, noise_var, distance })
    }

    pub fn tx_power(&self) -> f64 {
        self.tx_power
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn with_tx_power(self, tx_power: f64) -> Result<Self, LinkError> {
        Self::new(tx_power, self.noise_var, self.distance)
    }
}

/// Achievable rate in bits/s/Hz: `½·log₂(1 + |h|²·P / (σ²·d²))`.
pub fn link_rate(gain: FadingSample, budget: &LinkBudget) -> f64 {
    let snr = gain.gain_sq() * budget.tx_power / (budget.noise_var * budget.distance * budget.distance);
    0.5 * snr.ln_1p() / std::f64::consts::LN_2
}

/// Returned when a zero channel gain would require unbounded power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("zero channel gain: infinite transmit power required")]
pub struct InfinitePower;

/// Smallest transmit power whose [`link_rate`] equals `target_rate`.
///
/// A zero rate needs zero power whatever the channel.
pub fn inversion_power(
    target_rate: f64,
    gain: FadingSample,
    noise_var: f64,
    distance: f64,
) -> Result<f64, InfinitePower> {
    debug_assert!(target_rate >= 0.0);
    if target_rate == 0.0 {
        return Ok(0.0);
    }
    if gain.gain_sq() == 0.0 {
        return Err(InfinitePower);
    }
    Ok(snr_threshold(target_rate) * noise_var * distance * distance / gain.gain_sq())
}

/// SNR needed to carry `rate` over a half-duplex slot: `2^{2R} − 1`.
pub fn snr_threshold(rate: f64) -> f64 {
    (2.0 * rate * std::f64::consts::LN_2).exp_m1()
}

/// Converts decibel-watts to watts.
pub fn dbw_to_watts(dbw: f64) -> f64 {
    10f64.powf(dbw / 10.0)
}
