//! Reproducible random streams.
//!
//! Every stream is identified by a `(master_seed, stream_id)` pair and backed
//! by ChaCha8: the 256-bit key is expanded from `master_seed` with the
//! generator's `seed_from_u64` (a PCG32 expansion) and `stream_id` selects the
//! ChaCha stream (nonce). Identical pairs therefore give identical sequences
//! on every platform and thread schedule, and distinct ids give distinct
//! keystreams under the same key.
//!
//! Hierarchical work (repetition r, then sample X / sample Y / bootstrap b)
//! derives child ids with [`RngStream::substream`], a SplitMix64 mix of the
//! parent id and a tag.

use rand::{Error as RandError, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Child stream keyed by `tag`; deterministic in `(self, tag)`.
    pub fn substream(&self, tag: u64) -> Self {
        let id = splitmix64(splitmix64(self.stream_id) ^ splitmix64(tag ^ 0xA5A5_5A5A_C3C3_3C3C));
        Self {
            master_seed: self.master_seed,
            stream_id: id,
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.master_seed);
        inner.set_stream(self.stream_id);
        StreamRng { inner }
    }
}

/// Generator for one [`RngStream`].
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    /// Uniform on the open interval (0, 1), on the 2^-53 grid shifted by half a step.
    pub fn uniform(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Unit-rate exponential.
    pub fn exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }

    /// Positive alpha-stable variable with Laplace transform `exp(-s^alpha)`,
    /// drawn with the Chambers–Mallows–Stuck construction in Kanter's form.
    /// `alpha = 1` is the point mass at 1.
    pub fn positive_stable(&mut self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::domain(format!("stable index must lie in (0, 1], got {alpha}")));
        }
        if alpha == 1.0 {
            return Ok(1.0);
        }
        let u = std::f64::consts::PI * self.uniform();
        let e = self.exponential();
        let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
        let b = (((1.0 - alpha) * u).sin() / e).powf((1.0 - alpha) / alpha);
        Ok(a * b)
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), RandError> {
        self.inner.try_fill_bytes(dest)
    }
}
