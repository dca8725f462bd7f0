//! Deterministic pseudo-random number generation.
//!
//! The synthetic landscape and the noisy oracle must be reproducible
//! bit-for-bit from `(seed, params)` alone, including across languages, so the
//! generator recipe is fixed here rather than delegated to an external crate:
//!
//! * seeding runs the raw seed through the splitmix64 finalizer ([`mix64`]);
//! * the stream itself is the 64-bit MMIX linear congruential generator
//!   `state = state * 6364136223846793005 + 1442695040888963407`;
//! * floats take the top 53 bits: `(state >> 11) * 2^-53`;
//! * bounded draws use plain modulo, `next_u64() % n`.
//!
//! Sub-streams (one per tile, one per stage) are derived with
//! [`derive_stream`] so that consumption order in one stream never shifts
//! draws in another.

/// splitmix64 finalizer. Bijective 64-bit mixer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit linear congruential generator (MMIX multiplier/increment),
/// seeded through splitmix64.
#[derive(Debug, Clone)]
pub struct Lcg64 {
    state: u64,
}

const LCG_MUL: u64 = 6364136223846793005;
const LCG_ADD: u64 = 1442695040888963407;

impl Lcg64 {
    pub fn new(seed: u64) -> Self {
        Lcg64 { state: mix64(seed) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(LCG_MUL).wrapping_add(LCG_ADD);
        self.state
    }

    /// Uniform in [0, 1) from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [0, n). n must be nonzero.
    pub fn next_below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    /// Bernoulli draw with probability `p`.
    pub fn next_bool(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}

/// Derives an independent sub-stream seed from a base seed and a stream index.
pub fn derive_stream(seed: u64, stream: u64) -> u64 {
    mix64(mix64(seed) ^ mix64(stream.wrapping_add(0xA076_1D64_78BD_642F)))
}
