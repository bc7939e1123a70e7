//! Deterministic random stream used by every randomized component.
//!
//! The generator is SplitMix64: output i is `mix64(seed + (i+1)*GAMMA)`, a pure
//! function of a 64-bit counter, so streams are reproducible across platforms,
//! splittable by deriving child seeds, and cheap to skip around in. Derived
//! quantities are defined on top of the raw u64 stream:
//!
//! - doubles take the top 53 bits, giving values in [0, 1) (or (0, 1] for the
//!   log argument of Box–Muller),
//! - sign entries consume single bits of the stream, 64 per raw output,
//! - Gaussians come from the Box–Muller transform on consecutive stream
//!   doubles, with the second value of each pair cached.
//!
//! Consumers must not interleave calls of different flavors if they rely on a
//! documented entry layout; each sketch constructor uses exactly one flavor.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const TWO_NEG_53: f64 = 1.0 / 9_007_199_254_740_992.0;

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z
}

/// Derives an independent child seed from `seed` and a stream label.
pub fn derive(seed: u64, label: u64) -> u64 {
    mix64(seed ^ mix64(label.wrapping_add(1).wrapping_mul(GAMMA)))
}

/// Counter-based 64-bit random stream with helpers for the derived flavors.
#[derive(Debug, Clone)]
pub struct SeedStream {
    counter: u64,
    seed: u64,
    bit_buf: u64,
    bits_left: u32,
    gauss_cache: Option<f64>,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream {
            counter: 0,
            seed,
            bit_buf: 0,
            bits_left: 0,
            gauss_cache: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform double in [0, 1).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_NEG_53
    }

    /// Uniform double in (0, 1]; safe as a logarithm argument.
    #[inline]
    fn next_f64_open_zero(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * TWO_NEG_53
    }

    /// Next sign entry, +1.0 or -1.0, consuming one bit of the stream.
    #[inline]
    pub fn next_sign(&mut self) -> f64 {
        if self.bits_left == 0 {
            self.bit_buf = self.next_u64();
            self.bits_left = 64;
        }
        let bit = self.bit_buf & 1;
        self.bit_buf >>= 1;
        self.bits_left -= 1;
        if bit == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Standard normal via Box–Muller on consecutive stream doubles.
    pub fn next_gauss(&mut self) -> f64 {
        if let Some(z) = self.gauss_cache.take() {
            return z;
        }
        let u1 = self.next_f64_open_zero();
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.gauss_cache = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Stream for an independent substream labeled `label`.
    pub fn substream(&self, label: u64) -> SeedStream {
        SeedStream::new(derive(self.seed, label))
    }
}
