//! Deterministic counter-based pseudorandom streams.
//!
//! Everything stochastic in this crate (synthetic data, weight
//! initialization, epoch shuffling) draws from this generator so that a
//! seed reproduces byte-identical artifacts across runs and platforms.
//!
//! The scheme is normative for the file formats this crate emits:
//!
//! - `mix(z)` is the SplitMix64 finalizer (Steele, Lea & Flood 2014) with
//!   constants `0x9E3779B97F4A7C15`, `0xBF58476D1CE4E5B9`,
//!   `0x94D049BB133111EB` and shifts 30/27/31.
//! - A stream with key `key` yields `out_n = mix(key + n * 0x9E3779B97F4A7C15)`
//!   (wrapping arithmetic) for counter `n = 0, 1, 2, ...`.
//! - The root key for `seed` is `mix(seed)`; the substream labelled `l` of
//!   a stream with key `k` has key `mix(k ^ mix(l ^ 0xA0761D6478BD642F))`.
//! - Uniform doubles use the top 53 bits: `u = (out >> 11) * 2^-53` in
//!   `[0, 1)`. Standard normals use the Box-Muller transform on the pair
//!   `(u1, u2)` drawn in that order, with `u1` shifted into `(0, 1]`.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_2: u64 = 0x94D0_49BB_1331_11EB;
const STREAM_SALT: u64 = 0xA076_1D64_78BD_642F;

/// SplitMix64 finalizer.
#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_2);
    z ^ (z >> 31)
}

/// A splittable counter-based random stream.
///
/// Cloning is cheap and copies the position; [`StreamRng::stream`] derives
/// an independent child stream from a label without advancing the parent.
#[derive(Debug, Clone)]
pub struct StreamRng {
    key: u64,
    counter: u64,
}

impl StreamRng {
    pub fn new(seed: u64) -> Self {
        StreamRng {
            key: mix(seed),
            counter: 0,
        }
    }

    /// Derives the child stream with the given label.
    pub fn stream(&self, label: u64) -> StreamRng {
        StreamRng {
            key: mix(self.key ^ mix(label ^ STREAM_SALT)),
            counter: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let out = mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
        self.counter += 1;
        out
    }

    /// Uniform double in `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform double in `[lo, hi)`.
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        // Shift u1 into (0, 1] so the log is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = (self.next_u64() % (i as u64 + 1)) as usize;
            items.swap(i, j);
        }
    }
}
