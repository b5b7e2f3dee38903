//! Portable pseudo-random source.
//!
//! Stego-keys carry only 64-bit seeds, so every random decision that has to be
//! replayed on the receiving side must come from a generator whose output is
//! pinned bit for bit. This is SplitMix64 (Steele, Lea & Flood; Vigna's
//! reference constants):
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! out = z ^ (z >> 31)
//! ```
//!
//! Derived draws:
//! - `below(n)`: rejection sampling, rejects outputs `< (2^64 - n) mod n`, returns `x mod n`.
//! - `unit()`: `(next >> 11) * 2^-53`, in `[0, 1)`.
//! - `gaussian()`: Box–Muller cosine branch, `sqrt(-2 ln(1 - u1)) * cos(2π u2)`,
//!   two `unit()` draws per sample, nothing cached.
//!
//! `tests/oracles/portable_rng.py` is an independent transcription used to
//! produce the committed test vectors.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Independent stream for a numbered sub-task (e.g. one nest), derived
    /// from a master seed. Serial and parallel runs see identical streams.
    pub fn stream(master_seed: u64, index: u64) -> Self {
        let salt = mix(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
        Self::new(mix(master_seed ^ salt))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform integer in `[0, n)`. `n` must be non-zero.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % n;
            }
        }
    }

    pub fn below_usize(&mut self, n: usize) -> usize {
        self.below(n as u64) as usize
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
