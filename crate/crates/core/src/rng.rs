//! Portable pseudo-random source for input sequences.
//!
//! The generator is xorshift64* seeded through one round of SplitMix64, so
//! any port that follows these update equations reproduces the same stream:
//!
//! ```text
//! seeding:   z = seed + 0x9E3779B97F4A7C15
//!            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!            z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!            state = z ^ (z >> 31)            (0 is replaced by 0x9E3779B97F4A7C15)
//! step:      x ^= x >> 12;  x ^= x << 25;  x ^= x >> 27
//!            output = x * 0x2545F4914F6CDD1D
//! uniform:   u = (output >> 11) * 2^-53                  in [0, 1)
//! bernoulli: One iff u < p
//! ```
//!
//! All arithmetic is wrapping 64-bit.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    pub fn seed_from(seed: u64) -> Self {
        let mut z = seed.wrapping_add(GOLDEN);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        let state = z ^ (z >> 31);
        XorShift64Star { state: if state == 0 { GOLDEN } else { state } }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}
