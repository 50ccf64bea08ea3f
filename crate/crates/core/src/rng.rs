//! Deterministic random numbers.
//!
//! Everything in this crate that needs randomness draws from [`Pcg32`], a
//! PCG XSH-RR 64/32 generator. The constants and update rule are spelled out
//! here so a run can be reproduced bit-for-bit from a single seed in any
//! language: state advances by `state * MULT + INC` (mod 2^64) and each output
//! is the xorshifted-then-rotated top bits of the *previous* state.
//!
//! Independent sub-streams (one per model id, pair index, ...) are derived
//! with [`Pcg32::fork`], which mixes the parent seed and the stream id through
//! SplitMix64 so sibling streams share no correlated structure.

/// PCG multiplier (Knuth's MMIX LCG multiplier).
pub const MULT: u64 = 6364136223846793005;
/// Fixed odd increment; all streams use it, seeds/forks differ in state only.
pub const INC: u64 = 1442695040888963407;

#[derive(Debug, Clone)]
pub struct Pcg32 {
    state: u64,
}

impl Pcg32 {
    /// Seed the generator. Two advance steps around the seed add mirror the
    /// reference `pcg32_srandom` routine so nearby seeds diverge immediately.
    pub fn new(seed: u64) -> Self {
        let mut rng = Pcg32 { state: 0 };
        rng.advance();
        rng.state = rng.state.wrapping_add(seed);
        rng.advance();
        rng
    }

    /// Derive the deterministic sub-stream `id` of a root seed.
    pub fn fork(root_seed: u64, id: u64) -> Self {
        Pcg32::new(derive_seed(root_seed, id))
    }

    fn advance(&mut self) {
        self.state = self.state.wrapping_mul(MULT).wrapping_add(INC);
    }

    pub fn next_u32(&mut self) -> u32 {
        let old = self.state;
        self.advance();
        let xorshifted = (((old >> 18) ^ old) >> 27) as u32;
        let rot = (old >> 59) as u32;
        xorshifted.rotate_right(rot)
    }

    pub fn next_u64(&mut self) -> u64 {
        let hi = self.next_u32() as u64;
        let lo = self.next_u32() as u64;
        (hi << 32) | lo
    }

    /// Uniform in [0, 1) with 53 random mantissa bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller (cosine branch only, one draw per call).
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1]: keeps the log finite
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in [0, n). `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // multiply-shift keeps the bias below 2^-64, far under anything
        // observable here, and avoids rejection loops
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Deterministic child seed `id` of a root seed; what [`Pcg32::fork`] seeds
/// itself with. Exposed so seeds can be recorded in manifests.
pub fn derive_seed(root_seed: u64, id: u64) -> u64 {
    splitmix64(root_seed ^ splitmix64(id))
}

/// SplitMix64 finalizer; used only for seed mixing, never as a stream.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference implementation straight from the PCG paper's description,
    // written with u128 arithmetic so it shares no code with the real one.
    struct Reference {
        state: u128,
    }
    impl Reference {
        fn new(seed: u64) -> Self {
            let m = MULT as u128;
            let c = INC as u128;
            let mask = (1u128 << 64) - 1;
            let mut s: u128 = 0;
            s = (s * m + c) & mask;
            s = (s + seed as u128) & mask;
            s = (s * m + c) & mask;
            Reference { state: s }
        }
        fn next(&mut self) -> u32 {
            let old = self.state as u64;
            let m = MULT as u128;
            let c = INC as u128;
            self.state = (self.state * m + c) & ((1u128 << 64) - 1);
            let xs = (((old >> 18) ^ old) >> 27) as u32;
            let rot = (old >> 59) as u32;
            (xs >> rot) | (xs.checked_shl(32 - rot).unwrap_or(0))
        }
    }

    #[test]
    fn matches_independent_reference() {
        for seed in [0u64, 1, 42, u64::MAX, 0xDEADBEEF] {
            let mut a = Pcg32::new(seed);
            let mut b = Reference::new(seed);
            for _ in 0..1000 {
                assert_eq!(a.next_u32(), b.next());
            }
        }
    }

    #[test]
    fn stream_is_frozen() {
        // FNV-1a over the first 10^6 outputs of seed 42; guards against any
        // accidental change to seeding or output permutation.
        let mut rng = Pcg32::new(42);
        let mut h: u64 = 0xcbf29ce484222325;
        for _ in 0..1_000_000 {
            for byte in rng.next_u32().to_le_bytes() {
                h = (h ^ byte as u64).wrapping_mul(0x100000001b3);
            }
        }
        assert_eq!(h, 0x6f0fefcad21c7060);
    }

    #[test]
    fn forks_are_stable_and_distinct() {
        let a1: Vec<u32> = (0..8).map({ let mut r = Pcg32::fork(9, 0); move |_| r.next_u32() }).collect();
        let a2: Vec<u32> = (0..8).map({ let mut r = Pcg32::fork(9, 0); move |_| r.next_u32() }).collect();
        let b: Vec<u32> = (0..8).map({ let mut r = Pcg32::fork(9, 1); move |_| r.next_u32() }).collect();
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
    }

    #[test]
    fn uniform_and_gaussian_ranges() {
        let mut rng = Pcg32::new(3);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..20000 {
            let u = rng.next_f64();
            assert!((0.0..1.0).contains(&u));
            let g = rng.gaussian();
            sum += g;
            sum2 += g * g;
        }
        let mean = sum / 20000.0;
        let var = sum2 / 20000.0 - mean * mean;
        assert!(mean.abs() < 0.05, "gaussian mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "gaussian var {var}");
    }

    #[test]
    fn below_covers_range() {
        let mut rng = Pcg32::new(11);
        let mut seen = [false; 5];
        for _ in 0..200 {
            seen[rng.below(5)] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
