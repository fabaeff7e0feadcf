//! Counter-based random numbers.
//!
//! Every draw is a pure function of `(seed, stream, realization, counter)`, so
//! ensembles can be evaluated in any order or on any number of workers and still
//! produce bit-identical results. The mixer is the SplitMix64 finalizer applied
//! once per key component.

use rand::RngCore;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream tags keep unrelated uses of one master seed apart.
pub mod streams {
    pub const POTENTIAL: u64 = 0x706f_7465_6e74_6961;
    pub const START_VECTOR: u64 = 0x7374_6172_7476_6563;
    pub const INNER_SITE: u64 = 0x696e_6e65_7273_6974;
    pub const BOOTSTRAP: u64 = 0x626f_6f74_7374_7270;
    pub const DOS_RUN: u64 = 0x646f_7372_756e_0001;
    pub const LYAPUNOV: u64 = 0x6c79_6170_756e_6f76;
    pub const PROPERTY: u64 = 0x7072_6f70_6572_7479;
    pub const DIRECTION: u64 = 0x6469_7265_6374_696f;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of the full key. Site `i` of realization `r` uses `counter_u64(seed, stream, r, i)`.
#[inline]
pub fn counter_u64(seed: u64, stream: u64, realization: u64, counter: u64) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ stream);
    h = splitmix64(h ^ realization);
    splitmix64(h ^ counter)
}

/// Maps 64 random bits to `[0, 1)` using the top 53 bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Derives a sub-seed; used to give experiments independent streams.
pub fn sub_seed(seed: u64, tag: u64) -> u64 {
    counter_u64(seed, tag, u64::MAX, u64::MAX)
}

/// Sequential generator over one `(seed, stream, realization)` key.
///
/// Useful wherever a `rand` distribution or shuffle is needed; the `n`-th output
/// is still a pure function of the key and `n`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    seed: u64,
    stream: u64,
    realization: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64, realization: u64) -> Self {
        Self { seed, stream, realization, counter: 0 }
    }

    pub fn next_unit(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_unit()
    }

    /// Uniform integer in `0..n` (`n > 0`), by rejection to avoid modulo bias.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        let out = counter_u64(self.seed, self.stream, self.realization, self.counter);
        self.counter += 1;
        out
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_pure() {
        assert_eq!(counter_u64(1, 2, 3, 4), counter_u64(1, 2, 3, 4));
        assert_ne!(counter_u64(1, 2, 3, 4), counter_u64(1, 2, 3, 5));
        assert_ne!(counter_u64(1, 2, 3, 4), counter_u64(1, 2, 4, 4));
        assert_ne!(counter_u64(1, 2, 3, 4), counter_u64(2, 2, 3, 4));
    }

    #[test]
    fn unit_range_and_mean() {
        let mut rng = CounterRng::new(42, 0, 0);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let u = rng.next_unit();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        assert!((sum / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn bit_balance() {
        // each output bit should be set about half the time
        let mut ones = [0u32; 64];
        let n = 20_000;
        for i in 0..n {
            let x = counter_u64(7, 0, 0, i);
            for (b, count) in ones.iter_mut().enumerate() {
                *count += ((x >> b) & 1) as u32;
            }
        }
        for count in ones {
            let frac = count as f64 / n as f64;
            assert!((frac - 0.5).abs() < 0.02, "bit frequency {frac}");
        }
    }

    #[test]
    fn below_is_in_range() {
        let mut rng = CounterRng::new(3, 1, 9);
        for _ in 0..1000 {
            assert!(rng.below(7) < 7);
        }
    }
}
