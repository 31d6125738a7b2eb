//! Deterministic counter-based random numbers.
//!
//! Every stochastic step in the toolkit (attack parameter sampling, weight
//! init, shuffling, synthetic data) draws from this generator so that a run
//! is reproducible bit-for-bit from its seed on any platform. The generator
//! is a keyed SplitMix64 variant evaluated at an explicit counter, which
//! makes it splittable: `child(i)` yields an independent stream per index
//! without consuming draws from the parent.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const CHILD_TWEAK: u64 = 0xA076_1D64_78BD_642F;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Splittable counter-based generator. Cheap to copy; treat instances as
/// values and derive child streams instead of sharing one instance.
#[derive(Debug, Clone)]
pub struct Rng {
    key: u64,
    counter: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { key: seed, counter: 0 }
    }

    /// Derive the `index`-th child stream. Distinct indices give distinct
    /// streams: the child key is a bijection of `index` for a fixed parent.
    pub fn child(&self, index: u64) -> Rng {
        let base = mix(self.key ^ CHILD_TWEAK);
        Rng { key: mix(base.wrapping_add(index.wrapping_mul(GAMMA))), counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.uniform() * (hi - lo)
    }

    /// Uniform integer in `lo..=hi`, bias-free (widening multiply with
    /// rejection).
    pub fn int_in(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let n = (hi - lo) as u64 + 1;
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            let m = x as u128 * n as u128;
            if (m as u64) >= threshold {
                return lo + (m >> 64) as i64;
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Pick one element uniformly.
    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.int_in(0, items.len() as i64 - 1) as usize]
    }

    /// Standard normal via Box-Muller. Draws exactly two uniforms per call.
    pub fn normal(&mut self) -> f64 {
        // u1 in (0, 1] so the log is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Zero-mean normal with the given variance.
    pub fn normal_with_variance(&mut self, variance: f64) -> f64 {
        self.normal() * variance.sqrt()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.int_in(0, i as i64) as usize;
            items.swap(i, j);
        }
    }

    /// Draw `k` distinct indices from `0..n` without replacement, in draw
    /// order (partial Fisher-Yates).
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        debug_assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        let mut picked = Vec::with_capacity(k);
        for i in 0..k {
            let j = self.int_in(i as i64, n as i64 - 1) as usize;
            pool.swap(i, j);
            picked.push(pool[i]);
        }
        picked
    }
}
