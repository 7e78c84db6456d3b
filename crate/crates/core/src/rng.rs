//! Explicitly seeded, splittable random number generation.
//!
//! Every stochastic routine in the crate takes a [`SplitRng`]. A handle is a
//! ChaCha8 stream keyed by a 64-bit seed; [`SplitRng::split`] derives child
//! handles deterministically from the parent seed and a child index, so the
//! draws seen by replication `r` never depend on how many other replications
//! were run or in which order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based generator with deterministic seed splitting.
#[derive(Debug, Clone)]
pub struct SplitRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SplitRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Seed this handle was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child handle for `index`. Depends only on `(self.seed(), index)`, not on
    /// how many draws the parent has already produced.
    pub fn split(&self, index: u64) -> SplitRng {
        SplitRng::new(derive_seed(self.seed, index))
    }

    /// Child handle addressed by a path of indices, e.g. `[n_index, replication]`.
    pub fn split_path(&self, path: &[u64]) -> SplitRng {
        let seed = path.iter().fold(self.seed, |s, &i| derive_seed(s, i));
        SplitRng::new(seed)
    }
}

/// Seed of the `index`-th child of `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

impl RngCore for SplitRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SplitRng::new(42);
        let mut b = SplitRng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn split_ignores_parent_position() {
        let mut a = SplitRng::new(7);
        let before = a.split(3);
        let _: f64 = a.random();
        let after = a.split(3);
        assert_eq!(before.seed(), after.seed());
        assert_ne!(a.split(3).seed(), a.split(4).seed());
    }

    #[test]
    fn split_path_is_nested_split() {
        let r = SplitRng::new(11);
        assert_eq!(r.split_path(&[2, 5]).seed(), r.split(2).split(5).seed());
    }
}
