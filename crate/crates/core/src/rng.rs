//! Seed derivation and draw helpers shared by the generator and the engine.
//!
//! Every random decision in the protocol consumes exactly one `u64` draw, so
//! runs are reproducible across implementations given the same stream.

use rand::{Error, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator used for trials unless a stub is requested.
pub type TrialRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-trial seed: `splitmix64(master + GAMMA * (index + 1))`.
pub fn mix_seed(master_seed: u64, trial_index: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(trial_index.wrapping_add(1))))
}

pub fn trial_rng(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Inverse-CDF pick of a uniform index in `0..len` from one 64-bit draw.
pub fn uniform_index<R: RngCore + ?Sized>(rng: &mut R, len: usize) -> usize {
    debug_assert!(len > 0);
    ((u128::from(rng.next_u64()) * len as u128) >> 64) as usize
}

/// Returns the same word forever.
///
/// `ConstantRng::self_loop()` makes every transmission pick the last target
/// (the node itself) and every election draw pick `eta_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstantRng(pub u64);

impl ConstantRng {
    pub fn self_loop() -> Self {
        ConstantRng(u64::MAX)
    }
}

impl RngCore for ConstantRng {
    fn next_u32(&mut self) -> u32 {
        (self.0 >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.0
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.0.to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_loop_stub_picks_last_index() {
        let mut rng = ConstantRng::self_loop();
        for len in 1..50 {
            assert_eq!(uniform_index(&mut rng, len), len - 1);
        }
        assert_eq!(uniform_index(&mut ConstantRng(0), 7), 0);
    }

    #[test]
    fn uniform_index_is_roughly_uniform() {
        let mut rng = trial_rng(7);
        let mut counts = [0u32; 4];
        for _ in 0..40_000 {
            counts[uniform_index(&mut rng, 4)] += 1;
        }
        for c in counts {
            assert!((9_400..10_600).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn mixed_seeds_differ_and_are_stable() {
        assert_eq!(mix_seed(1, 0), mix_seed(1, 0));
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
        assert_ne!(mix_seed(1, 0), mix_seed(2, 0));
        // Reference value of the SplitMix64 finalizer.
        assert_eq!(splitmix64(0), 0);
        assert_eq!(mix_seed(0, 0), 0xE220_A839_7B1D_CDAF);
    }
}
