//! Seeded, splittable randomness.
//!
//! Every logical entity in a simulation (a voter, an attacker, a trial's
//! population draw) owns its own [`RngHandle`], derived from the master seed
//! and a path of integers naming the entity. Results therefore do not depend
//! on the order in which entities are processed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic uniform source: identical seed and path give an identical stream.
#[derive(Debug, Clone)]
pub struct RngHandle(ChaCha8Rng);

impl RngHandle {
    pub fn from_seed(seed: u64) -> Self {
        Self::derive(seed, &[])
    }

    /// Derives an independent stream for the entity named by `path` under `master`.
    pub fn derive(master: u64, path: &[u64]) -> Self {
        let mut state = splitmix64(master);
        for &p in path {
            state = splitmix64(state ^ splitmix64(p.wrapping_add(GOLDEN_GAMMA)));
        }
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Self(ChaCha8Rng::from_seed(seed))
    }

    /// Child stream of this handle's own sequence; consumes one word.
    pub fn split(&mut self, label: u64) -> Self {
        let base = self.0.next_u64();
        Self::derive(base, &[label])
    }
}

impl RngCore for RngHandle {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}
