//! Deterministic RNG streams.
//!
//! Every random decision in a run is drawn from a stream addressed by
//! `(root seed, domain, a, b)`. Streams are independent of scheduling, so a
//! trajectory is a pure function of the root seed no matter how many worker
//! threads execute it.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// Labels for the disjoint randomness domains of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    DataGen = 1,
    ParamInit = 2,
    CohortSelect = 3,
    ClientOrder = 4,
    AggregateNoise = 5,
    CanaryInit = 6,
    MockSelect = 7,
    TrialCohort = 8,
    TrialNoise = 9,
}

/// A node in the seed tree. Copy-cheap; derive children instead of sharing
/// RNG state across tasks.
#[derive(Debug, Clone, Copy)]
pub struct SeedTree {
    root: u64,
}

// SplitMix64 step: the standard finalizer used to decorrelate seed material.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SeedTree {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    fn mix(&self, domain: StreamDomain, a: u64, b: u64) -> u64 {
        let mut state = self.root;
        let mut acc = splitmix64(&mut state);
        for word in [domain as u64, a, b] {
            state ^= word.wrapping_mul(0xff51_afd7_ed55_8ccd);
            acc ^= splitmix64(&mut state);
        }
        acc
    }

    /// Child tree for a sub-experiment (e.g. one attack episode).
    pub fn derive(&self, domain: StreamDomain, a: u64, b: u64) -> SeedTree {
        SeedTree {
            root: self.mix(domain, a, b),
        }
    }

    /// Fresh RNG for the addressed stream.
    pub fn stream(&self, domain: StreamDomain, a: u64, b: u64) -> ChaCha8Rng {
        let mut state = self.mix(domain, a, b);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}
