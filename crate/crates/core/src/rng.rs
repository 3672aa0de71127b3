//! Seed derivation.
//!
//! Every random quantity is drawn from a ChaCha8 stream whose seed is a pure
//! function of a user-supplied root seed and a path of labels. Forking never
//! consumes state from the parent, so substreams are independent of the
//! order in which work units are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a, stable across platforms and compiler versions.
fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A node in the seed derivation tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    key: u64,
}

impl SeedStream {
    pub fn new(root: u64) -> Self {
        Self { key: mix(root) }
    }

    pub fn fork(&self, label: &str) -> Self {
        Self {
            key: mix(self.key ^ mix(label_hash(label))),
        }
    }

    pub fn fork_index(&self, label: &str, index: u64) -> Self {
        let labelled = self.fork(label);
        Self {
            key: mix(labelled.key ^ mix(index.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }

    /// A derived 64-bit seed, e.g. for passing to a component that takes a plain seed.
    pub fn seed(&self) -> u64 {
        self.key
    }

    pub fn rng(&self) -> Rng {
        Rng::seed_from_u64(self.key)
    }
}
