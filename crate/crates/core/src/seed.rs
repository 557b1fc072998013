use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Root of all randomness in a run.
///
/// Consumers never share a generator. Each one derives its own seed from the
/// root with a string tag (and optionally an index), so a stage's random
/// stream does not depend on which other stages ran before it or in what
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Seed(pub u64);

impl Seed {
    pub const fn new(value: u64) -> Self {
        Seed(value)
    }

    pub const fn value(self) -> u64 {
        self.0
    }

    /// Child seed for the consumer named `tag`.
    pub fn derive(self, tag: &str) -> Seed {
        Seed(splitmix64(self.0 ^ fnv1a(tag.as_bytes())))
    }

    /// Child seed for element `index` of the consumer named `tag`.
    pub fn derive_indexed(self, tag: &str, index: u64) -> Seed {
        let base = self.derive(tag).0;
        Seed(splitmix64(
            base ^ splitmix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)),
        ))
    }

    /// Portable generator: ChaCha8 output is stable across platforms and
    /// crate releases, unlike `StdRng`.
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(value: u64) -> Self {
        Seed(value)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
