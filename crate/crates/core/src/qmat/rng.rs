use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Deterministic tree of random substreams.
///
/// A stream is identified by its root seed and a path of indices; each child
/// key is a SplitMix64 mix of the parent key and the index, so sample `i` of a
/// Monte Carlo loop draws the same numbers regardless of worker count or the
/// order in which samples are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStream {
    key: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream {
            key: splitmix(seed),
        }
    }

    pub fn child(&self, index: u64) -> Self {
        SeedStream {
            key: splitmix(self.key ^ splitmix(index.wrapping_add(0x632b_e59b_d9b4_e019))),
        }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(self.key)
    }
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
