//! Seeded, splittable random streams.
//!
//! Each sample index gets its own ChaCha stream, so batches are reproducible
//! no matter how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngSeed {
    /// Independent child seed for a labelled purpose (trial, test set, ...).
    pub fn derive(self, tag: u64) -> RngSeed {
        RngSeed(splitmix(self.0 ^ splitmix(tag)))
    }

    /// Generator for sample `index` of this seed.
    pub fn stream(self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(index);
        rng
    }
}

impl From<u64> for RngSeed {
    fn from(s: u64) -> Self {
        RngSeed(s)
    }
}
