//! Seed management: one run seed fans out to independent per-consumer streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives named RNG streams from a single run seed, so any component
/// (init, data sampling, batching, eval pairing) is reproducible in isolation.
#[derive(Debug, Clone, Copy)]
pub struct SeedStream {
    seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream for a named consumer. The same (seed, name) pair always yields
    /// the same stream regardless of what other consumers exist.
    pub fn stream(&self, name: &str) -> ChaCha8Rng {
        self.stream_indexed(name, 0)
    }

    /// Indexed variant for per-item streams (one per sample, per draw, ...).
    pub fn stream_indexed(&self, name: &str, index: u64) -> ChaCha8Rng {
        let mut state = splitmix(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        for &b in name.as_bytes() {
            state = splitmix(state ^ u64::from(b));
        }
        state = splitmix(state ^ index.wrapping_mul(0xff51_afd7_ed55_8ccd));
        let mut key = [0u8; 32];
        let mut s = state;
        for chunk in key.chunks_mut(8) {
            s = splitmix(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
