//! Counter-based seed derivation.
//!
//! Every stochastic operation takes a [`Seed`] and is a pure function of it.
//! Replica streams are derived as `master -> (module, replica)` so that runs
//! parallelize embarrassingly and replica k never changes when the replica
//! count grows.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Opaque 64-bit seed value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

/// Stable identifiers for the seed streams of each subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Paths = 1,
    Loewner = 2,
    Sle = 3,
    Cle = 4,
    Tvs = 5,
    Dgff = 6,
    Harness = 7,
    Cli = 8,
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl Seed {
    /// Derive the replica seed for `(module, replica)` under this master seed.
    pub fn derive(self, module: Stream, replica: u64) -> Seed {
        let mut s = self.0 ^ (module as u64).wrapping_mul(0xA076_1D64_78BD_642F);
        let _ = splitmix64(&mut s);
        s ^= replica.wrapping_mul(0xE703_7ED1_A0B4_28DB);
        Seed(splitmix64(&mut s))
    }

    /// Extra split level for operations that consume several independent
    /// streams internally.
    pub fn split(self, tag: u64) -> Seed {
        let mut s = self.0 ^ tag.wrapping_mul(0x8EBC_6AF0_9C88_C6E3);
        Seed(splitmix64(&mut s))
    }

    /// Deterministic RNG for this seed.
    pub fn rng(self) -> ChaCha8Rng {
        let mut s = self.0;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}
