//! Counter-based random streams.
//!
//! Every random draw in a campaign is addressed by `(master seed, run stream,
//! write index)`. A run owns its [`RunStream`]; each NVM write opens a fresh
//! ChaCha stream from that address, so results do not depend on how runs are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over a byte string. Used to turn names into stable stream ids.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Folds a sequence of words into one well-mixed key.
pub fn derive(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243f_6a88_85a3_08d3, |acc, &p| mix64(acc ^ mix64(p)))
}

/// The random stream owned by one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunStream {
    master: u64,
    stream: u64,
}

impl RunStream {
    pub fn new(master: u64, stream: u64) -> Self {
        Self { master, stream }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Generator for the `index`-th NVM write of this run.
    pub fn for_write(&self, index: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream.to_le_bytes());
        key[16..24].copy_from_slice(&mix64(self.master ^ self.stream.rotate_left(17)).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }

    /// Generator for auxiliary draws (input generation and the like) tagged by `purpose`.
    pub fn for_purpose(&self, purpose: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive(&[self.master, self.stream, stable_hash(purpose.as_bytes())]))
    }
}
