//! Seeded random streams.
//!
//! Every stochastic component draws from its own splitmix64 stream whose
//! seed is the little-endian first 8 bytes of
//! `SHA-256(decimal(master_seed) + "|" + path)`.

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

pub fn stream_seed(master_seed: u64, path: &str) -> u64 {
    let digest = Sha256::digest(format!("{master_seed}|{path}").as_bytes());
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

/// A named stream; one uniform draw per stochastic decision.
#[derive(Debug, Clone)]
pub struct RngStream {
    path: String,
    rng: SplitMix64,
    draws: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, path: impl Into<String>) -> Self {
        let path = path.into();
        RngStream {
            rng: SplitMix64::new(stream_seed(master_seed, &path)),
            path,
            draws: 0,
        }
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn next_f64(&mut self) -> f64 {
        self.draws += 1;
        self.rng.next_f64()
    }
}
