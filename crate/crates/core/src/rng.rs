//! Seeded, labelled random streams.
//!
//! Every random quantity in the crate (Cauchy entries, grid offsets, LSH
//! samples, synthetic datasets) is drawn from a [`RandomSeed`]. A seed is a
//! 64-bit value plus a stream label; the pair is hashed into a ChaCha key, so
//! two seeds that differ in either component produce unrelated streams, and
//! the same pair always reproduces the same stream. Child streams are
//! obtained with [`RandomSeed::derive`], which lets independent pieces of work
//! (tables, repetitions, Monte-Carlo blocks) draw from disjoint substreams
//! without sharing a generator.

use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// The generator behind every stream.
pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomSeed {
    value: u64,
    #[serde(default)]
    stream: String,
}

impl RandomSeed {
    pub fn new(value: u64) -> Self {
        Self {
            value,
            stream: String::new(),
        }
    }

    pub fn with_stream(value: u64, stream: impl Into<String>) -> Self {
        Self {
            value,
            stream: stream.into(),
        }
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn stream(&self) -> &str {
        &self.stream
    }

    /// A child stream named `label` under this one.
    pub fn derive(&self, label: &str) -> RandomSeed {
        let stream = if self.stream.is_empty() {
            label.to_owned()
        } else {
            format!("{}/{}", self.stream, label)
        };
        RandomSeed {
            value: self.value,
            stream,
        }
    }

    pub fn derive_indexed(&self, label: &str, index: u64) -> RandomSeed {
        self.derive(&format!("{label}#{index}"))
    }

    pub fn rng(&self) -> StreamRng {
        let mut hasher = Sha256::new();
        hasher.update(self.value.to_le_bytes());
        hasher.update((self.stream.len() as u64).to_le_bytes());
        hasher.update(self.stream.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        StreamRng::from_seed(key)
    }
}

impl fmt::Display for RandomSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.stream.is_empty() {
            write!(f, "{}", self.value)
        } else {
            write!(f, "{}:{}", self.value, self.stream)
        }
    }
}

/// Uniform draw from the open interval (0, 1) with 53 bits of resolution.
#[inline]
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw from [0, 1).
#[inline]
pub fn half_open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `0..bound` (`bound > 0`), by rejection.
#[inline]
pub fn below<R: RngCore + ?Sized>(rng: &mut R, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX - bound + 1) % bound;
    loop {
        let x = rng.next_u64();
        if x <= zone {
            return x % bound;
        }
    }
}
