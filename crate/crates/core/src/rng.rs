//! Labeled deterministic randomness streams.
//!
//! Every party in the protocols owns a random source. Here each source is a
//! ChaCha20 generator keyed by SHA-256 of `(master_seed, label)`, so a run is
//! fully reproducible from one 64-bit seed while streams with different labels
//! are independent. Forking a stream derives a child whose label extends the
//! parent's; the child does not depend on how much of the parent was consumed.

use std::collections::HashSet;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::bits::{BitString, BitsError};

const DOMAIN: &[u8] = b"quantum-lottery/stream/v1";

#[derive(Clone, Debug)]
pub struct RandomStream {
    master_seed: u64,
    label: String,
    counter: u64,
    rng: ChaCha20Rng,
}

impl RandomStream {
    pub fn new(master_seed: u64, label: impl Into<String>) -> Self {
        let label = label.into();
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN);
        hasher.update(master_seed.to_be_bytes());
        hasher.update((label.len() as u64).to_be_bytes());
        hasher.update(label.as_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        Self {
            master_seed,
            label,
            counter: 0,
            rng: ChaCha20Rng::from_seed(key),
        }
    }

    /// Child stream labeled `"<parent>/<sub>"`.
    pub fn fork(&self, sub: impl AsRef<str>) -> Self {
        Self::new(self.master_seed, format!("{}/{}", self.label, sub.as_ref()))
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of 64-bit words drawn so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Next `n` bits of the stream.
    pub fn bits(&mut self, n: usize) -> Result<BitString, BitsError> {
        let mut out = BitString::zeros(n)?;
        let mut word = 0u64;
        for i in 0..n {
            if i % 64 == 0 {
                word = self.next_u64();
            }
            out.set(i, (word >> (63 - i % 64)) & 1 == 1);
        }
        Ok(out)
    }

    pub fn bit(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// True with probability `p` (clamped to `[0, 1]`).
    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            false
        } else if p >= 1.0 {
            true
        } else {
            self.unit() < p
        }
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.random_range(0..n)
    }

    /// `k` distinct indices from `0..n`, returned in ascending order.
    pub fn subset(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut picked = rand::seq::index::sample(self, n, k).into_vec();
        picked.sort_unstable();
        picked
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let word = self.next_u64().to_be_bytes();
            chunk.copy_from_slice(&word[..chunk.len()]);
        }
    }
}

/// Draws `width` bits until the value is not already in `existing`.
pub fn unique_id(
    stream: &mut RandomStream,
    existing: &HashSet<BitString>,
    width: usize,
) -> Result<BitString, BitsError> {
    loop {
        let candidate = stream.bits(width)?;
        if !existing.contains(&candidate) {
            return Ok(candidate);
        }
    }
}
