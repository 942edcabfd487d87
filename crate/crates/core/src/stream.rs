//! Deterministic random streams.
//!
//! Every stochastic subsystem owns its own stream, derived from the
//! experiment seed, the run index and a label. Streams never share state, so
//! one subsystem drawing more never shifts another subsystem's draws.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Which subsystem a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamId {
    Market,
    Agents,
    Choice,
    Delivery,
}

impl StreamId {
    pub const ALL: [StreamId; 4] = [
        StreamId::Market,
        StreamId::Agents,
        StreamId::Choice,
        StreamId::Delivery,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StreamId::Market => "market",
            StreamId::Agents => "agents",
            StreamId::Choice => "choice",
            StreamId::Delivery => "delivery",
        }
    }

    fn tag(self) -> u64 {
        // FNV-1a over the label keeps the tag stable if variants are reordered.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.label().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A seeded, single-owner random source.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: StreamId,
    rng: ChaCha8Rng,
}

/// Derives the stream for `(seed, run_index, stream_id)`.
pub fn derive_stream(seed: u64, run_index: usize, stream_id: StreamId) -> RandomStream {
    let mixed = splitmix64(splitmix64(splitmix64(seed) ^ run_index as u64) ^ stream_id.tag());
    RandomStream {
        seed,
        stream_id,
        rng: ChaCha8Rng::seed_from_u64(mixed),
    }
}

impl RandomStream {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> StreamId {
        self.stream_id
    }

    /// Uniform on `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform on `[lo, hi]`; a collapsed range returns `lo` but still
    /// consumes one draw so stream alignment does not depend on the config.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = self.next_f64();
        if hi > lo {
            lo + u * (hi - lo)
        } else {
            lo
        }
    }

    /// Uniform integer on `lo..=hi`, one draw.
    pub fn uniform_int(&mut self, lo: u32, hi: u32) -> u32 {
        let u = self.next_f64();
        let span = (hi - lo) as f64 + 1.0;
        lo + ((u * span) as u32).min(hi - lo)
    }

    /// Uniform index into `0..n`, one draw. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        let u = self.next_f64();
        ((u * n as f64) as usize).min(n - 1)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Binomial count by `trials` Bernoulli draws; always consumes `trials` draws.
    pub fn binomial(&mut self, trials: u32, p: f64) -> u32 {
        (0..trials).filter(|_| self.bernoulli(p)).count() as u32
    }
}
