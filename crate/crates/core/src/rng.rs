//! Counter-based random streams.
//!
//! A stream is addressed by `(master_seed, stream_index)` and its position by
//! a 128-bit word counter; the ChaCha8 block function maps these to output
//! words, so any stream can be replayed from any position. Sample `i` of an
//! estimator draws from its own stream, which makes results independent of
//! how samples are partitioned across workers.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// `3^20`, the largest power of three below `2^32`.
const TRITS_PER_WORD: u8 = 20;
const POW3_20: u64 = 3_486_784_401;
/// Lemire rejection threshold: `2^32 mod 3^20`.
const TRIT_REJECT: u32 = ((1u64 << 32) % POW3_20) as u32;

/// Outcome of a uniform choice among the three out-neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Up,
    Down,
    Horizontal,
}

impl Move {
    #[inline(always)]
    fn from_trit(t: u8) -> Move {
        match t {
            0 => Move::Up,
            1 => Move::Down,
            _ => Move::Horizontal,
        }
    }
}

#[derive(Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    core: ChaCha8Rng,
    trits: u32,
    trits_left: u8,
    bits: u32,
    bits_left: u8,
}

impl std::fmt::Debug for RngStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RngStream")
            .field("master_seed", &self.master_seed)
            .field("stream_index", &self.stream_index)
            .field("counter", &self.counter())
            .finish()
    }
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut core = ChaCha8Rng::seed_from_u64(master_seed);
        core.set_stream(stream_index);
        RngStream {
            master_seed,
            stream_index,
            core,
            trits: 0,
            trits_left: 0,
            bits: 0,
            bits_left: 0,
        }
    }

    /// A stream positioned at word `counter`, with empty sub-word buffers.
    pub fn at(master_seed: u64, stream_index: u64, counter: u128) -> Self {
        let mut s = Self::new(master_seed, stream_index);
        s.core.set_word_pos(counter);
        s
    }

    /// A sibling stream of the same master seed.
    pub fn derive(&self, stream_index: u64) -> Self {
        Self::new(self.master_seed, stream_index)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Number of 32-bit words consumed from the underlying block function.
    pub fn counter(&self) -> u128 {
        self.core.get_word_pos()
    }

    #[inline]
    pub fn next_u32(&mut self) -> u32 {
        self.core.next_u32()
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.core.next_u64()
    }

    /// Uniform on `{0, 1, 2}`, exactly.
    ///
    /// Words are turned into twenty base-3 digits by Lemire's
    /// multiply-and-reject map onto `[0, 3^20)`, which is unbiased.
    #[inline(always)]
    pub fn trit(&mut self) -> u8 {
        if self.trits_left == 0 {
            self.refill_trits();
        }
        let t = self.trits % 3;
        self.trits /= 3;
        self.trits_left -= 1;
        t as u8
    }

    #[cold]
    fn refill_trits(&mut self) {
        loop {
            let m = self.core.next_u32() as u64 * POW3_20;
            if (m as u32) >= TRIT_REJECT {
                self.trits = (m >> 32) as u32;
                self.trits_left = TRITS_PER_WORD;
                return;
            }
        }
    }

    #[inline(always)]
    pub fn choose_move(&mut self) -> Move {
        Move::from_trit(self.trit())
    }

    #[inline(always)]
    pub fn bit(&mut self) -> bool {
        if self.bits_left == 0 {
            self.bits = self.core.next_u32();
            self.bits_left = 32;
        }
        let b = self.bits & 1 == 1;
        self.bits >>= 1;
        self.bits_left -= 1;
        b
    }

    /// Uniform `±1`.
    #[inline(always)]
    pub fn rademacher(&mut self) -> i64 {
        if self.bit() {
            1
        } else {
            -1
        }
    }

    /// Number of failures before the first success, success probability `2/3`.
    ///
    /// Counts horizontal outcomes of the three-way choice until a vertical
    /// one appears, so `P(k) = (2/3)(1/3)^k` exactly.
    #[inline]
    pub fn geometric_two_thirds(&mut self) -> u64 {
        let mut k = 0;
        while self.trit() == 2 {
            k += 1;
        }
        k
    }

    /// Uniform double in `[0, 1)` with 53 random bits.
    pub fn uniform_f64(&mut self) -> f64 {
        (self.core.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`, exact.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let reject = n.wrapping_neg() % n;
        loop {
            let m = self.core.next_u64() as u128 * n as u128;
            if (m as u64) >= reject {
                return (m >> 64) as u64;
            }
        }
    }
}

/// Stream index layout shared by all estimators:
/// `tag << 56 | group << 32 | sample`, with `group` the environment
/// ordinal in two-level ensembles.
pub fn stream_id(tag: u8, group: u32, sample: u32) -> u64 {
    ((tag as u64) << 56) | ((group as u64 & 0x00FF_FFFF) << 32) | sample as u64
}

pub const STREAM_LAYOUT: &str = "chacha8(master_seed), stream = tag<<56 | env_ordinal<<32 | sample_index";

pub mod tags {
    pub const WALK: u8 = 1;
    pub const SKELETON: u8 = 2;
    pub const SIGMA: u8 = 3;
    pub const TAIL: u8 = 4;
    pub const SERIES_O: u8 = 5;
    pub const LAW: u8 = 6;
    pub const EXCURSION: u8 = 7;
    pub const GRAPH: u8 = 8;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_is_exact() {
        let mut a = RngStream::new(42, 7);
        let mut b = RngStream::new(42, 7);
        for _ in 0..1000 {
            assert_eq!(a.trit(), b.trit());
            assert_eq!(a.bit(), b.bit());
        }
        let mut c = RngStream::at(42, 7, 1234);
        let mut d = RngStream::at(42, 7, 1234);
        assert_eq!(c.counter(), 1234);
        assert_eq!(c.choose_move(), d.choose_move());
    }

    #[test]
    fn distinct_streams_differ() {
        let a: Vec<u32> = {
            let mut s = RngStream::new(1, 0);
            (0..8).map(|_| s.next_u32()).collect()
        };
        let b: Vec<u32> = {
            let mut s = RngStream::new(1, 1);
            (0..8).map(|_| s.next_u32()).collect()
        };
        assert_ne!(a, b);
    }

    #[test]
    fn trit_threshold() {
        assert_eq!(TRIT_REJECT as u64, (1u64 << 32) - POW3_20);
    }

    #[test]
    fn stream_id_layout() {
        assert_eq!(stream_id(1, 2, 3), (1 << 56) | (2 << 32) | 3);
    }

    #[test]
    fn below_is_in_range() {
        let mut s = RngStream::new(3, 3);
        for n in 1..50 {
            for _ in 0..20 {
                assert!(s.below(n) < n);
            }
        }
    }
}
