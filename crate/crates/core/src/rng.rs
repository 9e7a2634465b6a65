//! Counter-based random streams and hierarchical seed derivation.
//!
//! Every random quantity in the simulator is a pure function of a 64-bit
//! stream key and a counter, evaluated with Philox4x64-10 (the Random123
//! generator). Stream keys come from a master seed and a labelled path:
//!
//! ```text
//! seed = first 8 bytes (little endian) of
//!        SHA-256( "sqe-lab/derive-seed/v1\0"
//!                 || master as u64 LE
//!                 || for each path element:
//!                      label: 0x01 || len as u64 LE || UTF-8 bytes
//!                      index: 0x02 || value as u64 LE )
//! ```
//!
//! The encoding is prefix free, so distinct paths hash distinct messages.
//! A seed depends only on its own path, never on which sibling paths were
//! derived before it, so trial loops can run in any order.

use rand_core::RngCore;
use sha2::{Digest, Sha256};

/// Name of the project-wide generator, recorded in every run summary.
pub const GENERATOR_NAME: &str = "philox4x64-10";
/// Name and version of the seed-derivation scheme.
pub const SEED_DERIVATION: &str = "sha256-path/v1";

const DOMAIN_TAG: &[u8] = b"sqe-lab/derive-seed/v1\0";

const PHILOX_M0: u64 = 0xD2E7_470E_E14C_6C93;
const PHILOX_M1: u64 = 0xCA5A_8263_9512_1157;
const PHILOX_W0: u64 = 0x9E37_79B9_7F4A_7C15;
const PHILOX_W1: u64 = 0xBB67_AE85_84CA_A73B;

#[inline(always)]
fn mulhilo(a: u64, b: u64) -> (u64, u64) {
    let p = (a as u128) * (b as u128);
    ((p >> 64) as u64, p as u64)
}

/// One Philox4x64 block with 10 rounds.
#[inline]
pub fn philox4x64_10(counter: [u64; 4], key: [u64; 2]) -> [u64; 4] {
    let mut x = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, x[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, x[2]);
        x = [hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0];
    }
    x
}

/// Maps 64 random bits to a uniform double in `[0, 1)` using the top 53 bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// One element of a seed-derivation path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PathElem<'a> {
    Label(&'a str),
    Index(u64),
}

impl<'a> From<&'a str> for PathElem<'a> {
    fn from(s: &'a str) -> Self {
        PathElem::Label(s)
    }
}

impl From<u64> for PathElem<'_> {
    fn from(v: u64) -> Self {
        PathElem::Index(v)
    }
}

impl From<u32> for PathElem<'_> {
    fn from(v: u32) -> Self {
        PathElem::Index(v as u64)
    }
}

impl From<usize> for PathElem<'_> {
    fn from(v: usize) -> Self {
        PathElem::Index(v as u64)
    }
}

/// An incrementally hashed derivation path.
///
/// Cloning a `SeedPath` shares the hashed prefix, which keeps per-trial
/// derivations cheap inside long loops.
#[derive(Clone)]
pub struct SeedPath {
    hasher: Sha256,
    depth: usize,
}

impl std::fmt::Debug for SeedPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SeedPath").field("depth", &self.depth).finish_non_exhaustive()
    }
}

impl SeedPath {
    pub fn root(master: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN_TAG);
        hasher.update(master.to_le_bytes());
        SeedPath { hasher, depth: 0 }
    }

    pub fn push<'a>(&mut self, elem: impl Into<PathElem<'a>>) {
        match elem.into() {
            PathElem::Label(s) => {
                self.hasher.update([0x01]);
                self.hasher.update((s.len() as u64).to_le_bytes());
                self.hasher.update(s.as_bytes());
            }
            PathElem::Index(v) => {
                self.hasher.update([0x02]);
                self.hasher.update(v.to_le_bytes());
            }
        }
        self.depth += 1;
    }

    /// Returns a copy of this path extended by one element.
    pub fn child<'a>(&self, elem: impl Into<PathElem<'a>>) -> Self {
        let mut next = self.clone();
        next.push(elem);
        next
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Finalizes the path into a 64-bit seed.
    ///
    /// # Panics
    /// Panics on an empty path.
    pub fn seed(&self) -> u64 {
        assert!(self.depth > 0, "seed derivation path must be non-empty");
        let digest = self.hasher.clone().finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(bytes)
    }

    pub fn stream(&self) -> CounterStream {
        CounterStream::new(self.seed())
    }
}

/// Derives the seed for `path` under `master`.
///
/// # Panics
/// Panics if `path` is empty.
pub fn derive_seed(master: u64, path: &[PathElem<'_>]) -> u64 {
    let mut p = SeedPath::root(master);
    for &elem in path {
        p.push(elem);
    }
    p.seed()
}

/// Random access into the Philox stream keyed by a 64-bit seed.
///
/// Word `i` of the stream is lane `i % 4` of the block at counter `i / 4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterStream {
    key: u64,
}

impl CounterStream {
    pub const fn new(key: u64) -> Self {
        CounterStream { key }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    #[inline]
    pub fn block(&self, index: u64) -> [u64; 4] {
        philox4x64_10([index, 0, 0, 0], [self.key, 0])
    }

    #[inline]
    pub fn word(&self, i: u64) -> u64 {
        self.block(i / 4)[(i % 4) as usize]
    }

    #[inline]
    pub fn unit(&self, i: u64) -> f64 {
        unit_f64(self.word(i))
    }

    /// Calls `f(i, u_i)` for the first `n` uniforms of the stream, computing
    /// each block once.
    #[inline]
    pub fn for_each_unit(&self, n: usize, mut f: impl FnMut(usize, f64)) {
        let mut i = 0usize;
        let mut block_index = 0u64;
        while i < n {
            let block = self.block(block_index);
            for &w in block.iter().take(n - i) {
                f(i, unit_f64(w));
                i += 1;
            }
            block_index += 1;
        }
    }

    pub fn units(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        self.for_each_unit(n, |_, u| out.push(u));
        out
    }

    /// A sequential generator reading this stream from word 0.
    pub fn rng(&self) -> StreamRng {
        StreamRng {
            stream: *self,
            block_index: 0,
            buffer: [0; 4],
            pos: 4,
        }
    }
}

/// Sequential reader over a [`CounterStream`], usable with `rand_distr`.
#[derive(Clone, Debug)]
pub struct StreamRng {
    stream: CounterStream,
    block_index: u64,
    buffer: [u64; 4],
    pos: usize,
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        if self.pos == 4 {
            self.buffer = self.stream.block(self.block_index);
            self.block_index += 1;
            self.pos = 0;
        }
        let w = self.buffer[self.pos];
        self.pos += 1;
        w
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
