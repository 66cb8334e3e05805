//! Ground sets and subset states.
//!
//! Subsets are machine-word bit vectors: element `v` of `{0, …, n-1}` is a
//! member iff bit `v` is set. This caps the sampling core at `n ≤ 64`, which
//! covers every model this crate targets, and makes membership flips O(1).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest ground set representable by the bit-vector state.
pub const MAX_GROUND_SIZE: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroundSetError {
    #[error("ground set must have at least one element")]
    Empty,
    #[error("ground set size {0} exceeds the supported maximum of {MAX_GROUND_SIZE}")]
    TooLarge(usize),
}

/// The finite universe `{0, …, n-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundSet {
    n: usize,
}

impl GroundSet {
    pub fn new(n: usize) -> Result<Self, GroundSetError> {
        if n == 0 {
            Err(GroundSetError::Empty)
        } else if n > MAX_GROUND_SIZE {
            Err(GroundSetError::TooLarge(n))
        } else {
            Ok(GroundSet { n })
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// All `2^n` subsets in increasing bitmask order. Only sensible at
    /// enumeration scale.
    pub fn subsets(&self) -> impl Iterator<Item = Subset> {
        (0u64..(1u64 << self.n)).map(Subset::from_bits)
    }

    /// All subsets of cardinality `k`, in increasing bitmask order.
    pub fn subsets_of_size(&self, k: usize) -> Vec<Subset> {
        let n = self.n;
        assert!(k <= n, "requested size {k} exceeds ground set size {n}");
        if k == 0 {
            return vec![Subset::EMPTY];
        }
        let mut out = Vec::new();
        // Gosper's hack walks same-popcount masks in increasing order.
        let mut v: u64 = (1u64 << k) - 1;
        let limit: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        loop {
            out.push(Subset::from_bits(v));
            if v == 0 || (n < 64 && v > limit) {
                break;
            }
            let t = v | (v - 1);
            if t == u64::MAX {
                break;
            }
            let next = (t + 1) | (((!t & (t + 1)) - 1) >> (v.trailing_zeros() + 1));
            if next > limit {
                break;
            }
            v = next;
        }
        out
    }

    /// A subset drawn uniformly from all `2^n` subsets.
    pub fn random_subset<R: Rng + ?Sized>(&self, rng: &mut R) -> Subset {
        let mask = if self.n == 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        };
        Subset::from_bits(rng.random::<u64>() & mask)
    }

    /// A subset of cardinality `k` drawn uniformly from all `C(n, k)` of them.
    pub fn random_subset_of_size<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Subset {
        assert!(k <= self.n);
        // Partial Fisher-Yates over element indices.
        let mut idx: Vec<usize> = (0..self.n).collect();
        let mut s = Subset::EMPTY;
        for i in 0..k {
            let j = rng.random_range(i..self.n);
            idx.swap(i, j);
            s.insert(idx[i]);
        }
        s
    }
}

/// A subset of the ground set, stored as a 64-bit membership mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Subset(u64);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn from_bits(bits: u64) -> Self {
        Subset(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// The full set `{0, …, n-1}`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_GROUND_SIZE);
        if n == 64 {
            Subset(u64::MAX)
        } else {
            Subset((1u64 << n) - 1)
        }
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(members: I) -> Self {
        let mut s = Subset::EMPTY;
        for v in members {
            s.insert(v);
        }
        s
    }

    pub fn contains(self, v: usize) -> bool {
        debug_assert!(v < MAX_GROUND_SIZE);
        self.0 >> v & 1 == 1
    }

    pub fn insert(&mut self, v: usize) {
        debug_assert!(v < MAX_GROUND_SIZE);
        self.0 |= 1 << v;
    }

    pub fn remove(&mut self, v: usize) {
        debug_assert!(v < MAX_GROUND_SIZE);
        self.0 &= !(1 << v);
    }

    pub fn toggled(self, v: usize) -> Self {
        debug_assert!(v < MAX_GROUND_SIZE);
        Subset(self.0 ^ (1 << v))
    }

    pub fn with(self, v: usize) -> Self {
        Subset(self.0 | (1 << v))
    }

    pub fn without(self, v: usize) -> Self {
        Subset(self.0 & !(1 << v))
    }

    /// Number of members.
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn complement(self, n: usize) -> Self {
        Subset(!self.0 & Subset::full(n).0)
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    /// Member indices in increasing order.
    pub fn members(self) -> Members {
        Members(self.0)
    }

    /// The `i`-th member in increasing order. Panics if out of range.
    pub fn nth_member(self, i: usize) -> usize {
        let mut bits = self.0;
        for _ in 0..i {
            bits &= bits - 1;
        }
        debug_assert!(bits != 0, "member index out of range");
        bits.trailing_zeros() as usize
    }

    /// True iff every member index is below `n`.
    pub fn fits(self, n: usize) -> bool {
        self.is_subset_of(Subset::full(n))
    }
}

/// Iterator over member indices, ascending.
pub struct Members(u64);

impl Iterator for Members {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            let v = self.0.trailing_zeros() as usize;
            self.0 &= self.0 - 1;
            Some(v)
        }
    }
}

impl std::fmt::Display for Subset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.members().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}
