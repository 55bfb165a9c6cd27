//! Seeded PCG32 stream used for every random draw in the engine.

use alloc::format;
use alloc::vec::Vec;

use rand_core::Rng as _;
use rand_pcg::Pcg32;

use crate::{Error, Result, Tensor};

/// Stream selector used by [`Rng::new`].
pub const DEFAULT_STREAM: u64 = 0xa02b_dbf7_bb3c_8d;

/// PCG-XSH-RR 64/32 generator together with the seed that created it.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: Pcg32,
    seed: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, DEFAULT_STREAM)
    }

    /// Independent stream for the same seed (e.g. one per epoch).
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        Self { inner: Pcg32::new(seed, stream), seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    /// Uniform in `[0, 1)` with 53 random bits (high word drawn first).
    pub fn next_f64(&mut self) -> f64 {
        let hi = u64::from(self.next_u32());
        let lo = u64::from(self.next_u32());
        let bits = ((hi << 32) | lo) >> 11;
        bits as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)` by rejection; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0 && n <= u32::MAX as usize, "below({n})");
        let n = n as u32;
        let zone = u32::MAX - (u32::MAX - n + 1) % n;
        loop {
            let v = self.next_u32();
            if v <= zone {
                return (v % n) as usize;
            }
        }
    }

    pub fn uniform_scalar(&mut self, lo: f64, hi: f64) -> f64 {
        let v = lo + (hi - lo) * self.next_f64();
        // rounding can land exactly on `hi` for narrow intervals
        if v >= hi {
            lo
        } else {
            v
        }
    }

    /// I.i.d. values in `[lo, hi)`.
    pub fn uniform(&mut self, shape: &[usize], lo: f64, hi: f64) -> Result<Tensor> {
        if !(lo < hi) {
            return Err(Error::Argument(format!("uniform range requires lo < hi, got [{lo}, {hi})")));
        }
        let n = shape.iter().product();
        let data = (0..n).map(|_| self.uniform_scalar(lo, hi)).collect();
        Tensor::new(shape, data)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }
}
