//! Deterministic portable PRNG: PCG32 (XSH-RR 64/32 variant).
//!
//! Every stochastic step in the crate (splits, weight init, dropout,
//! augmentation, synthesis) draws from this generator, so a run is fully
//! determined by its seed on every platform. Parallel consumers never share a
//! generator; they receive decorrelated child streams via [`Pcg32::derive`].

/// PCG32 state: a 64-bit LCG state plus an odd stream-selector increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pcg32 {
    state: u64,
    inc: u64,
}

const PCG_MULT: u64 = 6364136223846793005;

impl Pcg32 {
    /// Seed with an initial state and a stream id, following the reference
    /// seeding procedure (advance, add state, advance).
    pub fn seed(initstate: u64, initseq: u64) -> Self {
        let mut rng = Pcg32 {
            state: 0,
            inc: (initseq << 1) | 1,
        };
        rng.next_u32();
        rng.state = rng.state.wrapping_add(initstate);
        rng.next_u32();
        rng
    }

    /// Next raw 32-bit output (xorshift-high, then a data-dependent rotate).
    pub fn next_u32(&mut self) -> u32 {
        let old = self.state;
        self.state = old.wrapping_mul(PCG_MULT).wrapping_add(self.inc);
        let xorshifted = (((old >> 18) ^ old) >> 27) as u32;
        let rot = (old >> 59) as u32;
        xorshifted.rotate_right(rot)
    }

    /// Uniform variate in `[0, 1)`: `next_u32() / 2^32`.
    pub fn next_f64(&mut self) -> f64 {
        self.next_u32() as f64 / 4294967296.0
    }

    /// Uniform variate in `[lo, hi)`.
    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)` via the multiply-shift reduction.
    pub fn below(&mut self, n: u32) -> u32 {
        ((self.next_u32() as u64 * n as u64) >> 32) as u32
    }

    /// Standard normal variate (Box-Muller, cosine branch).
    pub fn next_gaussian(&mut self) -> f64 {
        // 1 - u keeps the argument of ln strictly positive.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i as u32 + 1) as usize;
            xs.swap(i, j);
        }
    }

    /// Derive a decorrelated child stream from `(self, tag)` without advancing
    /// `self`. Pure: the same parent state and tag always yield the same child.
    pub fn derive(&self, tag: u64) -> Pcg32 {
        let s = splitmix64(self.state ^ splitmix64(tag ^ 0x9e37_79b9_7f4a_7c15));
        let q = splitmix64(self.inc ^ splitmix64(tag.wrapping_mul(0xda94_2042_e4dd_58b5)));
        Pcg32::seed(s, q)
    }
}

/// SplitMix64 finalizer; used only for child-stream derivation.
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
