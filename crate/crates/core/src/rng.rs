//! Deterministic, hierarchically keyed random streams.
//!
//! Every random draw in a run is attributed to a [`StreamKey`] built from the
//! master seed plus a path of labels (iteration, particle, purpose, trial).
//! Workers never share a generator, so results are identical for any thread
//! count or scheduling order.

use rand::{RngCore, SeedableRng};
use rand_pcg::Pcg64Mcg;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Position in the tree of random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn root(master_seed: u64) -> Self {
        StreamKey(splitmix64(master_seed ^ 0x5eed_0f_a11_5eed))
    }

    /// Key of the sub-stream labelled `label`.
    #[inline]
    pub fn child(self, label: u64) -> Self {
        StreamKey(splitmix64(self.0 ^ splitmix64(label.wrapping_add(0x632b_e59b_d9b4_e019))))
    }

    #[inline]
    pub fn stream(self) -> RngStream {
        RngStream::from_key(self)
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

/// Single-owner pseudo-random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: Pcg64Mcg,
}

impl RngStream {
    /// Stream `stream_id` of `master_seed`.
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        StreamKey::root(master_seed).child(stream_id).stream()
    }

    #[inline]
    fn from_key(key: StreamKey) -> Self {
        let lo = splitmix64(key.0);
        let hi = splitmix64(lo ^ key.0.rotate_left(32));
        let seed = ((hi as u128) << 64) | lo as u128;
        RngStream {
            inner: Pcg64Mcg::new(seed | 1),
        }
    }

    /// Uniform draw from `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

impl SeedableRng for RngStream {
    type Seed = [u8; 8];

    fn from_seed(seed: Self::Seed) -> Self {
        RngStream::new(u64::from_le_bytes(seed), 0)
    }
}
