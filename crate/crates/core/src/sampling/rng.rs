use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Mixed into the key so that streams for
/// different phases of the same sweep never coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Init = 1,
    Collapsed = 2,
    TopicIndicators = 3,
    Phi = 4,
    Theta = 5,
    Indicators = 6,
    Diagnostics = 7,
}

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8, whose 64-bit stream parameter yields independent
/// sequences for one key. Workers own their streams; nothing is shared.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    /// Stream for `item` (document, topic, partition, ...) during `sweep`.
    ///
    /// The purpose is folded into the key and `(sweep, item)` packed into the
    /// stream id, so distinct tuples never share a sequence as long as both
    /// halves fit in 32 bits.
    pub fn for_task(seed: u64, purpose: Purpose, sweep: u64, item: u64) -> Self {
        debug_assert!(sweep < 1 << 32 && item < 1 << 32);
        let key = splitmix64(seed ^ splitmix64(purpose as u64));
        RngStream::new(key, (sweep << 32) | (item & 0xFFFF_FFFF))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        // 53 high bits -> exactly representable multiples of 2^-53
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`, safe to take the log of.
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    /// Uniform integer on `[0, n)`; `n` must be positive.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Lemire's multiply-shift with rejection
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.rng.next_u64();
            let m = (x as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_stream_repeat() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_are_uncorrelated() {
        let n = 100_000;
        let mut a = RngStream::new(42, 0);
        let mut b = RngStream::new(42, 1);
        let xs: Vec<f64> = (0..n).map(|_| a.uniform() - 0.5).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.uniform() - 0.5).collect();
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        let corr = cov / (1.0 / 12.0);
        // 5 standard errors of a null correlation estimate
        assert!(corr.abs() < 5.0 / (n as f64).sqrt(), "corr = {corr}");
    }

    #[test]
    fn task_streams_differ_by_sweep_and_item() {
        let mut a = RngStream::for_task(1, Purpose::TopicIndicators, 0, 1);
        let mut b = RngStream::for_task(1, Purpose::TopicIndicators, 1, 0);
        let mut c = RngStream::for_task(1, Purpose::Phi, 0, 1);
        let (x, y, z) = (a.next_u64(), b.next_u64(), c.next_u64());
        assert_ne!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn below_stays_in_range() {
        let mut r = RngStream::new(5, 5);
        let mut seen = [0usize; 3];
        for _ in 0..3000 {
            seen[r.below(3)] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800));
        assert_eq!(r.below(1), 0);
    }
}
