//! Keyed random streams.
//!
//! A [`RandomStream`] is a value-like key (master seed plus a short path of
//! integers). Every key maps to its own ChaCha8 generator, seeded by hashing
//! the key, so draws depend only on the key and never on which worker
//! evaluates it or in what order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

const MAX_DEPTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    master_seed: u64,
    path: [u64; MAX_DEPTH],
    depth: u8,
}

impl RandomStream {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            path: [0; MAX_DEPTH],
            depth: 0,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path[..self.depth as usize]
    }

    /// Extends the key by one component.
    ///
    /// Panics if the key is already `MAX_DEPTH` components deep.
    pub fn child(&self, component: u64) -> Self {
        let depth = self.depth as usize;
        assert!(depth < MAX_DEPTH, "random stream key deeper than {MAX_DEPTH}");
        let mut next = *self;
        next.path[depth] = component;
        next.depth += 1;
        next
    }

    fn seed(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(b"spde-lab/stream/v1");
        hasher.update(self.master_seed.to_le_bytes());
        hasher.update([self.depth]);
        for c in self.path() {
            hasher.update(c.to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        seed
    }

    pub fn rng(&self) -> StreamRng {
        StreamRng(ChaCha8Rng::from_seed(self.seed()))
    }

    /// `n` independent standard-normal draws for this key.
    pub fn gaussian(&self, n: usize) -> Vec<f64> {
        let mut rng = self.rng();
        let mut out = vec![0.0; n];
        rng.fill_normal(&mut out);
        out
    }
}

/// Sequential generator attached to one stream key.
#[derive(Debug, Clone)]
pub struct StreamRng(ChaCha8Rng);

impl StreamRng {
    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.0.sample(StandardNormal);
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::EnsembleStats;

    #[test]
    fn same_key_same_sequence() {
        let key = RandomStream::new(42).child(3).child(9);
        assert_eq!(key.gaussian(100), key.gaussian(100));
    }

    #[test]
    fn empty_request() {
        assert!(RandomStream::new(1).gaussian(0).is_empty());
    }

    #[test]
    fn path_is_part_of_the_key() {
        let root = RandomStream::new(5);
        assert_ne!(root.gaussian(4), root.child(0).gaussian(4));
        assert_ne!(root.child(0).gaussian(4), root.child(1).gaussian(4));
        // A trailing zero component is not the same as no component.
        assert_ne!(root.child(7).gaussian(4), root.child(7).child(0).gaussian(4));
    }

    #[test]
    fn moments_of_a_million_draws() {
        let draws = RandomStream::new(20240601).gaussian(1_000_000);
        let mut stats = EnsembleStats::new();
        draws.iter().for_each(|&x| stats.push(x));
        assert!(stats.mean().abs() < 0.004, "mean {}", stats.mean());
        assert!((stats.variance() - 1.0).abs() < 0.01, "var {}", stats.variance());
    }

    #[test]
    fn sibling_sample_streams_uncorrelated() {
        let root = RandomStream::new(99).child(1);
        let a = root.child(0).gaussian(100_000);
        let b = root.child(1).gaussian(100_000);
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n;
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / n;
        let corr = cov / (va * vb).sqrt();
        assert!(corr.abs() < 0.01, "corr {corr}");
    }

    #[test]
    fn step_component_does_not_leak_across_samples() {
        let root = RandomStream::new(3);
        let sample0 = root.child(0);
        let before = sample0.child(10).gaussian(8);
        let _other = root.child(1).child(10).gaussian(8);
        let _other_step = root.child(1).child(11).gaussian(8);
        assert_eq!(before, sample0.child(10).gaussian(8));
    }
}
