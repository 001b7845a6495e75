//! Sharded ensemble evaluation.
//!
//! Samples are grouped into fixed blocks of [`BLOCK_SIZE`] consecutive
//! indices. Each block is accumulated sequentially in index order, and the
//! block accumulators are combined by a canonical pairwise tree (neighbours
//! `(0,1), (2,3), ...` level by level). Neither the blocks nor the tree depend
//! on the worker count, so results are bit-identical for any `workers`.

use rayon::prelude::*;

use super::stats::EnsembleStats;
use crate::error::{Error, Result};

pub const BLOCK_SIZE: usize = 64;

/// A sample that aborted instead of producing observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFailure {
    pub index: usize,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutcome {
    /// One accumulator per observable.
    pub stats: Vec<EnsembleStats>,
    /// Aborted samples in index order.
    pub failures: Vec<SampleFailure>,
}

impl EnsembleOutcome {
    fn empty(width: usize) -> Self {
        Self {
            stats: vec![EnsembleStats::new(); width],
            failures: Vec::new(),
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.stats.iter_mut().zip(&other.stats) {
            *a = a.merge(b);
        }
        self.failures.extend(other.failures);
        self
    }
}

/// Runs `f` in a pool of `workers` threads (sequentially for `workers <= 1`).
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers <= 1 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Evaluates `observe(i)` for `i in 0..samples`; each call returns `width`
/// observables (or an error, which is recorded as a failure and excluded).
pub fn run_ensemble<F>(samples: usize, workers: usize, width: usize, observe: F) -> Result<EnsembleOutcome>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync,
{
    let blocks: Vec<(usize, usize)> = (0..samples)
        .step_by(BLOCK_SIZE)
        .map(|start| (start, (start + BLOCK_SIZE).min(samples)))
        .collect();

    let eval_block = |&(start, end): &(usize, usize)| -> Result<EnsembleOutcome> {
        let mut acc = EnsembleOutcome::empty(width);
        for i in start..end {
            match observe(i) {
                Ok(obs) => {
                    if obs.len() != width {
                        return Err(Error::DimensionMismatch {
                            expected: width,
                            got: obs.len(),
                        });
                    }
                    for (s, &x) in acc.stats.iter_mut().zip(&obs) {
                        s.push(x);
                    }
                }
                Err(error) => acc.failures.push(SampleFailure { index: i, error }),
            }
        }
        Ok(acc)
    };

    let partials: Vec<Result<EnsembleOutcome>> = with_workers(workers, || {
        if workers <= 1 {
            blocks.iter().map(eval_block).collect()
        } else {
            blocks.par_iter().map(eval_block).collect()
        }
    });
    let partials = partials.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(tree_merge(partials).unwrap_or_else(|| EnsembleOutcome::empty(width)))
}

fn tree_merge(mut level: Vec<EnsembleOutcome>) -> Option<EnsembleOutcome> {
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => a.merge(b),
                None => a,
            });
        }
        level = next;
    }
    level.pop()
}

/// Evaluates `f(i)` for every sample and returns the results in index order.
pub fn collect_samples<T, F>(samples: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    with_workers(workers, || {
        if workers <= 1 {
            (0..samples).map(&f).collect()
        } else {
            (0..samples).into_par_iter().map(&f).collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::RandomStream;

    fn observe(i: usize) -> Result<Vec<f64>> {
        let z = RandomStream::new(8).child(i as u64).gaussian(2);
        Ok(vec![z[0], z[0] * z[1]])
    }

    #[test]
    fn worker_count_invariance() {
        let one = run_ensemble(1000, 1, 2, observe).unwrap();
        for workers in [2, 3, 8] {
            let many = run_ensemble(1000, workers, 2, observe).unwrap();
            for (a, b) in one.stats.iter().zip(&many.stats) {
                assert_eq!(a.mean().to_bits(), b.mean().to_bits());
                assert_eq!(a.m2().to_bits(), b.m2().to_bits());
            }
        }
    }

    #[test]
    fn failures_are_counted_not_dropped() {
        let out = run_ensemble(200, 2, 1, |i| {
            if i % 50 == 7 {
                Err(Error::ZeroInitialCondition)
            } else {
                Ok(vec![i as f64])
            }
        })
        .unwrap();
        assert_eq!(out.stats[0].count(), 196);
        let idx: Vec<usize> = out.failures.iter().map(|f| f.index).collect();
        assert_eq!(idx, vec![7, 57, 107, 157]);
    }

    #[test]
    fn wrong_width_is_an_error() {
        assert!(run_ensemble(3, 1, 2, |_| Ok(vec![1.0])).is_err());
    }

    #[test]
    fn collect_preserves_order() {
        let v = collect_samples(300, 4, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }

    #[test]
    fn empty_ensemble() {
        let out = run_ensemble(0, 4, 2, observe).unwrap();
        assert_eq!(out.stats.len(), 2);
        assert_eq!(out.stats[0].count(), 0);
    }
}
