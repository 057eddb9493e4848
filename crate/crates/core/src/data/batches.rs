use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::rng::{derive_seed, seeded, GsdeRng};
use crate::{Error, Result};

/// Draws indices from `0..len` by reshuffled epochs.
///
/// The concatenation of all batches is a sequence of permutations of
/// `0..len`; a batch that runs past the end of an epoch continues into the
/// next shuffled epoch.
#[derive(Debug, Clone)]
pub struct EpochSampler {
    order: Vec<usize>,
    pos: usize,
    batch: usize,
    rng: GsdeRng,
}

impl EpochSampler {
    pub fn new(len: usize, batch: usize, seed: u64) -> Result<Self> {
        if batch == 0 {
            return Err(crate::error::param_err("batch size must be positive"));
        }
        if len == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut rng = seeded(seed);
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        Ok(Self { order, pos: 0, batch, rng })
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.batch);
        while out.len() < self.batch {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            let take = (self.batch - out.len()).min(self.order.len() - self.pos);
            out.extend_from_slice(&self.order[self.pos..self.pos + take]);
            self.pos += take;
        }
        out
    }
}

/// Paired source/target batches of row indices. Infinite.
#[derive(Debug, Clone)]
pub struct MinibatchStream {
    source: EpochSampler,
    target: EpochSampler,
}

/// Pairs an epoch sampler over the (possibly expanded) source pool with one
/// over the target pool. Pseudo-source rows are part of the source pool.
pub fn minibatch_iter(source_len: usize, target_len: usize, batch: usize, seed: u64) -> Result<MinibatchStream> {
    if batch == 0 {
        return Err(crate::error::param_err("batch size must be positive"));
    }
    if batch > source_len.min(target_len) {
        return Err(crate::error::param_err(alloc::format!(
            "batch {batch} exceeds pool sizes ({source_len}, {target_len})"
        )));
    }
    Ok(MinibatchStream {
        source: EpochSampler::new(source_len, batch, derive_seed(seed, 0))?,
        target: EpochSampler::new(target_len, batch, derive_seed(seed, 1))?,
    })
}

impl Iterator for MinibatchStream {
    type Item = (Vec<usize>, Vec<usize>);

    fn next(&mut self) -> Option<Self::Item> {
        Some((self.source.next_batch(), self.target.next_batch()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_batch_is_one_epoch() {
        let mut s = EpochSampler::new(7, 7, 1).unwrap();
        for _ in 0..3 {
            let mut b = s.next_batch();
            b.sort_unstable();
            assert_eq!(b, (0..7).collect::<Vec<_>>());
        }
    }

    #[test]
    fn every_index_once_per_epoch() {
        let mut stream = minibatch_iter(30, 12, 5, 4).unwrap();
        let mut seen = Vec::new();
        for _ in 0..6 {
            let (s, t) = stream.next().unwrap();
            assert_eq!(t.len(), 5);
            seen.extend(s);
        }
        seen.sort_unstable();
        assert_eq!(seen, (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_batch_sizes() {
        assert!(minibatch_iter(10, 10, 0, 0).is_err());
        assert!(minibatch_iter(10, 4, 5, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let a: Vec<_> = minibatch_iter(20, 20, 3, 9).unwrap().take(10).collect();
        let b: Vec<_> = minibatch_iter(20, 20, 3, 9).unwrap().take(10).collect();
        assert_eq!(a, b);
    }
}
