//! Seeded minibatch schedules.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::seed;

fn permutation(n: usize, seed: u64, pass: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pass);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Partitions `0..n` into shuffled batches of `m` (last one possibly short).
/// The order is a function of `(seed, epoch)` only.
pub fn batches(n: usize, m: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    assert!(m >= 1, "batch size must be >= 1");
    permutation(n, seed, epoch).chunks(m).map(<[usize]>::to_vec).collect()
}

/// An endless stream of indices made of back-to-back reshuffled passes over `0..n`.
#[derive(Debug, Clone)]
pub(crate) struct CyclingSampler {
    n: usize,
    seed: u64,
    pass: u64,
    order: Vec<usize>,
    pos: usize,
}

impl CyclingSampler {
    pub(crate) fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            pass: 0,
            order: permutation(n, seed, 0),
            pos: 0,
        }
    }

    pub(crate) fn take(&mut self, k: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        if self.n == 0 {
            return out;
        }
        while out.len() < k {
            if self.pos == self.order.len() {
                self.pass += 1;
                self.order = permutation(self.n, self.seed, self.pass);
                self.pos = 0;
            }
            let take = (k - out.len()).min(self.order.len() - self.pos);
            out.extend_from_slice(&self.order[self.pos..self.pos + take]);
            self.pos += take;
        }
        out
    }
}

/// Which domain defines the length of an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// `ceil(max(|source|, |target|) / m)` iterations; the smaller set cycles.
    LargerDrives,
    /// `ceil(|source| / m)` iterations; the target cycles.
    SourceDrives,
}

/// Produces `(source indices, target indices)` pairs epoch by epoch.
///
/// The driving set is partitioned exactly once per epoch by [`batches`]; the other set
/// is drawn from a [`CyclingSampler`] in chunks the size of the driving batch.
#[derive(Debug, Clone)]
pub struct PairedBatches {
    source_len: usize,
    target_len: usize,
    m: usize,
    pairing: Pairing,
    source_seed: u64,
    target_seed: u64,
    cycler: CyclingSampler,
}

impl PairedBatches {
    pub fn new(source_len: usize, target_len: usize, m: usize, seed: u64, pairing: Pairing) -> Self {
        let source_seed = seed::derive(seed, "batches/source");
        let target_seed = seed::derive(seed, "batches/target");
        let source_drives = match pairing {
            Pairing::SourceDrives => true,
            Pairing::LargerDrives => source_len >= target_len,
        };
        let cycler = if source_drives {
            CyclingSampler::new(target_len, target_seed)
        } else {
            CyclingSampler::new(source_len, source_seed)
        };
        Self {
            source_len,
            target_len,
            m,
            pairing,
            source_seed,
            target_seed,
            cycler,
        }
    }

    fn source_drives(&self) -> bool {
        match self.pairing {
            Pairing::SourceDrives => true,
            Pairing::LargerDrives => self.source_len >= self.target_len,
        }
    }

    pub fn iterations_per_epoch(&self) -> usize {
        let driving = if self.source_drives() {
            self.source_len
        } else {
            self.target_len
        };
        driving.div_ceil(self.m)
    }

    pub fn epoch(&mut self, epoch: u64) -> Vec<(Vec<usize>, Vec<usize>)> {
        if self.source_drives() {
            batches(self.source_len, self.m, self.source_seed, epoch)
                .into_iter()
                .map(|s| {
                    let t = self.cycler.take(s.len());
                    (s, t)
                })
                .collect()
        } else {
            batches(self.target_len, self.m, self.target_seed, epoch)
                .into_iter()
                .map(|t| (self.cycler.take(t.len()), t))
                .collect()
        }
    }
}
