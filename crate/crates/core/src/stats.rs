//! Summation and Monte Carlo bookkeeping shared by the numerical modules.

use serde::{Deserialize, Serialize};

use crate::rng::{stream, StreamRng};

/// Neumaier compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &KahanSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Running (sum, sum of squares, count) triple. Merging is associative.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    sum: KahanSum,
    sumsq: KahanSum,
    count: u64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.sum.add(x);
        self.sumsq.add(x * x);
        self.count += 1;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.sum.merge(&other.sum);
        self.sumsq.merge(&other.sumsq);
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.sum.value() / self.count as f64
    }

    /// Standard error of the mean (unbiased sample variance).
    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean = self.mean();
        let var = ((self.sumsq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }

    pub fn estimate(&self, seed: u64) -> MCEstimate {
        MCEstimate {
            mean: self.mean(),
            stderr: self.stderr(),
            samples: self.count,
            seed,
        }
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

impl MCEstimate {
    /// Number of combined standard errors separating `self` from `other`.
    pub fn z_distance(&self, other: &MCEstimate) -> f64 {
        let s = (self.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        if s == 0.0 {
            if self.mean == other.mean {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - other.mean).abs() / s
        }
    }

    /// Relative standard error.
    pub fn rel_err(&self) -> f64 {
        self.stderr / self.mean.abs()
    }
}

/// Merge per-chunk moments in chunk order, so the result is independent of how
/// the chunks were scheduled.
pub fn merge_ordered<'a, I: IntoIterator<Item = &'a Moments>>(parts: I) -> Moments {
    let mut total = Moments::new();
    for m in parts {
        total.merge(m);
    }
    total
}

/// Samples per random stream in [`chunked_moments`].
pub const CHUNK: u64 = 4096;

/// Runs `samples` draws split into fixed chunks of [`CHUNK`]; chunk `c` uses
/// stream `c` of `seed`. Chunks run in parallel and are merged in order, so
/// the result is bit-identical for any number of workers.
pub fn chunked_moments<F>(seed: u64, samples: u64, draw: F) -> Moments
where
    F: Fn(&mut StreamRng) -> f64 + Sync,
{
    chunked_moments_with(seed, samples, || (), |_, rng| draw(rng))
}

/// [`chunked_moments`] with per-chunk scratch state built by `init`.
pub fn chunked_moments_with<S, I, F>(seed: u64, samples: u64, init: I, draw: F) -> Moments
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &mut StreamRng) -> f64 + Sync,
{
    use rayon::prelude::*;
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, c);
            let mut state = init();
            let mut m = Moments::new();
            for _ in 0..CHUNK.min(samples - c * CHUNK) {
                m.push(draw(&mut state, &mut rng));
            }
            m
        })
        .collect();
    merge_ordered(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = KahanSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let mut whole = Moments::new();
        xs.iter().for_each(|&x| whole.push(x));
        let mut a = Moments::new();
        let mut b = Moments::new();
        xs[..37].iter().for_each(|&x| a.push(x));
        xs[37..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.count(), 100);
        assert!((a.mean() - whole.mean()).abs() < 1e-15);
        assert!((a.stderr() - whole.stderr()).abs() < 1e-15);
    }
}
