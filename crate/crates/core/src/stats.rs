//! Summary moments and histogram binning.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Running moments (Welford), mergeable across partial results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: u64,
    pub mean: f64,
    /// Sum of squared deviations from the mean.
    m2: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for SummaryStats {
    fn default() -> Self {
        Self {
            n: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl SummaryStats {
    pub fn from_slice(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::Domain("cannot summarize an empty sample".into()));
        }
        let mut s = Self::default();
        sample.iter().for_each(|&x| s.push(x));
        Ok(s)
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        Self {
            n,
            mean,
            m2,
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    /// Sample variance with the `n - 1` divisor; zero for a single value.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

pub fn summarize(sample: &[f64]) -> Result<SummaryStats> {
    SummaryStats::from_slice(sample)
}

/// Equal-width bins over `[lo, hi]`; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn left_edge(&self, bin: usize) -> f64 {
        self.lo + bin as f64 * self.width()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    /// Count divided by (in-range total × bin width); zero when nothing is in range.
    pub fn densities(&self) -> Vec<f64> {
        let in_range: u64 = self.counts.iter().sum();
        let w = self.width();
        self.counts
            .iter()
            .map(|&c| {
                if in_range == 0 {
                    0.0
                } else {
                    c as f64 / (in_range as f64 * w)
                }
            })
            .collect()
    }
}

/// Bins `sample` into `bins` cells over `range`, or over the sample's own
/// extent when `range` is `None`. A degenerate extent is widened to unit width.
pub fn histogram(sample: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::Domain("histogram needs at least one bin".into()));
    }
    let (lo, hi) = match range {
        Some((lo, hi)) => {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Domain(format!(
                    "invalid histogram range [{lo}, {hi}]"
                )));
            }
            (lo, hi)
        }
        None => {
            let finite = sample.iter().copied().filter(|x| x.is_finite());
            let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
                (a.min(x), b.max(x))
            });
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        }
    };
    let mut h = Histogram {
        lo,
        hi,
        counts: vec![0; bins],
        underflow: 0,
        overflow: 0,
    };
    let w = h.width();
    for &x in sample {
        if x < lo || x.is_nan() {
            h.underflow += 1;
        } else if x > hi {
            h.overflow += 1;
        } else {
            let b = (((x - lo) / w) as usize).min(bins - 1);
            h.counts[b] += 1;
        }
    }
    Ok(h)
}
