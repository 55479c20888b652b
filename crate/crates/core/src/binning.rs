//! Equal-width partition of the output range `R_y = [lo, hi]` and histograms.
//!
//! Bins are half-open, `[lo + iΔ, lo + (i+1)Δ)`, except that `y == hi` belongs
//! to the last bin, so every value of the closed range has exactly one bin.

use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    lo: f64,
    hi: f64,
    m: usize,
    delta: f64,
}

impl Binning {
    pub fn new(lo: f64, hi: f64, m: usize) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || !(lo < hi) {
            return Err(argument(format!("invalid output range [{lo}, {hi}]")));
        }
        if m == 0 {
            return Err(argument("number of bins must be positive"));
        }
        Ok(Binning { lo, hi, m, delta: (hi - lo) / m as f64 })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Bin width Δ.
    pub fn width(&self) -> f64 {
        self.delta
    }

    pub fn lower_edge(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.delta
    }

    pub fn upper_edge(&self, i: usize) -> f64 {
        if i + 1 == self.m {
            self.hi
        } else {
            self.lo + (i + 1) as f64 * self.delta
        }
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.delta
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.center(i)).collect()
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.lo && y <= self.hi
    }

    /// Index of the bin holding `y`, or `None` outside `[lo, hi]`.
    pub fn bin_index(&self, y: f64) -> Result<Option<usize>> {
        if !y.is_finite() {
            return Err(argument(format!("cannot bin non-finite value {y}")));
        }
        Ok(self.locate(y))
    }

    /// Like [`Binning::bin_index`] for values already known to be finite.
    pub(crate) fn locate(&self, y: f64) -> Option<usize> {
        if y < self.lo || y > self.hi {
            return None;
        }
        if y == self.hi {
            return Some(self.m - 1);
        }
        let mut i = (((y - self.lo) / self.delta).floor() as usize).min(self.m - 1);
        // The division can round across an edge; settle on the bin whose
        // computed edges actually bracket y.
        if y < self.lower_edge(i) {
            i -= 1;
        } else if i + 1 < self.m && y >= self.lower_edge(i + 1) {
            i += 1;
        }
        Some(i)
    }

    /// Histogram of `ys`; values outside the range go to the overflow counters.
    pub fn tally(&self, ys: &[f64]) -> Result<Histogram> {
        let mut h = Histogram::new(self.m);
        for &y in ys {
            h.record(self.bin_index(y)?, y < self.lo);
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<u64>,
    pub total: u64,
    pub overflow_low: u64,
    pub overflow_high: u64,
}

impl Histogram {
    pub fn new(m: usize) -> Self {
        Histogram { counts: vec![0; m], total: 0, overflow_low: 0, overflow_high: 0 }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Records one value given its bin (or `None` with the side it fell on).
    pub fn record(&mut self, bin: Option<usize>, below: bool) {
        self.total += 1;
        match bin {
            Some(i) => self.counts[i] += 1,
            None if below => self.overflow_low += 1,
            None => self.overflow_high += 1,
        }
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Coefficient of variation of the nonzero counts; 0 for a perfectly flat
    /// histogram.
    pub fn flatness(&self) -> f64 {
        let nonzero: Vec<f64> = self.counts.iter().filter(|&&c| c > 0).map(|&c| c as f64).collect();
        if nonzero.is_empty() {
            return 0.0;
        }
        let n = nonzero.len() as f64;
        let mean = nonzero.iter().sum::<f64>() / n;
        let var = nonzero.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
        var.sqrt() / mean
    }
}
