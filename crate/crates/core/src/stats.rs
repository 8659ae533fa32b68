//! Empirical distributions of constellation error.

use crate::error::{Error, Result};

/// Quantile levels reported by [`cdf_summary`].
pub const SUMMARY_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99];

/// Error magnitudes at which exceedance probabilities are tabulated.
pub const EXCEEDANCE_THRESHOLDS: [f64; 7] = [1e-4, 1e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("NaN in CDF input".into()));
        }
        values.sort_by(f64::total_cmp);
        Self::from_sorted(values)
    }

    pub fn from_sorted(sorted: Vec<f64>) -> Result<Self> {
        if sorted.is_empty() {
            return Err(Error::Empty("CDF input"));
        }
        if sorted.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidArgument("CDF input is not sorted".into()));
        }
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of samples `<= x`.
    pub fn probability(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Linear-interpolation quantile (position `(n - 1) p`).
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        let frac = h - lo as f64;
        if frac == 0.0 {
            self.sorted[lo]
        } else {
            self.sorted[lo] + frac * (self.sorted[hi] - self.sorted[lo])
        }
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// Step points `(value_i, (i + 1) / n)`.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(move |(i, &v)| (v, (i + 1) as f64 / n))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfSummary {
    pub count: usize,
    /// `(level, value)` for each of [`SUMMARY_LEVELS`].
    pub quantiles: Vec<(f64, f64)>,
    /// `(threshold, P[error > threshold])`.
    pub exceedance: Vec<(f64, f64)>,
}

pub fn cdf_summary(values: &[f64]) -> Result<CdfSummary> {
    summarize(&EmpiricalCdf::new(values.to_vec())?)
}

pub fn summarize(cdf: &EmpiricalCdf) -> Result<CdfSummary> {
    Ok(CdfSummary {
        count: cdf.len(),
        quantiles: SUMMARY_LEVELS.iter().map(|&p| (p, cdf.quantile(p))).collect(),
        exceedance: EXCEEDANCE_THRESHOLDS
            .iter()
            .map(|&t| (t, 1.0 - cdf.probability(t)))
            .collect(),
    })
}
