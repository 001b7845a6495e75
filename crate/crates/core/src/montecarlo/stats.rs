//! Streaming moment accumulators with associative merges.

use serde::{Deserialize, Serialize};

/// Welford accumulator for the mean and central moments up to order four.
///
/// `m2`, `m3`, `m4` are sums of powered deviations from the running mean.
/// The third and fourth moments only feed [`EnsembleStats::variance_stderr`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    count: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl EnsembleStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(values: &[f64]) -> Self {
        let mut s = Self::new();
        values.iter().for_each(|&x| s.push(x));
        s
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.count as f64;
        self.count += 1;
        let n = self.count as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    /// Parallel (Chan/Pébay) combination of two disjoint accumulators.
    pub fn merge(&self, other: &Self) -> Self {
        if other.count == 0 {
            return *self;
        }
        if self.count == 0 {
            return *other;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let mean = self.mean + delta * nb / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + other.m3
            + d2 * delta * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        Self {
            count: self.count + other.count,
            mean,
            m2,
            m3,
            m4,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// Unbiased sample variance; NaN below two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        self.m2 / (self.count - 1) as f64
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }

    /// Large-sample standard error of [`Self::variance`], from the fourth
    /// central moment: `sqrt((mu4 - s^4 (n-3)/(n-1)) / n)`.
    pub fn variance_stderr(&self) -> f64 {
        if self.count < 4 {
            return f64::NAN;
        }
        let n = self.count as f64;
        let s2 = self.variance();
        let mu4 = self.m4 / n;
        ((mu4 - s2 * s2 * (n - 3.0) / (n - 1.0)).max(0.0) / n).sqrt()
    }
}

/// Bivariate accumulator for a covariance pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossStats {
    count: u64,
    mean_x: f64,
    mean_y: f64,
    m2_x: f64,
    m2_y: f64,
    c_xy: f64,
}

impl CrossStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64, y: f64) {
        self.count += 1;
        let n = self.count as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        self.m2_x += dx * (x - self.mean_x);
        self.m2_y += dy * (y - self.mean_y);
        self.c_xy += dx * (y - self.mean_y);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if other.count == 0 {
            return *self;
        }
        if self.count == 0 {
            return *other;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let dx = other.mean_x - self.mean_x;
        let dy = other.mean_y - self.mean_y;
        let w = na * nb / n;
        Self {
            count: self.count + other.count,
            mean_x: self.mean_x + dx * nb / n,
            mean_y: self.mean_y + dy * nb / n,
            m2_x: self.m2_x + other.m2_x + dx * dx * w,
            m2_y: self.m2_y + other.m2_y + dy * dy * w,
            c_xy: self.c_xy + other.c_xy + dx * dy * w,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean_x(&self) -> f64 {
        self.mean_x
    }

    pub fn mean_y(&self) -> f64 {
        self.mean_y
    }

    pub fn covariance(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        self.c_xy / (self.count - 1) as f64
    }

    pub fn correlation(&self) -> f64 {
        self.c_xy / (self.m2_x * self.m2_y).sqrt()
    }
}

/// Estimate of `E[X] / sqrt(E[Y] E[Z])` from per-sample triples
/// `(X, Y, Z) = (<d_t, d_s>, |d_t|^2, |d_s|^2)` with a delta-method standard
/// error. Returns `(estimate, stderr)`; needs at least two samples.
pub fn correlation_estimate(samples: &[[f64; 3]]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = |i: usize| samples.iter().map(|s| s[i]).sum::<f64>() / n;
    let m = [mean(0), mean(1), mean(2)];
    let root = (m[1] * m[2]).sqrt();
    let rho = m[0] / root;
    let grad = [1.0 / root, -0.5 * rho / m[1], -0.5 * rho / m[2]];
    // Variance of the linearised statistic sum_i grad_i (V_i - m_i).
    let lin: Vec<f64> = samples
        .iter()
        .map(|s| (0..3).map(|i| grad[i] * (s[i] - m[i])).sum())
        .collect();
    let var = lin.iter().map(|x| x * x).sum::<f64>() / (n - 1.0);
    (rho, (var / n).sqrt())
}
