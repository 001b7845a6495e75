//! Lyapunov exponents of `u_t = u_xx + alpha u` and of its stochastic
//! counterpart `dv = (v_xx + beta v) dt + gamma v dw_t` on `(0, 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_nonnegative, Error, Result};
use crate::hilbert::{DirichletBasis, HilbertVector};
use crate::montecarlo::RandomStream;
use crate::wiener::TimeGrid;

/// Relative size below which a coefficient of `f` counts as zero when
/// locating the lowest excited mode.
pub const NONZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovProblem {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    f: HilbertVector,
    basis: DirichletBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    /// Least-squares growth rate of `log ||v(t)||`.
    pub slope: f64,
    /// Standard error of the slope from the regression residuals.
    pub stderr: f64,
    /// Fitting window `(t_burn, T)`.
    pub window: (f64, f64),
}

impl LyapunovProblem {
    pub fn new(alpha: f64, beta: f64, gamma: f64, f: HilbertVector) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            ensure_finite(name, v)?;
        }
        let basis = DirichletBasis::unit(f.len())?;
        Ok(Self {
            alpha,
            beta,
            gamma,
            f,
            basis,
        })
    }

    pub fn f(&self) -> &HilbertVector {
        &self.f
    }

    pub fn basis(&self) -> &DirichletBasis {
        &self.basis
    }

    /// Lowest mode index (1-based) with a non-negligible coefficient.
    pub fn lowest_mode(&self) -> Result<usize> {
        let norm = self.f.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroInitialCondition);
        }
        self.f
            .coeffs
            .iter()
            .position(|c| c.abs() > NONZERO_TOL * norm)
            .map(|i| i + 1)
            .ok_or(Error::ZeroInitialCondition)
    }
}

/// `-lambda_{n0} + alpha`, with `n0` the lowest excited mode of `f`.
pub fn exponent_deterministic(prob: &LyapunovProblem) -> Result<f64> {
    let n0 = prob.lowest_mode()?;
    Ok(-prob.basis.eigenvalue(n0) + prob.alpha)
}

/// `exponent_deterministic + (beta - alpha) - gamma^2 / 2`.
pub fn exponent_stochastic(prob: &LyapunovProblem) -> Result<f64> {
    Ok(exponent_deterministic(prob)? + (prob.beta - prob.alpha) - 0.5 * prob.gamma * prob.gamma)
}

/// `log ||v(t_k)||` along one path of the exact solution
/// `v_j(t) = f_j exp(gamma w_t + (beta - lambda_j - gamma^2/2) t)`,
/// computed in log space so long horizons neither underflow nor overflow.
pub fn log_norm_path(prob: &LyapunovProblem, grid: &TimeGrid, stream: &RandomStream) -> Result<Vec<f64>> {
    prob.lowest_mode()?;
    let terms: Vec<(f64, f64)> = prob
        .f
        .coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(i, c)| (2.0 * c.abs().ln(), prob.basis.eigenvalue(i + 1)))
        .collect();
    let drift = prob.beta - 0.5 * prob.gamma * prob.gamma;
    let mut rng = stream.rng();
    let sqrt_dt = grid.dt().sqrt();
    let mut w = if grid.t0() > 0.0 { grid.t0().sqrt() * rng.normal() } else { 0.0 };
    let mut out = Vec::with_capacity(grid.steps() + 1);
    for k in 0..=grid.steps() {
        if k > 0 {
            w += sqrt_dt * rng.normal();
        }
        let t = grid.time(k);
        let peak = terms
            .iter()
            .map(|(lf, lam)| lf - 2.0 * lam * t)
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms.iter().map(|(lf, lam)| (lf - 2.0 * lam * t - peak).exp()).sum();
        out.push(prob.gamma * w + drift * t + 0.5 * (peak + sum.ln()));
    }
    Ok(out)
}

/// Fits `log ||v(t)||` by a straight line over `[t_burn, T]`.
pub fn estimate_from_path(
    prob: &LyapunovProblem,
    grid: &TimeGrid,
    stream: &RandomStream,
    t_burn: f64,
) -> Result<ExponentEstimate> {
    ensure_nonnegative("t_burn", t_burn)?;
    let t_end = grid.t_final();
    if t_burn >= t_end {
        return Err(Error::OutOfDomain {
            value: t_burn,
            bound: t_end,
        });
    }
    let logs = log_norm_path(prob, grid, stream)?;
    let points: Vec<(f64, f64)> = (0..=grid.steps())
        .map(|k| (grid.time(k), logs[k]))
        .filter(|(t, _)| *t >= t_burn)
        .collect();
    if points.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: points.len(),
        });
    }
    let (slope, stderr) = least_squares_slope(&points);
    Ok(ExponentEstimate {
        slope,
        stderr,
        window: (t_burn, t_end),
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let tm = points.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    let rss: f64 = points
        .iter()
        .map(|p| (p.1 - ym - slope * (p.0 - tm)).powi(2))
        .sum();
    (slope, (rss / (n - 2.0) / sxx).sqrt())
}
