//! Heat equation `u_t = u_xx + eps u dw_t` on `(0, 1)` with a scalar Brownian
//! motion. Every mode shares the same noise, so the solution is explicit:
//! `u_n(t) = a_n exp(b_n t + eps w_t)` with `b_n = -lambda_n - eps^2 / 2`.

use crate::error::{ensure_finite, Error, Result};
use crate::hilbert::{DirichletBasis, HilbertVector};
use crate::montecarlo::RandomStream;
use crate::wiener::TimeGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct HeatProblem {
    epsilon: f64,
    a: Vec<f64>,
    b: Vec<f64>,
    basis: DirichletBasis,
}

impl HeatProblem {
    /// `a` holds the basis coefficients of the initial data.
    pub fn new(epsilon: f64, a: &HilbertVector) -> Result<Self> {
        ensure_finite("epsilon", epsilon)?;
        let basis = DirichletBasis::unit(a.len())?;
        let b = (1..=a.len())
            .map(|n| -basis.eigenvalue(n) - 0.5 * epsilon * epsilon)
            .collect();
        Ok(Self {
            epsilon,
            a: a.coeffs.clone(),
            b,
            basis,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Growth rates `b_n`.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn basis(&self) -> &DirichletBasis {
        &self.basis
    }

    pub fn n_modes(&self) -> usize {
        self.a.len()
    }

    fn eigenvalue(&self, index: usize) -> f64 {
        self.basis.eigenvalue(index + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatSample {
    grid: TimeGrid,
    n_modes: usize,
    w: Vec<f64>,
    u: Vec<f64>,
}

impl HeatSample {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Scalar Brownian path `w(t_k)`.
    pub fn w(&self) -> &[f64] {
        &self.w
    }

    /// Modal coefficients `u_n(t_k)`.
    pub fn u(&self, k: usize) -> &[f64] {
        &self.u[k * self.n_modes..(k + 1) * self.n_modes]
    }
}

/// Samples the shared Brownian path and maps it through the exact solution.
/// The path starts at zero at `grid.t0()`, so grids should start at zero
/// unless a conditional path is intended.
pub fn sample_solution(prob: &HeatProblem, grid: &TimeGrid, stream: &RandomStream) -> HeatSample {
    let mut rng = stream.rng();
    let sqrt_dt = grid.dt().sqrt();
    let mut w = Vec::with_capacity(grid.steps() + 1);
    let mut acc = if grid.t0() > 0.0 { grid.t0().sqrt() * rng.normal() } else { 0.0 };
    w.push(acc);
    for _ in 0..grid.steps() {
        acc += sqrt_dt * rng.normal();
        w.push(acc);
    }
    let n = prob.n_modes();
    let mut u = Vec::with_capacity(w.len() * n);
    for (k, wk) in w.iter().enumerate() {
        let t = grid.time(k);
        u.extend(prob.a.iter().zip(&prob.b).map(|(a, b)| a * (b * t + prob.epsilon * wk).exp()));
    }
    HeatSample {
        grid: *grid,
        n_modes: n,
        w,
        u,
    }
}

/// `E u_n(t) = a_n exp(-lambda_n t)`.
pub fn mean_closed_form(prob: &HeatProblem, t: f64) -> HilbertVector {
    HilbertVector::new(
        prob.a
            .iter()
            .enumerate()
            .map(|(i, a)| a * (-prob.eigenvalue(i) * t).exp())
            .collect(),
    )
}

/// `sum_n a_n^2 exp(-2 lambda_n t) (exp(eps^2 t) - 1)`.
pub fn variance_closed_form(prob: &HeatProblem, t: f64) -> f64 {
    covariance_closed_form(prob, t, t)
}

/// `sum_n a_n^2 exp(-lambda_n (t + tau)) (exp(eps^2 min(t, tau)) - 1)`.
pub fn covariance_closed_form(prob: &HeatProblem, t: f64, tau: f64) -> f64 {
    let growth = (prob.epsilon * prob.epsilon * t.min(tau)).exp_m1();
    prob.a
        .iter()
        .enumerate()
        .map(|(i, a)| a * a * (-prob.eigenvalue(i) * (t + tau)).exp() * growth)
        .sum()
}

/// Correlation of the field at two times. Fails when either variance
/// vanishes (no noise, zero initial data or a time at zero).
pub fn correlation_closed_form(prob: &HeatProblem, t: f64, tau: f64) -> Result<f64> {
    let (vt, vtau) = (variance_closed_form(prob, t), variance_closed_form(prob, tau));
    if vt <= 0.0 {
        return Err(Error::DegenerateCorrelation { t });
    }
    if vtau <= 0.0 {
        return Err(Error::DegenerateCorrelation { t: tau });
    }
    if t == tau {
        return Ok(1.0);
    }
    Ok(covariance_closed_form(prob, t, tau) / (vt.sqrt() * vtau.sqrt()))
}
