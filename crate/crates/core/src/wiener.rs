//! Truncated Q-Wiener paths `W_t = sum_n sqrt(q_n) W_n(t) e_n` on a uniform
//! time grid, and left-endpoint (Itô) stochastic sums against them.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonnegative, ensure_positive, Error, Result};
use crate::hilbert::{CovarianceSpectrum, DirichletBasis, HilbertVector};
use crate::montecarlo::RandomStream;

/// Uniform grid `t_k = t0 + k dt`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, steps: usize) -> Result<Self> {
        ensure_nonnegative("t0", t0)?;
        ensure_positive("dt", dt)?;
        if steps == 0 {
            return Err(Error::param("steps", "must be at least 1"));
        }
        Ok(Self { t0, dt, steps })
    }

    /// Grid on `[0, t_final]` with spacing as close to `dt` as possible while
    /// landing exactly on `t_final`.
    pub fn covering(t_final: f64, dt: f64) -> Result<Self> {
        ensure_positive("t_final", t_final)?;
        ensure_positive("dt", dt)?;
        let steps = ((t_final / dt).round() as usize).max(1);
        Self::new(0.0, t_final / steps as f64, steps)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_final(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// Nearest grid index to `t`, clamped to the grid.
    pub fn index_of(&self, t: f64) -> usize {
        (((t - self.t0) / self.dt).round().max(0.0) as usize).min(self.steps)
    }

    pub(crate) fn check_index(&self, k: usize) -> Result<()> {
        if k <= self.steps {
            Ok(())
        } else {
            Err(Error::StepOutOfRange {
                index: k,
                steps: self.steps,
            })
        }
    }
}

/// One realisation of the truncated Q-Wiener process.
///
/// Increments are stored unscaled (each `N(0, dt)`); `sqrt(q_n)` is applied
/// on evaluation so the same draws can be reused with another spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    grid: TimeGrid,
    spectrum: CovarianceSpectrum,
    basis: DirichletBasis,
    /// `steps x N`, row-major.
    increments: Vec<f64>,
    /// `(steps + 1) x N`, cumulative sums with a zero first row.
    values: Vec<f64>,
}

/// Draws a path with independent `N(0, dt)` increments per mode and step.
pub fn sample_path(
    spec: &CovarianceSpectrum,
    basis: &DirichletBasis,
    grid: &TimeGrid,
    stream: &RandomStream,
) -> Result<WienerPath> {
    let n = basis.n_modes();
    if spec.n_modes() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: spec.n_modes(),
        });
    }
    let steps = grid.steps();
    let mut rng = stream.rng();
    let mut increments = vec![0.0; steps * n];
    rng.fill_normal(&mut increments);
    let sqrt_dt = grid.dt().sqrt();
    increments.iter_mut().for_each(|x| *x *= sqrt_dt);
    Ok(WienerPath::from_increments(spec.clone(), *basis, *grid, increments))
}

impl WienerPath {
    /// Builds a path from raw increments (`steps x N`, row-major).
    pub fn from_increments(
        spectrum: CovarianceSpectrum,
        basis: DirichletBasis,
        grid: TimeGrid,
        increments: Vec<f64>,
    ) -> Self {
        let n = basis.n_modes();
        assert_eq!(increments.len(), grid.steps() * n, "increment matrix shape");
        let mut values = vec![0.0; (grid.steps() + 1) * n];
        for k in 0..grid.steps() {
            for m in 0..n {
                values[(k + 1) * n + m] = values[k * n + m] + increments[k * n + m];
            }
        }
        Self {
            grid,
            spectrum,
            basis,
            increments,
            values,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn spectrum(&self) -> &CovarianceSpectrum {
        &self.spectrum
    }

    pub fn basis(&self) -> &DirichletBasis {
        &self.basis
    }

    pub fn n_modes(&self) -> usize {
        self.basis.n_modes()
    }

    /// Unit-variance-rate increment `W_n(t_{k+1}) - W_n(t_k)`, mode 1-based.
    pub fn increment(&self, k: usize, n: usize) -> f64 {
        self.increments[k * self.n_modes() + n - 1]
    }

    /// Standard scalar Brownian motion `W_n(t_k)`, mode 1-based.
    pub fn mode_value(&self, k: usize, n: usize) -> f64 {
        self.values[k * self.n_modes() + n - 1]
    }

    /// Basis coefficients `<W_{t_k}, e_n> = sqrt(q_n) W_n(t_k)`.
    pub fn coefficients(&self, k: usize) -> Result<HilbertVector> {
        self.grid.check_index(k)?;
        let n = self.n_modes();
        let row = &self.values[k * n..(k + 1) * n];
        Ok(HilbertVector::new(
            row.iter()
                .zip(self.spectrum.values())
                .map(|(w, q)| q.sqrt() * w)
                .collect(),
        ))
    }

    /// `W_{t_k}(x) = sum_n sqrt(q_n) W_n(t_k) e_n(x)`.
    pub fn field_value(&self, x: f64, k: usize) -> Result<f64> {
        let coeffs = self.coefficients(k)?;
        self.basis.synthesize(&coeffs, x)
    }

    /// Itô sum over the whole grid; see [`Self::ito_integral_to`].
    pub fn ito_integral(&self, integrand: impl Fn(usize, usize) -> f64) -> HilbertVector {
        self.ito_integral_to(self.grid.steps(), integrand)
    }

    /// Per-mode Itô sums `sqrt(q_n) sum_{k < k_end} phi(n, k) dW_n(t_k)`,
    /// with the integrand evaluated at the left endpoint `t_k` of each step.
    /// `integrand(n, k)` receives the 1-based mode and the step index.
    pub fn ito_integral_to(&self, k_end: usize, integrand: impl Fn(usize, usize) -> f64) -> HilbertVector {
        let n_modes = self.n_modes();
        let k_end = k_end.min(self.grid.steps());
        let coeffs = (1..=n_modes)
            .map(|n| {
                let sum: f64 = (0..k_end).map(|k| integrand(n, k) * self.increment(k, n)).sum();
                self.spectrum.q(n).sqrt() * sum
            })
            .collect();
        HilbertVector::new(coeffs)
    }
}
