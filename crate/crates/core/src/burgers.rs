//! Stochastic Burgers equation `u_t + u u_x = nu u_xx + noise` on `(0, l)`
//! with Dirichlet data, in a sine-Galerkin truncation.
//!
//! Time stepping multiplies each mode by the exact diffusion factor
//! `exp(-nu lambda_n dt)` after an explicit Euler–Maruyama update of the
//! nonlinearity and noise. The nonlinearity is written in the skew-symmetric
//! form `-(u u_x + (u^2)_x) / 3` and projected with a quadrature that is exact
//! for the truncated products, so it does no work on `u` at the discrete level.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_nonnegative, ensure_positive, Error, Result};
use crate::hilbert::{CovarianceSpectrum, DirichletBasis, HilbertVector};
use crate::montecarlo::{run_ensemble, EnsembleStats, RandomStream, SampleFailure, StreamRng};
use crate::wiener::TimeGrid;

/// Samples whose energy exceeds this multiple of the natural energy scale
/// are aborted as divergent.
pub const BLOW_UP_FACTOR: f64 = 1e6;

/// Advective CFL number: `dt <= CFL * l / (N max|u|)`.
pub const CFL: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// `sigma dW_t` with a Q-Wiener process.
    Additive(CovarianceSpectrum),
    /// `sigma u dw_t` with one scalar Brownian motion.
    MultiplicativeScalar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurgersProblem {
    nu: f64,
    sigma: f64,
    noise: NoiseModel,
    u0: HilbertVector,
    basis: DirichletBasis,
    poincare_c: f64,
}

impl BurgersProblem {
    /// Problem with the sharp Poincaré constant `(l / pi)^2`.
    pub fn new(nu: f64, l: f64, sigma: f64, noise: NoiseModel, u0: HilbertVector) -> Result<Self> {
        ensure_positive("nu", nu)?;
        ensure_finite("sigma", sigma)?;
        let basis = DirichletBasis::new(l, u0.len())?;
        if let NoiseModel::Additive(spec) = &noise {
            if spec.n_modes() != u0.len() {
                return Err(Error::DimensionMismatch {
                    expected: u0.len(),
                    got: spec.n_modes(),
                });
            }
        }
        Ok(Self {
            nu,
            sigma,
            noise,
            u0,
            basis,
            poincare_c: (l / PI).powi(2),
        })
    }

    /// Replaces the Poincaré constant. Anything below `(l / pi)^2` would not
    /// be a valid constant for the interval.
    pub fn with_poincare_c(mut self, c: f64) -> Result<Self> {
        ensure_positive("poincare_c", c)?;
        let sharp = (self.l() / PI).powi(2);
        if c < sharp * (1.0 - 1e-12) {
            return Err(Error::param("poincare_c", format!("must be at least (l/pi)^2 = {sharp}")));
        }
        self.poincare_c = c;
        Ok(self)
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn l(&self) -> f64 {
        self.basis.length()
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn u0(&self) -> &HilbertVector {
        &self.u0
    }

    pub fn basis(&self) -> &DirichletBasis {
        &self.basis
    }

    pub fn n_modes(&self) -> usize {
        self.u0.len()
    }

    pub fn poincare_c(&self) -> f64 {
        self.poincare_c
    }

    /// `||u0||^2`.
    pub fn e0(&self) -> f64 {
        self.u0.norm_sq()
    }

    fn additive_trace(&self) -> Result<f64> {
        match &self.noise {
            NoiseModel::Additive(spec) => Ok(spec.trace()),
            NoiseModel::MultiplicativeScalar => Err(Error::param("noise", "additive noise required")),
        }
    }

    /// Energy scale used for blow-up detection: initial energy plus the
    /// stationary level of the additive energy balance.
    fn energy_scale(&self) -> f64 {
        let stationary = match &self.noise {
            NoiseModel::Additive(spec) => {
                self.poincare_c * self.sigma.powi(2) * self.l() * spec.trace() / (2.0 * self.nu)
            }
            NoiseModel::MultiplicativeScalar => 0.0,
        };
        self.e0() + stationary
    }
}

/// Sine-Galerkin evaluation of the skew-symmetric nonlinearity.
///
/// Both the collocation step and the projection run through one complex FFT
/// of length `2M` on the odd/even extension of the grid data. With
/// `2M > 3N` the trapezoid rule integrates every cubic product exactly, which
/// removes aliasing.
pub struct GalerkinTransform {
    n_modes: usize,
    intervals: usize,
    l: f64,
    inverse: Arc<dyn Fft<f64>>,
    forward: Arc<dyn Fft<f64>>,
    buffer: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    u: Vec<f64>,
    ux: Vec<f64>,
}

impl std::fmt::Debug for GalerkinTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GalerkinTransform")
            .field("n_modes", &self.n_modes)
            .field("intervals", &self.intervals)
            .field("l", &self.l)
            .finish()
    }
}

impl Clone for GalerkinTransform {
    fn clone(&self) -> Self {
        Self::new(self.n_modes, self.l)
    }
}

impl GalerkinTransform {
    pub fn new(n_modes: usize, l: f64) -> Self {
        let intervals = ((3 * n_modes + 2) / 2).max(n_modes + 1).next_power_of_two();
        let len = 2 * intervals;
        let mut planner = FftPlanner::new();
        let inverse = planner.plan_fft_inverse(len);
        let forward = planner.plan_fft_forward(len);
        let scratch_len = inverse.get_inplace_scratch_len().max(forward.get_inplace_scratch_len());
        Self {
            n_modes,
            intervals,
            l,
            inverse,
            forward,
            buffer: vec![Complex::default(); len],
            scratch: vec![Complex::default(); scratch_len],
            u: vec![0.0; intervals + 1],
            ux: vec![0.0; intervals + 1],
        }
    }

    /// Number of grid intervals `M` on `[0, l]`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Grid values of `u` at `x_j = j l / M`, `j = 0..=M`.
    pub fn grid_values(&mut self, coeffs: &[f64]) -> &[f64] {
        self.synthesize(coeffs);
        &self.u
    }

    fn synthesize(&mut self, coeffs: &[f64]) {
        assert_eq!(coeffs.len(), self.n_modes, "coefficient count");
        let len = self.buffer.len();
        let scale = (2.0 / self.l).sqrt();
        self.buffer.iter_mut().for_each(|z| *z = Complex::default());
        for (i, c) in coeffs.iter().enumerate() {
            let n = i + 1;
            let value = c * scale;
            let slope = value * n as f64 * PI / self.l;
            self.buffer[n] = Complex::new(0.5 * (slope + value), 0.0);
            self.buffer[len - n] = Complex::new(0.5 * (slope - value), 0.0);
        }
        self.inverse.process_with_scratch(&mut self.buffer, &mut self.scratch);
        for j in 0..=self.intervals {
            self.ux[j] = self.buffer[j].re;
            self.u[j] = self.buffer[j].im;
        }
        // The boundary values vanish exactly for a sine series.
        self.u[0] = 0.0;
        self.u[self.intervals] = 0.0;
    }

    /// Writes the Galerkin coefficients of `-(u u_x + (u^2)_x) / 3` into `out`
    /// and returns `max |u|` over the grid.
    pub fn nonlinear(&mut self, coeffs: &[f64], out: &mut [f64]) -> f64 {
        self.synthesize(coeffs);
        let m = self.intervals;
        let len = self.buffer.len();
        self.buffer.iter_mut().for_each(|z| *z = Complex::default());
        let mut max_abs = 0.0f64;
        for j in 1..m {
            let (u, ux) = (self.u[j], self.ux[j]);
            max_abs = max_abs.max(u.abs());
            let g = u * ux;
            let h = u * u;
            self.buffer[j] = Complex::new(h + g, 0.0);
            self.buffer[len - j] = Complex::new(h - g, 0.0);
        }
        self.forward.process_with_scratch(&mut self.buffer, &mut self.scratch);
        let scale = (2.0 / self.l).sqrt() * self.l / m as f64;
        for (i, o) in out.iter_mut().enumerate().take(self.n_modes) {
            let k = i + 1;
            let sin_sum = -0.5 * self.buffer[k].im;
            let cos_sum = 0.5 * self.buffer[k].re;
            // <u u_x, e_k> and <(u^2)_x, e_k> = -<u^2, e_k'>.
            let advective = scale * sin_sum;
            let conservative = -scale * (k as f64 * PI / self.l) * cos_sum;
            *o = -(advective + conservative) / 3.0;
        }
        max_abs
    }
}

/// Modal state at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BurgersState {
    pub t: f64,
    pub u: Vec<f64>,
}

impl BurgersState {
    pub fn initial(prob: &BurgersProblem) -> Self {
        Self {
            t: 0.0,
            u: prob.u0.coeffs.clone(),
        }
    }

    pub fn energy(&self) -> f64 {
        self.u.iter().map(|c| c * c).sum()
    }
}

/// Fixed-step integrator holding the transform buffers and per-mode factors.
#[derive(Debug, Clone)]
pub struct BurgersStepper {
    problem: BurgersProblem,
    dt: f64,
    decay: Vec<f64>,
    noise_scale: Vec<f64>,
    transform: GalerkinTransform,
    work: Vec<f64>,
    threshold: f64,
}

impl BurgersStepper {
    pub fn new(prob: &BurgersProblem, dt: f64) -> Result<Self> {
        ensure_positive("dt", dt)?;
        let n = prob.n_modes();
        let decay = (1..=n).map(|k| (-prob.nu * prob.basis.eigenvalue(k) * dt).exp()).collect();
        let noise_scale = match &prob.noise {
            NoiseModel::Additive(spec) => spec.values().iter().map(|q| prob.sigma * q.sqrt()).collect(),
            NoiseModel::MultiplicativeScalar => vec![prob.sigma],
        };
        Ok(Self {
            problem: prob.clone(),
            dt,
            decay,
            noise_scale,
            transform: GalerkinTransform::new(n, prob.l()),
            work: vec![0.0; n],
            threshold: BLOW_UP_FACTOR * prob.energy_scale(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Brownian increments consumed per step.
    pub fn increments_per_step(&self) -> usize {
        self.noise_scale.len()
    }

    /// Largest admissible step for a state with the given grid maximum.
    pub fn dt_max(&self, max_abs_u: f64) -> f64 {
        if max_abs_u == 0.0 {
            f64::INFINITY
        } else {
            CFL * self.problem.l() / (self.problem.n_modes() as f64 * max_abs_u)
        }
    }

    /// Advances `state` by one step using the given Brownian increments
    /// (each already scaled to variance `dt`).
    pub fn step_with_increments(&mut self, state: &mut BurgersState, dw: &[f64]) -> Result<()> {
        if dw.len() != self.increments_per_step() {
            return Err(Error::DimensionMismatch {
                expected: self.increments_per_step(),
                got: dw.len(),
            });
        }
        let max_abs = self.transform.nonlinear(&state.u, &mut self.work);
        let dt_max = self.dt_max(max_abs);
        if self.dt > dt_max {
            return Err(Error::StepTooLarge { dt: self.dt, dt_max });
        }
        match self.problem.noise {
            NoiseModel::Additive(_) => {
                for (k, u) in state.u.iter_mut().enumerate() {
                    *u = self.decay[k] * (*u + self.dt * self.work[k] + self.noise_scale[k] * dw[k]);
                }
            }
            NoiseModel::MultiplicativeScalar => {
                let factor = self.noise_scale[0] * dw[0];
                for (k, u) in state.u.iter_mut().enumerate() {
                    *u = self.decay[k] * (*u + self.dt * self.work[k] + factor * *u);
                }
            }
        }
        state.t += self.dt;
        let energy = state.energy();
        if !energy.is_finite() || (self.threshold > 0.0 && energy > self.threshold) {
            return Err(Error::BlowUp {
                t: state.t,
                energy,
                threshold: self.threshold,
            });
        }
        Ok(())
    }

    /// Draws fresh increments from `rng` and advances one step.
    pub fn step(&mut self, state: &mut BurgersState, rng: &mut StreamRng) -> Result<()> {
        let sqrt_dt = self.dt.sqrt();
        let dw: Vec<f64> = (0..self.increments_per_step()).map(|_| sqrt_dt * rng.normal()).collect();
        self.step_with_increments(state, &dw)
    }
}

/// One step from `state` with noise from `stream`. Builds a fresh stepper;
/// use [`BurgersStepper`] directly for trajectories.
pub fn step(state: &BurgersState, prob: &BurgersProblem, dt: f64, stream: &RandomStream) -> Result<BurgersState> {
    let mut next = state.clone();
    BurgersStepper::new(prob, dt)?.step(&mut next, &mut stream.rng())?;
    Ok(next)
}

/// `||u(t_k)||^2` along one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    pub grid: TimeGrid,
    pub e2: Vec<f64>,
}

pub fn simulate_energy_trace(prob: &BurgersProblem, grid: &TimeGrid, stream: &RandomStream) -> Result<EnergyTrace> {
    let mut stepper = BurgersStepper::new(prob, grid.dt())?;
    let mut state = BurgersState::initial(prob);
    state.t = grid.t0();
    let mut rng = stream.rng();
    let mut e2 = Vec::with_capacity(grid.steps() + 1);
    e2.push(state.energy());
    for _ in 0..grid.steps() {
        stepper.step(&mut state, &mut rng)?;
        e2.push(state.energy());
    }
    Ok(EnergyTrace { grid: *grid, e2 })
}

/// Per-step ensemble statistics of the energy, and optionally of the exit
/// indicator `||u(t_k)|| >= delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyEnsemble {
    pub grid: TimeGrid,
    pub energy: Vec<EnsembleStats>,
    pub exits: Option<Vec<EnsembleStats>>,
    /// Aborted samples (divergence or step-size violations).
    pub failures: Vec<SampleFailure>,
}

/// Runs `samples` independent trajectories keyed by `stream.child(i)`.
/// Results do not depend on `workers`.
pub fn simulate_energy_ensemble(
    prob: &BurgersProblem,
    grid: &TimeGrid,
    samples: usize,
    stream: &RandomStream,
    workers: usize,
    delta: Option<f64>,
) -> Result<EnergyEnsemble> {
    if samples < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples,
        });
    }
    if let Some(d) = delta {
        ensure_positive("delta", d)?;
    }
    BurgersStepper::new(prob, grid.dt())?;
    let rows = grid.steps() + 1;
    let width = if delta.is_some() { 2 * rows } else { rows };
    let out = run_ensemble(samples, workers, width, |i| {
        let trace = simulate_energy_trace(prob, grid, &stream.child(i as u64))?;
        let mut obs = trace.e2;
        if let Some(d) = delta {
            let d2 = d * d;
            let exits: Vec<f64> = obs.iter().map(|e| if *e >= d2 { 1.0 } else { 0.0 }).collect();
            obs.extend(exits);
        }
        Ok(obs)
    })?;
    let mut stats = out.stats;
    let exits = delta.map(|_| stats.split_off(rows));
    Ok(EnergyEnsemble {
        grid: *grid,
        energy: stats,
        exits,
        failures: out.failures,
    })
}

/// Mean-energy bound for additive noise in the closed form
/// `e0 exp(-2 nu t / c) + c sigma^2 l Tr(Q) (1 - exp(-2 nu t / c)) / 2`.
pub fn energy_bound_additive(prob: &BurgersProblem, t: f64, e0: f64) -> Result<f64> {
    ensure_nonnegative("t", t)?;
    let tr = prob.additive_trace()?;
    let c = prob.poincare_c;
    let decay = (-2.0 * prob.nu * t / c).exp();
    Ok(e0 * decay + 0.5 * c * prob.sigma.powi(2) * prob.l() * tr * (1.0 - decay))
}

/// Exact solution of the energy inequality `y' = -(2 nu / c) y + sigma^2 l Tr(Q)`:
/// `e0 exp(-2 nu t / c) + c sigma^2 l Tr(Q) (1 - exp(-2 nu t / c)) / (2 nu)`.
///
/// This differs from [`energy_bound_additive`] by the factor `1 / nu` on the
/// noise term; for `nu < 1` only this one bounds the mean energy.
pub fn energy_bound_additive_gronwall(prob: &BurgersProblem, t: f64, e0: f64) -> Result<f64> {
    ensure_nonnegative("t", t)?;
    let tr = prob.additive_trace()?;
    let c = prob.poincare_c;
    let decay = (-2.0 * prob.nu * t / c).exp();
    Ok(e0 * decay + c * prob.sigma.powi(2) * prob.l() * tr * (1.0 - decay) / (2.0 * prob.nu))
}

/// `e0 exp((sigma^2 - 2 nu / c) t)`.
pub fn energy_bound_multiplicative(prob: &BurgersProblem, t: f64, e0: f64) -> Result<f64> {
    ensure_nonnegative("t", t)?;
    Ok(e0 * ((prob.sigma.powi(2) - 2.0 * prob.nu / prob.poincare_c) * t).exp())
}

/// Chebyshev bound on `P(||u(t)|| >= delta)`.
pub fn exit_probability_bound(prob: &BurgersProblem, t: f64, e0: f64, delta: f64) -> Result<f64> {
    ensure_positive("delta", delta)?;
    let mean = match prob.noise {
        NoiseModel::Additive(_) => energy_bound_additive(prob, t, e0)?,
        NoiseModel::MultiplicativeScalar => energy_bound_multiplicative(prob, t, e0)?,
    };
    Ok((mean / (delta * delta)).min(1.0))
}

/// Lower bound on `P(||u(t)|| < delta)`.
pub fn stay_probability_bound(prob: &BurgersProblem, t: f64, e0: f64, delta: f64) -> Result<f64> {
    Ok(1.0 - exit_probability_bound(prob, t, e0, delta)?)
}
