//! Stochastic wave equation `u_tt = c^2 u_xx + eps dW_t` with Dirichlet data,
//! solved mode by mode.
//!
//! Each mode is an undamped oscillator with frequency `mu_n = c n pi / l`
//! forced by `sqrt(q_n) dW_n`. Its solution only depends on the noise through
//! the two running integrals `int sin(mu_n s) dW_n` and `int cos(mu_n s) dW_n`,
//! whose increments over a step are jointly Gaussian with known covariance.
//! Sampling those increments exactly gives paths with the exact law at every
//! grid point, whatever the step size.

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::hilbert::{CovarianceSpectrum, DirichletBasis, HilbertVector};
use crate::montecarlo::{RandomStream, StreamRng};
use crate::wiener::TimeGrid;

const PIVOT_TOL: f64 = 1e-14;

/// `A_n = f_n` and `B_n = l g_n / (c n pi)`.
pub fn modal_data(f: &HilbertVector, g: &HilbertVector, c: f64, l: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure_positive("c", c)?;
    ensure_positive("l", l)?;
    f.check_len(g.len())?;
    let b = g
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, gn)| l * gn / (c * (i + 1) as f64 * std::f64::consts::PI))
        .collect();
    Ok((f.coeffs.clone(), b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveProblem {
    c: f64,
    epsilon: f64,
    basis: DirichletBasis,
    spectrum: CovarianceSpectrum,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl WaveProblem {
    /// Problem with initial displacement `f` and velocity `g` (basis coefficients).
    pub fn new(
        c: f64,
        l: f64,
        epsilon: f64,
        spectrum: CovarianceSpectrum,
        f: &HilbertVector,
        g: &HilbertVector,
    ) -> Result<Self> {
        let (a, b) = modal_data(f, g, c, l)?;
        Self::from_modal(c, l, epsilon, spectrum, a, b)
    }

    pub fn from_modal(
        c: f64,
        l: f64,
        epsilon: f64,
        spectrum: CovarianceSpectrum,
        a: Vec<f64>,
        b: Vec<f64>,
    ) -> Result<Self> {
        ensure_positive("c", c)?;
        ensure_finite("epsilon", epsilon)?;
        let basis = DirichletBasis::new(l, a.len())?;
        for len in [b.len(), spectrum.n_modes()] {
            if len != a.len() {
                return Err(Error::DimensionMismatch {
                    expected: a.len(),
                    got: len,
                });
            }
        }
        Ok(Self {
            c,
            epsilon,
            basis,
            spectrum,
            a,
            b,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn l(&self) -> f64 {
        self.basis.length()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn spectrum(&self) -> &CovarianceSpectrum {
        &self.spectrum
    }

    pub fn basis(&self) -> &DirichletBasis {
        &self.basis
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn n_modes(&self) -> usize {
        self.a.len()
    }

    /// Modal frequency `mu_n = c n pi / l`, `n` 1-based.
    pub fn mu(&self, n: usize) -> f64 {
        self.c * self.basis.wavenumber(n)
    }

    /// Deterministic part of the modal velocity.
    #[cfg(test)]
    fn f_n(&self, n: usize, t: f64) -> f64 {
        let mu = self.mu(n);
        let (s, c) = (mu * t).sin_cos();
        -self.a[n - 1] * mu * s + self.b[n - 1] * mu * c
    }
}

/// Exact factor of the covariance of `(dIsin, dIcos)` over one step:
/// `dIsin = s1 z1 + s2 z2`, `dIcos = c1 z1 + c2 z2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct IncrementFactor {
    s1: f64,
    s2: f64,
    c1: f64,
    c2: f64,
}

/// Second moments of the sine and cosine integrals over `[t0, t1]`.
fn increment_moments(mu: f64, t0: f64, t1: f64) -> (f64, f64, f64) {
    let dt = t1 - t0;
    let (sum_sin, sum_cos) = (mu * (t0 + t1)).sin_cos();
    let osc = (mu * dt).sin() / mu;
    (
        0.5 * (dt - sum_cos * osc),
        0.5 * (dt + sum_cos * osc),
        0.5 * sum_sin * osc,
    )
}

impl IncrementFactor {
    fn new(mu: f64, t0: f64, t1: f64) -> Self {
        let (ss, cc, sc) = increment_moments(mu, t0, t1);
        let scale = (t1 - t0).max(f64::MIN_POSITIVE);
        // Pivot on the larger diagonal entry.
        let (first, second) = if ss >= cc { (ss, cc) } else { (cc, ss) };
        if first <= PIVOT_TOL * scale {
            return Self::default();
        }
        let l11 = first.sqrt();
        let l21 = sc / l11;
        let rem = second - l21 * l21;
        let l22 = if rem > PIVOT_TOL * scale { rem.sqrt() } else { 0.0 };
        if ss >= cc {
            Self {
                s1: l11,
                s2: 0.0,
                c1: l21,
                c2: l22,
            }
        } else {
            Self {
                s1: l21,
                s2: l22,
                c1: l11,
                c2: 0.0,
            }
        }
    }
}

/// One realisation: modal displacement, velocity and the two running
/// integrals, each stored `(steps + 1) x N` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveSample {
    grid: TimeGrid,
    n_modes: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    isin: Vec<f64>,
    icos: Vec<f64>,
    mu: Vec<f64>,
}

impl WaveSample {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    fn row<'a>(&self, data: &'a [f64], k: usize) -> &'a [f64] {
        &data[k * self.n_modes..(k + 1) * self.n_modes]
    }

    /// Modal displacements `u_n(t_k)`.
    pub fn u(&self, k: usize) -> &[f64] {
        self.row(&self.u, k)
    }

    /// Modal velocities `d/dt u_n(t_k)`.
    pub fn v(&self, k: usize) -> &[f64] {
        self.row(&self.v, k)
    }

    pub fn isin(&self, k: usize) -> &[f64] {
        self.row(&self.isin, k)
    }

    pub fn icos(&self, k: usize) -> &[f64] {
        self.row(&self.icos, k)
    }

    pub fn displacement(&self, k: usize) -> HilbertVector {
        HilbertVector::new(self.u(k).to_vec())
    }
}

/// Precomputed per-step increment factors for a fixed problem and grid.
/// Sampling many paths through one sampler avoids recomputing the trig tables.
#[derive(Debug, Clone)]
pub struct WaveSampler {
    problem: WaveProblem,
    grid: TimeGrid,
    /// Factor for `[0, t0]` when the grid does not start at zero.
    lead_in: Option<Vec<IncrementFactor>>,
    factors: Vec<IncrementFactor>,
    /// `(sin, cos)` of `mu_n t_k`.
    phases: Vec<(f64, f64)>,
    mu: Vec<f64>,
}

impl WaveSampler {
    pub fn new(problem: &WaveProblem, grid: &TimeGrid) -> Self {
        let n = problem.n_modes();
        let mu: Vec<f64> = (1..=n).map(|m| problem.mu(m)).collect();
        let factors = (0..grid.steps())
            .flat_map(|k| {
                let (t0, t1) = (grid.time(k), grid.time(k + 1));
                mu.iter().map(move |&m| IncrementFactor::new(m, t0, t1))
            })
            .collect();
        let phases = (0..=grid.steps())
            .flat_map(|k| mu.iter().map(move |&m| (m * grid.time(k)).sin_cos()))
            .collect();
        let lead_in =
            (grid.t0() > 0.0).then(|| mu.iter().map(|&m| IncrementFactor::new(m, 0.0, grid.t0())).collect());
        Self {
            problem: problem.clone(),
            grid: *grid,
            lead_in,
            factors,
            phases,
            mu,
        }
    }

    pub fn problem(&self) -> &WaveProblem {
        &self.problem
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn sample(&self, stream: &RandomStream) -> WaveSample {
        let n = self.problem.n_modes();
        let rows = self.grid.steps() + 1;
        let mut rng = stream.rng();
        let mut isin = vec![0.0; rows * n];
        let mut icos = vec![0.0; rows * n];
        if let Some(lead) = &self.lead_in {
            for (m, f) in lead.iter().enumerate() {
                let (ds, dc) = draw(f, &mut rng);
                isin[m] = ds;
                icos[m] = dc;
            }
        }
        for k in 0..self.grid.steps() {
            for m in 0..n {
                // Draw even for noiseless modes so streams stay aligned
                // across spectra.
                let (ds, dc) = draw(&self.factors[k * n + m], &mut rng);
                isin[(k + 1) * n + m] = isin[k * n + m] + ds;
                icos[(k + 1) * n + m] = icos[k * n + m] + dc;
            }
        }
        let p = &self.problem;
        let mut u = vec![0.0; rows * n];
        let mut v = vec![0.0; rows * n];
        for k in 0..rows {
            for m in 0..n {
                let idx = k * n + m;
                let (s, c) = self.phases[idx];
                let mu = self.mu[m];
                let amp = p.epsilon * p.spectrum.values()[m].sqrt();
                let (a, b) = (p.a[m], p.b[m]);
                u[idx] = (a - amp / mu * isin[idx]) * c + (b + amp / mu * icos[idx]) * s;
                v[idx] = -a * mu * s + b * mu * c + amp * (isin[idx] * s + icos[idx] * c);
            }
        }
        WaveSample {
            grid: self.grid,
            n_modes: n,
            u,
            v,
            isin,
            icos,
            mu: self.mu.clone(),
        }
    }
}

fn draw(f: &IncrementFactor, rng: &mut StreamRng) -> (f64, f64) {
    let z1 = rng.normal();
    let z2 = rng.normal();
    (f.s1 * z1 + f.s2 * z2, f.c1 * z1 + f.c2 * z2)
}

/// Samples one path; prefer [`WaveSampler`] for ensembles.
pub fn sample_solution(prob: &WaveProblem, grid: &TimeGrid, stream: &RandomStream) -> WaveSample {
    WaveSampler::new(prob, grid).sample(stream)
}

/// Modal coefficients of `E u(., t)`.
pub fn mean_modal(prob: &WaveProblem, t: f64) -> HilbertVector {
    HilbertVector::new(
        (1..=prob.n_modes())
            .map(|n| {
                let (s, c) = (prob.mu(n) * t).sin_cos();
                prob.a[n - 1] * c + prob.b[n - 1] * s
            })
            .collect(),
    )
}

/// `E u(x, t) = sum_n [A_n cos(mu_n t) + B_n sin(mu_n t)] e_n(x)`.
pub fn mean_solution(prob: &WaveProblem, x: f64, t: f64) -> Result<f64> {
    prob.basis.synthesize(&mean_modal(prob, t), x)
}

/// `E ||u(t) - E u(t)||^2`.
pub fn variance_closed_form(prob: &WaveProblem, t: f64) -> f64 {
    (1..=prob.n_modes())
        .map(|n| {
            let mu = prob.mu(n);
            let w = prob.epsilon.powi(2) * prob.spectrum.q(n) / (2.0 * mu * mu);
            w * (t - (2.0 * mu * t).sin() / (2.0 * mu))
        })
        .sum()
}

/// `E <u(t) - E u(t), u(s) - E u(s)>`.
pub fn covariance_closed_form(prob: &WaveProblem, t: f64, s: f64) -> f64 {
    let m = t.min(s);
    (1..=prob.n_modes())
        .map(|n| {
            let mu = prob.mu(n);
            let w = prob.epsilon.powi(2) * prob.spectrum.q(n) / (2.0 * mu * mu);
            w * (m * (mu * (t - s)).cos() + (mu * (t + s - 2.0 * m)).sin() / (2.0 * mu)
                - (mu * (t + s)).sin() / (2.0 * mu))
        })
        .sum()
}

/// `E(t_k) = 1/2 sum_n (v_n^2 + mu_n^2 u_n^2)`.
pub fn energy(sample: &WaveSample, k: usize) -> Result<f64> {
    sample.grid.check_index(k)?;
    Ok(0.5
        * sample
            .u(k)
            .iter()
            .zip(sample.v(k))
            .zip(&sample.mu)
            .map(|((u, v), mu)| v * v + mu * mu * u * u)
            .sum::<f64>())
}

/// Energy of the initial data.
pub fn energy_initial(prob: &WaveProblem) -> f64 {
    0.5 * (1..=prob.n_modes())
        .map(|n| {
            let mu = prob.mu(n);
            mu * mu * (prob.a[n - 1].powi(2) + prob.b[n - 1].powi(2))
        })
        .sum::<f64>()
}

/// Mean energy `E(0) + eps^2 Tr(Q) t / 2`.
///
/// The energy is not conserved in mean: the Itô correction of the quadratic
/// velocity term injects `eps^2 Tr(Q) / 2` per unit time.
pub fn energy_mean_closed_form(prob: &WaveProblem, t: f64) -> f64 {
    energy_initial(prob) + 0.5 * prob.epsilon.powi(2) * prob.spectrum.trace() * t
}

/// Variance of the energy at time `t`.
pub fn energy_variance_closed_form(prob: &WaveProblem, t: f64) -> f64 {
    let eps2 = prob.epsilon.powi(2);
    (1..=prob.n_modes())
        .map(|n| {
            let mu = prob.mu(n);
            let q = prob.spectrum.q(n);
            let (a, b) = (prob.a[n - 1], prob.b[n - 1]);
            let s2 = (2.0 * mu * t).sin();
            let c2 = (2.0 * mu * t).cos();
            let drift = a * a * mu * mu * (t / 2.0 - s2 / (4.0 * mu)) + b * b * mu * mu * (t / 2.0 + s2 / (4.0 * mu))
                - 0.5 * a * b * mu * (1.0 - c2);
            let noise = t * t / 4.0 + (1.0 - c2) / (8.0 * mu * mu);
            eps2 * q * drift + eps2 * eps2 * q * q * noise
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::SpectrumSpec;
    use crate::montecarlo::{compare, run_ensemble};
    use crate::testing::gauss_legendre;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn single_mode(eps: f64, a: f64, b: f64) -> WaveProblem {
        let spec = CovarianceSpectrum::new(vec![1.0]).unwrap();
        WaveProblem::from_modal(1.0, 1.0, eps, spec, vec![a], vec![b]).unwrap()
    }

    fn multi_mode() -> WaveProblem {
        let spec = SpectrumSpec::Power(2.0).build(6).unwrap();
        let f = HilbertVector::new(vec![1.0, -0.3, 0.2, 0.0, 0.05, 0.0]);
        let g = HilbertVector::new(vec![0.5, 0.4, 0.0, -0.1, 0.0, 0.02]);
        WaveProblem::new(1.3, 1.7, 0.8, spec, &f, &g).unwrap()
    }

    /// Covariance assembled from quadratures of sin^2, cos^2 and sin cos,
    /// bypassing the integrated algebra.
    fn covariance_oracle(prob: &WaveProblem, t: f64, s: f64) -> f64 {
        let m = t.min(s);
        (1..=prob.n_modes())
            .map(|n| {
                let mu = prob.mu(n);
                let ss = gauss_legendre(|r| (mu * r).sin().powi(2), 0.0, m, 64);
                let cc = gauss_legendre(|r| (mu * r).cos().powi(2), 0.0, m, 64);
                let sc = gauss_legendre(|r| (mu * r).sin() * (mu * r).cos(), 0.0, m, 64);
                let (st, ct) = (mu * t).sin_cos();
                let (sv, cv) = (mu * s).sin_cos();
                let w = prob.epsilon.powi(2) * prob.spectrum.q(n) / (mu * mu);
                w * (ct * cv * ss - ct * sv * sc - st * cv * sc + st * sv * cc)
            })
            .sum()
    }

    fn energy_variance_oracle(prob: &WaveProblem, t: f64) -> f64 {
        let eps2 = prob.epsilon.powi(2);
        (1..=prob.n_modes())
            .map(|n| {
                let mu = prob.mu(n);
                let q = prob.spectrum.q(n);
                let drift = gauss_legendre(|s| prob.f_n(n, s).powi(2), 0.0, t, 64);
                let noise = gauss_legendre(
                    |s| gauss_legendre(|r| (mu * (s - r)).cos().powi(2), 0.0, s, 16),
                    0.0,
                    t,
                    32,
                );
                eps2 * q * drift + eps2 * eps2 * q * q * noise
            })
            .sum()
    }

    #[test]
    fn modal_data_examples() {
        let f = HilbertVector::basis_vector(3, 1).unwrap();
        let (a, b) = modal_data(&f, &HilbertVector::zeros(3), 1.0, 1.0).unwrap();
        assert_eq!(a, vec![1.0, 0.0, 0.0]);
        assert_eq!(b, vec![0.0; 3]);
        let g = HilbertVector::basis_vector(3, 2).unwrap();
        let (_, b) = modal_data(&f, &g, 2.0, 1.0).unwrap();
        assert!((b[1] - 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert!(modal_data(&f, &g, 0.0, 1.0).is_err());
        assert!(modal_data(&f, &g, 1.0, -1.0).is_err());
        assert!(modal_data(&f, &HilbertVector::zeros(2), 1.0, 1.0).is_err());
    }

    #[test]
    fn increment_factor_reproduces_moments() {
        for (mu, t0, t1) in [(PI, 0.0, 0.01), (7.3, 0.4, 0.9), (50.0, 1.0, 1.0 + 1e-6), (2.0, 0.0, PI)] {
            let (ss, cc, sc) = increment_moments(mu, t0, t1);
            let quad = |g: &dyn Fn(f64) -> f64| gauss_legendre(g, t0, t1, 32);
            assert!((ss - quad(&|s| (mu * s).sin().powi(2))).abs() < 1e-14);
            assert!((cc - quad(&|s| (mu * s).cos().powi(2))).abs() < 1e-14);
            assert!((sc - quad(&|s| (mu * s).sin() * (mu * s).cos())).abs() < 1e-14);
            let f = IncrementFactor::new(mu, t0, t1);
            let tol = 1e-12 * (t1 - t0);
            assert!((f.s1 * f.s1 + f.s2 * f.s2 - ss).abs() < tol);
            assert!((f.c1 * f.c1 + f.c2 * f.c2 - cc).abs() < tol);
            assert!((f.s1 * f.c1 + f.s2 * f.c2 - sc).abs() < tol);
        }
    }

    #[test]
    fn tiny_step_falls_back_to_rank_one() {
        // Over a very short step both integrals are almost the same Gaussian.
        let f = IncrementFactor::new(1.0, 0.25, 0.25 + 1e-9);
        assert!(f.s2 == 0.0 || f.c2 == 0.0);
        assert!(f.s1.is_finite() && f.c1.is_finite());
    }

    #[test]
    fn noiseless_wave_is_exact() {
        let p = single_mode(0.0, 1.0, 0.3);
        let grid = TimeGrid::new(0.0, 0.05, 40).unwrap();
        let s = sample_solution(&p, &grid, &RandomStream::new(1));
        for k in 0..=40 {
            let t = grid.time(k);
            let expected = (PI * t).cos() + 0.3 * (PI * t).sin();
            assert!((s.u(k)[0] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn initial_state_matches_data() {
        let p = multi_mode();
        let grid = TimeGrid::new(0.0, 0.1, 3).unwrap();
        let s = sample_solution(&p, &grid, &RandomStream::new(2));
        for n in 1..=p.n_modes() {
            assert_eq!(s.u(0)[n - 1], p.a()[n - 1]);
            assert!((s.v(0)[n - 1] - p.b()[n - 1] * p.mu(n)).abs() < 1e-14);
        }
    }

    #[test]
    fn single_mode_forcing_leaves_other_modes_deterministic() {
        let spec = CovarianceSpectrum::new(vec![1.0, 0.0, 0.0]).unwrap();
        let p = WaveProblem::from_modal(1.0, 1.0, 1.0, spec, vec![0.2, 1.0, -0.5], vec![0.0, 0.3, 0.1]).unwrap();
        let grid = TimeGrid::new(0.0, 0.1, 20).unwrap();
        let a = sample_solution(&p, &grid, &RandomStream::new(3));
        let b = sample_solution(&p, &grid, &RandomStream::new(4));
        for k in 0..=20 {
            assert_eq!(a.u(k)[1..], b.u(k)[1..]);
            let mean = mean_modal(&p, grid.time(k));
            assert_eq!(a.u(k)[1..], mean.coeffs[1..]);
        }
        assert_ne!(a.u(20)[0], b.u(20)[0]);
    }

    #[test]
    fn stored_state_matches_modal_formula() {
        let p = multi_mode();
        let grid = TimeGrid::new(0.3, 0.07, 15).unwrap();
        let s = sample_solution(&p, &grid, &RandomStream::new(5));
        for k in [0, 7, 15] {
            let t = grid.time(k);
            for n in 1..=p.n_modes() {
                let mu = p.mu(n);
                let amp = p.epsilon() * p.spectrum().q(n).sqrt();
                let (is, ic) = (s.isin(k)[n - 1], s.icos(k)[n - 1]);
                let u = (p.a()[n - 1] - amp / mu * is) * (mu * t).cos() + (p.b()[n - 1] + amp / mu * ic) * (mu * t).sin();
                assert!((u - s.u(k)[n - 1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mean_examples() {
        let p = single_mode(0.7, 1.0, 0.0);
        assert!((mean_solution(&p, 0.5, 1.0).unwrap() + 2f64.sqrt()).abs() < 1e-12);
        let q = single_mode(0.0, 1.0, 0.0);
        assert_eq!(mean_solution(&p, 0.3, 0.8).unwrap(), mean_solution(&q, 0.3, 0.8).unwrap());
        let m = multi_mode();
        let f = |x: f64| m.basis().synthesize(&HilbertVector::new(m.a().to_vec()), x).unwrap();
        for x in [0.1, 0.9, 1.5] {
            assert!((mean_solution(&m, x, 0.0).unwrap() - f(x)).abs() < 1e-14);
        }
        assert!(mean_solution(&m, 2.0, 0.0).is_err());
    }

    #[test]
    fn variance_examples() {
        let p = single_mode(1.0, 0.0, 0.0);
        assert!((variance_closed_form(&p, 1.0) - 1.0 / (2.0 * PI * PI)).abs() < 1e-15);
        assert_eq!(variance_closed_form(&single_mode(0.0, 1.0, 1.0), 3.0), 0.0);
        let oracle = covariance_oracle(&p, 1.0, 1.0);
        assert!((variance_closed_form(&p, 1.0) - oracle).abs() < 1e-12);
    }

    #[test]
    fn covariance_matches_quadrature_oracle() {
        let p = single_mode(1.0, 0.0, 0.0);
        let ex = covariance_closed_form(&p, 1.0, 0.5);
        assert!((ex - covariance_oracle(&p, 1.0, 0.5)).abs() < 1e-10);
        let m = multi_mode();
        let ts = [0.0, 0.13, 0.5, 1.0, 1.7, 3.2];
        for &t in &ts {
            for &s in &ts {
                let cf = covariance_closed_form(&m, t, s);
                assert!((cf - covariance_oracle(&m, t, s)).abs() < 1e-10, "t={t} s={s}");
                assert!((cf - covariance_closed_form(&m, s, t)).abs() < 1e-14);
            }
            assert!((covariance_closed_form(&m, t, t) - variance_closed_form(&m, t)).abs() < 1e-14);
        }
    }

    #[test]
    fn energy_variance_matches_oracle() {
        let m = multi_mode();
        for t in [0.0, 0.4, 1.0, 2.5] {
            let cf = energy_variance_closed_form(&m, t);
            assert!((cf - energy_variance_oracle(&m, t)).abs() < 1e-10 * cf.abs().max(1.0), "t={t}");
        }
        let p = single_mode(0.9, 0.0, 0.0);
        let mu = PI;
        let t = 1.3;
        let expected = 0.9f64.powi(4) * (t * t / 4.0 + (1.0 - (2.0 * mu * t).cos()) / (8.0 * mu * mu));
        assert!((energy_variance_closed_form(&p, t) - expected).abs() < 1e-14);
        assert_eq!(energy_variance_closed_form(&single_mode(0.0, 1.0, 1.0), 2.0), 0.0);
        assert_eq!(energy_variance_closed_form(&m, 0.0), 0.0);
    }

    #[test]
    fn deterministic_energy_is_conserved() {
        let p = single_mode(0.0, 1.0, 0.0);
        let grid = TimeGrid::new(0.0, 0.1, 30).unwrap();
        let s = sample_solution(&p, &grid, &RandomStream::new(7));
        for k in 0..=30 {
            assert!((energy(&s, k).unwrap() - PI * PI / 2.0).abs() < 1e-12);
        }
        assert!(energy(&s, 31).is_err());
        assert_eq!(energy_initial(&p), PI * PI / 2.0);
    }

    #[test]
    fn ensemble_moments_match_closed_forms() {
        let p = multi_mode();
        let grid = TimeGrid::new(0.0, 0.25, 8).unwrap();
        let sampler = WaveSampler::new(&p, &grid);
        let (k1, k2) = (8, 5);
        let (t1, t2) = (grid.time(k1), grid.time(k2));
        let (m1, m2) = (mean_modal(&p, t1), mean_modal(&p, t2));
        let root = RandomStream::new(99).child(1);
        let out = run_ensemble(10_000, 1, 4, |i| {
            let s = sampler.sample(&root.child(i as u64));
            let d1: Vec<f64> = s.u(k1).iter().zip(&m1.coeffs).map(|(u, m)| u - m).collect();
            let d2: Vec<f64> = s.u(k2).iter().zip(&m2.coeffs).map(|(u, m)| u - m).collect();
            let var = d1.iter().map(|d| d * d).sum();
            let cov = d1.iter().zip(&d2).map(|(a, b)| a * b).sum();
            let x = 0.6;
            let ux = p.basis().synthesize(&s.displacement(k1), x)?;
            Ok(vec![var, cov, ux, energy(&s, k1)?])
        })
        .unwrap();
        let rows = [
            compare("var", t1, variance_closed_form(&p, t1), &out.stats[0]).unwrap(),
            compare("cov", t1, covariance_closed_form(&p, t1, t2), &out.stats[1]).unwrap(),
            compare("mean", t1, mean_solution(&p, 0.6, t1).unwrap(), &out.stats[2]).unwrap(),
            compare("energy", t1, energy_mean_closed_form(&p, t1), &out.stats[3]).unwrap(),
        ];
        for row in rows {
            assert!(row.pass, "{row:?}");
        }
        let var_e = out.stats[3].variance();
        let z = (var_e - energy_variance_closed_form(&p, t1)) / out.stats[3].variance_stderr();
        assert!(z.abs() < 3.0, "z = {z}");
    }

    #[test]
    fn law_at_final_time_does_not_depend_on_step() {
        let p = single_mode(1.0, 0.5, 0.2);
        let coarse = WaveSampler::new(&p, &TimeGrid::new(0.0, 0.2, 5).unwrap());
        let fine = WaveSampler::new(&p, &TimeGrid::new(0.0, 0.05, 20).unwrap());
        let stats = |s: &WaveSampler, key: u64, k: usize| {
            run_ensemble(10_000, 1, 1, |i| Ok(vec![s.sample(&RandomStream::new(key).child(i as u64)).u(k)[0]]))
                .unwrap()
                .stats[0]
        };
        let (a, b) = (stats(&coarse, 1, 5), stats(&fine, 2, 20));
        let z_mean = (a.mean() - b.mean()) / (a.stderr().powi(2) + b.stderr().powi(2)).sqrt();
        let z_var = (a.variance() - b.variance()) / (a.variance_stderr().powi(2) + b.variance_stderr().powi(2)).sqrt();
        assert!(z_mean.abs() < 3.0 && z_var.abs() < 3.0, "{z_mean} {z_var}");
    }

    proptest! {
        #[test]
        fn covariance_is_symmetric(t in 0.0..5.0f64, s in 0.0..5.0f64, c in 0.2..3.0f64) {
            let spec = SpectrumSpec::Power(2.0).build(4).unwrap();
            let p = WaveProblem::from_modal(c, 1.0, 1.0, spec, vec![0.0; 4], vec![0.0; 4]).unwrap();
            prop_assert!((covariance_closed_form(&p, t, s) - covariance_closed_form(&p, s, t)).abs() < 1e-13);
            prop_assert!(variance_closed_form(&p, t) >= -1e-15);
        }

        #[test]
        fn mean_is_noise_independent(eps in -2.0..2.0f64, t in 0.0..3.0f64) {
            let spec = CovarianceSpectrum::new(vec![1.0, 0.5]).unwrap();
            let p = WaveProblem::from_modal(1.0, 1.0, eps, spec.clone(), vec![1.0, 0.2], vec![0.1, 0.0]).unwrap();
            let q = WaveProblem::from_modal(1.0, 1.0, 0.0, spec, vec![1.0, 0.2], vec![0.1, 0.0]).unwrap();
            prop_assert_eq!(mean_modal(&p, t), mean_modal(&q, t));
        }
    }
}
