//! Dirichlet sine basis on `(0, l)`, covariance spectra of Q-Wiener noise,
//! fractional powers of the covariance, and the spatial correlation kernel.
//!
//! Modes are indexed from 1 everywhere: index `n` in the public API is the
//! sine mode `sqrt(2/l) sin(n pi x / l)` and is stored at slot `n - 1`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonnegative, ensure_positive, Error, Result};

/// Orthonormal eigenfunctions of `-d^2/dx^2` with zero boundary values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletBasis {
    l: f64,
    n_modes: usize,
}

impl DirichletBasis {
    pub fn new(l: f64, n_modes: usize) -> Result<Self> {
        ensure_positive("l", l)?;
        if n_modes == 0 {
            return Err(Error::param("n_modes", "must be at least 1"));
        }
        Ok(Self { l, n_modes })
    }

    /// The unit interval basis `sqrt(2) sin(n pi x)`.
    pub fn unit(n_modes: usize) -> Result<Self> {
        Self::new(1.0, n_modes)
    }

    pub fn length(&self) -> f64 {
        self.l
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// `n pi / l`.
    pub fn wavenumber(&self, n: usize) -> f64 {
        n as f64 * PI / self.l
    }

    /// Laplacian eigenvalue `lambda_n = (n pi / l)^2`.
    pub fn eigenvalue(&self, n: usize) -> f64 {
        let k = self.wavenumber(n);
        k * k
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.n_modes).map(|n| self.eigenvalue(n)).collect()
    }

    /// `e_n(x)` for any `n >= 1` (not limited to the truncation).
    pub fn eval(&self, n: usize, x: f64) -> f64 {
        (2.0 / self.l).sqrt() * (self.wavenumber(n) * x).sin()
    }

    /// Values of `e_1..e_N` at `x`.
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        (1..=self.n_modes).map(|n| self.eval(n, x)).collect()
    }

    pub fn check_point(&self, x: f64) -> Result<()> {
        if x.is_finite() && (0.0..=self.l).contains(&x) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { value: x, bound: self.l })
        }
    }

    /// Evaluates `sum_n coeffs_n e_n(x)`.
    pub fn synthesize(&self, v: &HilbertVector, x: f64) -> Result<f64> {
        v.check_len(self.n_modes)?;
        self.check_point(x)?;
        Ok(v.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * self.eval(i + 1, x))
            .sum())
    }

    /// Uniform grid of `intervals + 1` points covering `[0, l]`.
    pub fn grid(&self, intervals: usize) -> Vec<f64> {
        let h = self.l / intervals as f64;
        (0..=intervals).map(|j| j as f64 * h).collect()
    }

    /// Smallest admissible quadrature grid: at least 8 intervals per mode.
    pub fn default_intervals(&self) -> usize {
        8 * self.n_modes
    }

    /// Projects grid samples (on [`Self::grid`] with `values.len() - 1`
    /// intervals) onto `e_1..e_N` with the composite trapezoid rule.
    pub fn project(&self, values: &[f64]) -> Result<HilbertVector> {
        if values.len() < 2 {
            return Err(Error::param("values", "need at least two grid samples"));
        }
        let intervals = values.len() - 1;
        let xs = self.grid(intervals);
        let coeffs = (1..=self.n_modes)
            .map(|n| {
                let g: Vec<f64> = xs.iter().zip(values).map(|(&x, &v)| v * self.eval(n, x)).collect();
                trapezoid(&g, self.l / intervals as f64)
            })
            .collect();
        Ok(HilbertVector { coeffs })
    }
}

/// Composite trapezoid rule for equally spaced samples.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Coefficients of a function in the sine basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HilbertVector {
    pub coeffs: Vec<f64>,
}

impl HilbertVector {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        Self { coeffs: vec![0.0; n] }
    }

    /// The basis vector `e_mode` (1-based) in an `n`-mode truncation.
    pub fn basis_vector(n: usize, mode: usize) -> Result<Self> {
        if mode == 0 || mode > n {
            return Err(Error::param("mode", format!("must lie in 1..={n}, got {mode}")));
        }
        let mut v = Self::zeros(n);
        v.coeffs[mode - 1] = 1.0;
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        other.check_len(self.len())?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum())
    }

    pub(crate) fn check_len(&self, expected: usize) -> Result<()> {
        if self.coeffs.len() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                got: self.coeffs.len(),
            })
        }
    }
}

/// How a spectrum's eigenvalues decay with the mode index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DecayLaw {
    FiniteRank,
    Power(f64),
    Exponential(f64),
    Explicit,
}

/// Textual spectrum specification: `finite:q1,q2,...`, `power:p` or `exp:r`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumSpec {
    Finite(Vec<f64>),
    Power(f64),
    Exponential(f64),
}

impl SpectrumSpec {
    /// Materialises the first `n_modes` eigenvalues.
    pub fn build(&self, n_modes: usize) -> Result<CovarianceSpectrum> {
        if n_modes == 0 {
            return Err(Error::param("n_modes", "must be at least 1"));
        }
        match self {
            SpectrumSpec::Finite(values) => {
                if values.len() > n_modes {
                    return Err(Error::param(
                        "spectrum",
                        format!("{} finite eigenvalues exceed {n_modes} modes", values.len()),
                    ));
                }
                let mut q = values.clone();
                q.resize(n_modes, 0.0);
                CovarianceSpectrum::with_law(q, DecayLaw::FiniteRank)
            }
            &SpectrumSpec::Power(p) => {
                let q = (1..=n_modes).map(|n| (n as f64).powf(-p)).collect();
                CovarianceSpectrum::with_law(q, DecayLaw::Power(p))
            }
            &SpectrumSpec::Exponential(r) => {
                let q = (1..=n_modes).map(|n| (-r * n as f64).exp()).collect();
                CovarianceSpectrum::with_law(q, DecayLaw::Exponential(r))
            }
        }
    }
}

fn parse_real(input: &str, token: &str) -> Result<f64> {
    token
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::SpectrumParse {
            input: input.to_string(),
            reason: format!("`{token}` is not a finite number"),
        })
}

impl FromStr for SpectrumSpec {
    type Err = Error;

    fn from_str(input: &str) -> Result<Self> {
        let fail = |reason: &str| Error::SpectrumParse {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        let (kind, body) = input.split_once(':').ok_or_else(|| fail("expected `kind:value`"))?;
        match kind {
            "finite" => {
                if body.trim().is_empty() {
                    return Err(fail("finite spectrum needs at least one eigenvalue"));
                }
                let values = body.split(',').map(|t| parse_real(input, t)).collect::<Result<Vec<_>>>()?;
                if let Some(v) = values.iter().find(|v| **v < 0.0) {
                    return Err(fail(&format!("negative eigenvalue {v}")));
                }
                Ok(SpectrumSpec::Finite(values))
            }
            "power" => {
                let p = parse_real(input, body)?;
                if p <= 1.0 {
                    return Err(fail("power law needs p > 1 for a finite trace"));
                }
                Ok(SpectrumSpec::Power(p))
            }
            "exp" => {
                let r = parse_real(input, body)?;
                if r <= 0.0 {
                    return Err(fail("exponential law needs r > 0"));
                }
                Ok(SpectrumSpec::Exponential(r))
            }
            _ => Err(fail("kind must be one of finite, power, exp")),
        }
    }
}

impl fmt::Display for SpectrumSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectrumSpec::Finite(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "finite:{}", parts.join(","))
            }
            SpectrumSpec::Power(p) => write!(f, "power:{p}"),
            SpectrumSpec::Exponential(r) => write!(f, "exp:{r}"),
        }
    }
}

/// Eigenvalues `q_n` of a trace-class covariance operator, aligned with the
/// sine basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpectrum {
    q: Vec<f64>,
    decay_law: DecayLaw,
}

impl CovarianceSpectrum {
    /// Explicit eigenvalue list; rejects negative or non-finite entries.
    pub fn new(q: Vec<f64>) -> Result<Self> {
        Self::with_law(q, DecayLaw::Explicit)
    }

    pub fn with_law(q: Vec<f64>, decay_law: DecayLaw) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::param("q", "spectrum needs at least one eigenvalue"));
        }
        for (i, &v) in q.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::NegativeEigenvalue { index: i + 1, value: v });
            }
        }
        Ok(Self { q, decay_law })
    }

    pub fn parse(spec: &str, n_modes: usize) -> Result<Self> {
        spec.parse::<SpectrumSpec>()?.build(n_modes)
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    /// `q_n` for 1-based `n`.
    pub fn q(&self, n: usize) -> f64 {
        self.q[n - 1]
    }

    pub fn n_modes(&self) -> usize {
        self.q.len()
    }

    pub fn decay_law(&self) -> DecayLaw {
        self.decay_law
    }

    /// `Tr(Q) = sum_n q_n` over the stored modes (compensated summation).
    pub fn trace(&self) -> f64 {
        neumaier_sum(self.q.iter().copied())
    }

    /// Mass `sum_{n > N} q_n` dropped by the truncation, for laws where the
    /// tail is known. Finite-rank and explicit spectra have no tail.
    pub fn tail_mass(&self) -> f64 {
        tail_mass(self.decay_law, self.q.len())
    }
}

/// Dropped mass `sum_{n > n_modes} q_n` of a decay law.
pub fn tail_mass(law: DecayLaw, n_modes: usize) -> f64 {
    match law {
        DecayLaw::FiniteRank | DecayLaw::Explicit => 0.0,
        DecayLaw::Exponential(r) => (-r * (n_modes as f64 + 1.0)).exp() / (1.0 - (-r).exp()),
        DecayLaw::Power(p) => power_tail(p, n_modes),
    }
}

/// `sum_{n > n0} n^-p` for `p > 1`: a few explicit terms then an
/// Euler-Maclaurin remainder.
fn power_tail(p: f64, n0: usize) -> f64 {
    const EXPLICIT: usize = 16;
    let f = |n: f64| n.powf(-p);
    let head = neumaier_sum((n0 + 1..n0 + 1 + EXPLICIT).map(|n| f(n as f64)));
    let m = (n0 + 1 + EXPLICIT) as f64;
    let tail = m.powf(1.0 - p) / (p - 1.0) + 0.5 * f(m) + p * m.powf(-p - 1.0) / 12.0
        - p * (p + 1.0) * (p + 2.0) * m.powf(-p - 3.0) / 720.0;
    head + tail
}

/// Smallest truncation whose dropped tail is below `rel_tol` times the full
/// trace. Returns `None` for laws without a tail estimate.
pub fn modes_for_tail(spec: &SpectrumSpec, rel_tol: f64) -> Option<usize> {
    let law = match spec {
        SpectrumSpec::Finite(v) => return Some(v.len().max(1)),
        &SpectrumSpec::Power(p) => DecayLaw::Power(p),
        &SpectrumSpec::Exponential(r) => DecayLaw::Exponential(r),
    };
    let total = tail_mass(law, 0);
    let ok = |n: usize| tail_mass(law, n) < rel_tol * total;
    let mut hi = 1usize;
    while !ok(hi) {
        hi = hi.checked_mul(2)?;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ok(mid) {
            hi = mid
        } else {
            lo = mid
        }
    }
    Some(hi.max(1))
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `Q^gamma a = sum_n q_n^gamma <a, e_n> e_n`, with `q^0 = 1` (so
/// `gamma = 0` is the identity even on the kernel of Q).
pub fn apply_q_gamma(spec: &CovarianceSpectrum, gamma: f64, a: &HilbertVector) -> Result<HilbertVector> {
    ensure_nonnegative("gamma", gamma)?;
    a.check_len(spec.n_modes())?;
    if gamma == 0.0 {
        return Ok(a.clone());
    }
    let coeffs = spec.q.iter().zip(&a.coeffs).map(|(q, c)| q.powf(gamma) * c).collect();
    Ok(HilbertVector { coeffs })
}

/// Truncated spatial correlation `q(x, y) = sum_n q_n e_n(x) e_n(y)`.
pub fn kernel(spec: &CovarianceSpectrum, basis: &DirichletBasis, x: f64, y: f64) -> Result<f64> {
    if spec.n_modes() != basis.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: basis.n_modes(),
            got: spec.n_modes(),
        });
    }
    basis.check_point(x)?;
    basis.check_point(y)?;
    Ok(spec
        .q
        .iter()
        .enumerate()
        .map(|(i, q)| q * basis.eval(i + 1, x) * basis.eval(i + 1, y))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trace_of_zero_spectrum() {
        assert_eq!(CovarianceSpectrum::new(vec![0.0; 3]).unwrap().trace(), 0.0);
    }

    #[test]
    fn trace_of_finite_list() {
        assert_eq!(CovarianceSpectrum::new(vec![1.0, 0.5, 0.25]).unwrap().trace(), 1.75);
    }

    #[test]
    fn trace_of_inverse_squares() {
        let spec = SpectrumSpec::Power(2.0).build(1_000_000).unwrap();
        assert!((spec.trace() - PI * PI / 6.0).abs() < 1e-6);
        assert!((spec.trace() - 1.644933).abs() < 1e-6);
    }

    #[test]
    fn negative_eigenvalue_rejected() {
        assert!(matches!(
            CovarianceSpectrum::new(vec![1.0, -0.1]),
            Err(Error::NegativeEigenvalue { index: 2, .. })
        ));
    }

    #[test]
    fn q_gamma_identity_and_powers() {
        let spec = CovarianceSpectrum::new(vec![4.0, 9.0]).unwrap();
        let a = HilbertVector::new(vec![1.0, 1.0]);
        assert_eq!(apply_q_gamma(&spec, 0.0, &a).unwrap(), a);
        assert_eq!(apply_q_gamma(&spec, 1.0, &a).unwrap().coeffs, vec![4.0, 9.0]);
        let b = HilbertVector::new(vec![1.0, 2.0]);
        assert_eq!(apply_q_gamma(&spec, 0.5, &b).unwrap().coeffs, vec![2.0, 6.0]);
    }

    #[test]
    fn q_gamma_zero_on_kernel_of_q() {
        let spec = CovarianceSpectrum::new(vec![0.0, 1.0]).unwrap();
        let a = HilbertVector::new(vec![3.0, 1.0]);
        assert_eq!(apply_q_gamma(&spec, 0.0, &a).unwrap().coeffs, vec![3.0, 1.0]);
        assert_eq!(apply_q_gamma(&spec, 0.5, &a).unwrap().coeffs, vec![0.0, 1.0]);
    }

    #[test]
    fn q_gamma_dimension_mismatch() {
        let spec = CovarianceSpectrum::new(vec![1.0, 1.0]).unwrap();
        assert!(apply_q_gamma(&spec, 1.0, &HilbertVector::zeros(3)).is_err());
        assert!(apply_q_gamma(&spec, -1.0, &HilbertVector::zeros(2)).is_err());
    }

    #[test]
    fn kernel_single_mode_midpoint() {
        let basis = DirichletBasis::unit(4).unwrap();
        let spec = CovarianceSpectrum::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((kernel(&spec, &basis, 0.5, 0.5).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_rejects_outside_points() {
        let basis = DirichletBasis::unit(2).unwrap();
        let spec = CovarianceSpectrum::new(vec![1.0, 1.0]).unwrap();
        assert!(kernel(&spec, &basis, -0.1, 0.5).is_err());
        assert!(kernel(&spec, &basis, 0.5, 1.5).is_err());
    }

    #[test]
    fn orthonormal_under_trapezoid() {
        let basis = DirichletBasis::new(2.5, 24).unwrap();
        let xs = basis.grid(basis.default_intervals());
        let h = basis.length() / basis.default_intervals() as f64;
        for m in 1..=24 {
            for n in 1..=24 {
                let g: Vec<f64> = xs.iter().map(|&x| basis.eval(m, x) * basis.eval(n, x)).collect();
                let ip = trapezoid(&g, h);
                let expected = if m == n { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() < 1e-10, "<e_{m}, e_{n}> = {ip}");
            }
        }
    }

    #[test]
    fn eigenvalues_increase() {
        let ev = DirichletBasis::new(3.0, 50).unwrap().eigenvalues();
        assert!(ev.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn parseval_for_smooth_function() {
        // f(x) = x (1 - x): ||f||^2 = 1/30.
        let basis = DirichletBasis::unit(32).unwrap();
        let xs = basis.grid(basis.default_intervals());
        let values: Vec<f64> = xs.iter().map(|x| x * (1.0 - x)).collect();
        let v = basis.project(&values).unwrap();
        assert!((v.norm_sq() - 1.0 / 30.0).abs() < 1.0 / 32.0 * 1e-2);
    }

    #[test]
    fn q_acts_as_kernel_integral() {
        // Q a(x) = int q(x,y) a(y) dy, checked at several x for a finite-rank Q.
        let basis = DirichletBasis::unit(6).unwrap();
        let spec = SpectrumSpec::Finite(vec![1.0, 0.5, 0.0, 0.25]).build(6).unwrap();
        let a = HilbertVector::new(vec![0.3, -1.0, 2.0, 0.7, 0.1, -0.2]);
        let qa = apply_q_gamma(&spec, 1.0, &a).unwrap();
        let m = basis.default_intervals() * 4;
        let ys = basis.grid(m);
        let a_vals: Vec<f64> = ys.iter().map(|&y| basis.synthesize(&a, y).unwrap()).collect();
        for x in [0.1, 0.33, 0.5, 0.9] {
            let integrand: Vec<f64> = ys
                .iter()
                .zip(&a_vals)
                .map(|(&y, &ay)| kernel(&spec, &basis, x, y).unwrap() * ay)
                .collect();
            let quad = trapezoid(&integrand, 1.0 / m as f64);
            let direct = basis.synthesize(&qa, x).unwrap();
            assert!((quad - direct).abs() < 1e-8, "x={x}: {quad} vs {direct}");
        }
    }

    #[test]
    fn spectrum_strings() {
        assert_eq!("finite:1,0.5".parse::<SpectrumSpec>().unwrap(), SpectrumSpec::Finite(vec![1.0, 0.5]));
        assert_eq!("power:2".parse::<SpectrumSpec>().unwrap(), SpectrumSpec::Power(2.0));
        assert_eq!("exp:0.5".parse::<SpectrumSpec>().unwrap(), SpectrumSpec::Exponential(0.5));
        for bad in ["", "power", "power:", "power:1", "exp:-1", "finite:", "finite:1,-2", "gauss:1", "POWER:2", "power:nan"] {
            assert!(bad.parse::<SpectrumSpec>().is_err(), "{bad} should fail");
        }
        let s = SpectrumSpec::Finite(vec![1.0]).build(4).unwrap();
        assert_eq!(s.values(), &[1.0, 0.0, 0.0, 0.0]);
        assert!(SpectrumSpec::Finite(vec![1.0; 5]).build(4).is_err());
    }

    #[test]
    fn tail_mass_matches_brute_force() {
        let brute: f64 = (11..2_000_000).map(|n| (n as f64).powi(-2)).sum::<f64>() + 1.0 / 2_000_000.0;
        assert!((tail_mass(DecayLaw::Power(2.0), 10) - brute).abs() < 1e-9);
        let r = 0.7;
        let brute: f64 = (6..200).map(|n| (-r * n as f64).exp()).sum();
        assert!((tail_mass(DecayLaw::Exponential(r), 5) - brute).abs() < 1e-14);
    }

    #[test]
    fn truncation_helper() {
        let n = modes_for_tail(&SpectrumSpec::Exponential(1.0), 1e-6).unwrap();
        let total = tail_mass(DecayLaw::Exponential(1.0), 0);
        assert!(tail_mass(DecayLaw::Exponential(1.0), n) < 1e-6 * total);
        assert!(tail_mass(DecayLaw::Exponential(1.0), n - 1) >= 1e-6 * total);
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric(x in 0.0f64..2.0, y in 0.0f64..2.0) {
            let basis = DirichletBasis::new(2.0, 16).unwrap();
            let spec = SpectrumSpec::Power(2.0).build(16).unwrap();
            let a = kernel(&spec, &basis, x, y).unwrap();
            let b = kernel(&spec, &basis, y, x).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
        }

        #[test]
        fn spectrum_display_round_trips(values in prop::collection::vec(0.0f64..10.0, 1..6), p in 1.01f64..5.0) {
            let f = SpectrumSpec::Finite(values);
            prop_assert_eq!(f.to_string().parse::<SpectrumSpec>().unwrap(), f);
            let pw = SpectrumSpec::Power(p);
            prop_assert_eq!(pw.to_string().parse::<SpectrumSpec>().unwrap(), pw);
        }
    }
}
