//! Python bindings: covariance spectra, the closed-form statistics of each
//! problem, single-path samplers and full experiment runs.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use spde_lab_core::burgers::{self, NoiseModel};
use spde_lab_core::experiment::{self, Experiment, ExperimentConfig};
use spde_lab_core::{heat, lyapunov, wave, CovarianceSpectrum, HilbertVector, RandomStream, TimeGrid};

fn py_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Eigenvalues `q_1..q_N` of a trace-class covariance operator.
#[pyclass(name = "Spectrum", module = "spde_lab", frozen)]
struct PySpectrum(CovarianceSpectrum);

#[pymethods]
impl PySpectrum {
    /// Parses `finite:q1,q2,..`, `power:p` or `exp:r` truncated to `n_modes`.
    #[new]
    fn new(spec: &str, n_modes: usize) -> PyResult<Self> {
        CovarianceSpectrum::parse(spec, n_modes).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn from_values(q: Vec<f64>) -> PyResult<Self> {
        CovarianceSpectrum::new(q).map(Self).map_err(py_err)
    }

    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn n_modes(&self) -> usize {
        self.0.n_modes()
    }

    fn trace(&self) -> f64 {
        self.0.trace()
    }

    fn __repr__(&self) -> String {
        format!("Spectrum(n_modes={}, trace={})", self.0.n_modes(), self.0.trace())
    }
}

fn grid(t_final: f64, dt: f64) -> PyResult<TimeGrid> {
    TimeGrid::covering(t_final, dt).map_err(py_err)
}

type WavePath = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>);

/// Stochastic wave equation with modal initial data `f` (displacement) and
/// `g` (velocity).
#[pyclass(name = "WaveProblem", module = "spde_lab", frozen)]
struct PyWave(wave::WaveProblem);

#[pymethods]
impl PyWave {
    #[new]
    fn new(c: f64, l: f64, epsilon: f64, spectrum: &PySpectrum, f: Vec<f64>, g: Vec<f64>) -> PyResult<Self> {
        let (f, g) = (HilbertVector::new(f), HilbertVector::new(g));
        wave::WaveProblem::new(c, l, epsilon, spectrum.0.clone(), &f, &g)
            .map(Self)
            .map_err(py_err)
    }

    fn mean_modal(&self, t: f64) -> Vec<f64> {
        wave::mean_modal(&self.0, t).coeffs
    }

    fn mean_solution(&self, x: f64, t: f64) -> PyResult<f64> {
        wave::mean_solution(&self.0, x, t).map_err(py_err)
    }

    fn variance(&self, t: f64) -> f64 {
        wave::variance_closed_form(&self.0, t)
    }

    fn covariance(&self, t: f64, s: f64) -> f64 {
        wave::covariance_closed_form(&self.0, t, s)
    }

    fn energy_initial(&self) -> f64 {
        wave::energy_initial(&self.0)
    }

    fn energy_mean(&self, t: f64) -> f64 {
        wave::energy_mean_closed_form(&self.0, t)
    }

    fn energy_variance(&self, t: f64) -> f64 {
        wave::energy_variance_closed_form(&self.0, t)
    }

    /// One exact sample path: returns `(times, modal displacements, energies)`.
    #[pyo3(signature = (t_final, dt, seed, key = 0))]
    fn sample(&self, t_final: f64, dt: f64, seed: u64, key: u64) -> PyResult<WavePath> {
        let grid = grid(t_final, dt)?;
        let s = wave::sample_solution(&self.0, &grid, &RandomStream::new(seed).child(key));
        let u = (0..=grid.steps()).map(|k| s.u(k).to_vec()).collect();
        let e = (0..=grid.steps())
            .map(|k| wave::energy(&s, k))
            .collect::<spde_lab_core::Result<_>>()
            .map_err(py_err)?;
        Ok((grid.times(), u, e))
    }
}

/// Heat equation on `[0, 1]` driven by `eps u dw_t`, initial modes `a`.
#[pyclass(name = "HeatProblem", module = "spde_lab", frozen)]
struct PyHeat(heat::HeatProblem);

#[pymethods]
impl PyHeat {
    #[new]
    fn new(epsilon: f64, a: Vec<f64>) -> PyResult<Self> {
        heat::HeatProblem::new(epsilon, &HilbertVector::new(a)).map(Self).map_err(py_err)
    }

    fn mean(&self, t: f64) -> Vec<f64> {
        heat::mean_closed_form(&self.0, t).coeffs
    }

    fn variance(&self, t: f64) -> f64 {
        heat::variance_closed_form(&self.0, t)
    }

    fn covariance(&self, t: f64, tau: f64) -> f64 {
        heat::covariance_closed_form(&self.0, t, tau)
    }

    fn correlation(&self, t: f64, tau: f64) -> PyResult<f64> {
        heat::correlation_closed_form(&self.0, t, tau).map_err(py_err)
    }
}

/// Linear parabolic equation `v_t = v_xx + alpha v + gamma v dw_t`.
#[pyclass(name = "LyapunovProblem", module = "spde_lab", frozen)]
struct PyLyapunov(lyapunov::LyapunovProblem);

#[pymethods]
impl PyLyapunov {
    #[new]
    fn new(alpha: f64, beta: f64, gamma: f64, f: Vec<f64>) -> PyResult<Self> {
        lyapunov::LyapunovProblem::new(alpha, beta, gamma, HilbertVector::new(f))
            .map(Self)
            .map_err(py_err)
    }

    fn exponent_deterministic(&self) -> PyResult<f64> {
        lyapunov::exponent_deterministic(&self.0).map_err(py_err)
    }

    fn exponent_stochastic(&self) -> PyResult<f64> {
        lyapunov::exponent_stochastic(&self.0).map_err(py_err)
    }

    /// Least-squares slope of `log ||v||` along one path, fitted after
    /// `t_burn` (default `0.1 * t_final`). Returns `(slope, stderr)`.
    #[pyo3(signature = (t_final, dt, seed, t_burn = None))]
    fn estimate(&self, t_final: f64, dt: f64, seed: u64, t_burn: Option<f64>) -> PyResult<(f64, f64)> {
        let grid = grid(t_final, dt)?;
        let est = lyapunov::estimate_from_path(&self.0, &grid, &RandomStream::new(seed), t_burn.unwrap_or(0.1 * t_final))
            .map_err(py_err)?;
        Ok((est.slope, est.stderr))
    }
}

/// Galerkin stochastic Burgers equation. `noise` is `"additive"` (needs a
/// spectrum) or `"multiplicative"`.
#[pyclass(name = "BurgersProblem", module = "spde_lab", frozen)]
struct PyBurgers(burgers::BurgersProblem);

#[pymethods]
impl PyBurgers {
    #[new]
    #[pyo3(signature = (nu, l, sigma, u0, noise = "additive", spectrum = None, poincare_c = None))]
    fn new(
        nu: f64,
        l: f64,
        sigma: f64,
        u0: Vec<f64>,
        noise: &str,
        spectrum: Option<&PySpectrum>,
        poincare_c: Option<f64>,
    ) -> PyResult<Self> {
        let model = match (noise, spectrum) {
            ("additive", Some(s)) => NoiseModel::Additive(s.0.clone()),
            ("additive", None) => return Err(PyValueError::new_err("additive noise needs a spectrum")),
            ("multiplicative", _) => NoiseModel::MultiplicativeScalar,
            (other, _) => return Err(PyValueError::new_err(format!("unknown noise model `{other}`"))),
        };
        let mut p = burgers::BurgersProblem::new(nu, l, sigma, model, HilbertVector::new(u0)).map_err(py_err)?;
        if let Some(c) = poincare_c {
            p = p.with_poincare_c(c).map_err(py_err)?;
        }
        Ok(Self(p))
    }

    #[getter]
    fn e0(&self) -> f64 {
        self.0.e0()
    }

    #[getter]
    fn poincare_c(&self) -> f64 {
        self.0.poincare_c()
    }

    fn energy_bound_additive(&self, t: f64) -> PyResult<f64> {
        burgers::energy_bound_additive(&self.0, t, self.0.e0()).map_err(py_err)
    }

    fn energy_bound_additive_gronwall(&self, t: f64) -> PyResult<f64> {
        burgers::energy_bound_additive_gronwall(&self.0, t, self.0.e0()).map_err(py_err)
    }

    fn energy_bound_multiplicative(&self, t: f64) -> PyResult<f64> {
        burgers::energy_bound_multiplicative(&self.0, t, self.0.e0()).map_err(py_err)
    }

    fn exit_probability_bound(&self, t: f64, delta: f64) -> PyResult<f64> {
        burgers::exit_probability_bound(&self.0, t, self.0.e0(), delta).map_err(py_err)
    }

    /// `||u(t_k)||^2` along one path.
    fn energy_trace(&self, py: Python<'_>, t_final: f64, dt: f64, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let grid = grid(t_final, dt)?;
        let trace = py
            .detach(|| burgers::simulate_energy_trace(&self.0, &grid, &RandomStream::new(seed)))
            .map_err(py_err)?;
        Ok((trace.grid.times(), trace.e2))
    }
}

fn config_from_kwargs(name: &str, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<ExperimentConfig> {
    let experiment: Experiment = name.parse().map_err(py_err)?;
    let mut value = serde_json::to_value(ExperimentConfig::defaults(experiment)).map_err(py_err)?;
    let fields = value.as_object_mut().expect("config serializes to a map");
    for (k, v) in kwargs.into_iter().flat_map(|d| d.iter()) {
        let key = k.extract::<String>()?.replace('_', "-");
        if key == "experiment" || (!fields.contains_key(&key) && key != "poincare-c") {
            return Err(PyValueError::new_err(format!("unknown parameter `{key}`")));
        }
        let json = if v.is_none() {
            serde_json::Value::Null
        } else if let Ok(s) = v.extract::<String>() {
            s.into()
        } else if let Ok(i) = v.extract::<u64>() {
            i.into()
        } else {
            v.extract::<f64>()?.into()
        };
        fields.insert(key, json);
    }
    let config: ExperimentConfig = serde_json::from_value(value).map_err(py_err)?;
    config.validate().map_err(py_err)?;
    Ok(config)
}

/// Runs one experiment (`wiener`, `wave`, `heat`, `lyapunov`, `burgers`).
/// Keyword arguments use the CLI flag names with `_` for `-`. Returns a dict
/// with the report rows, series tables, notes and the overall verdict.
#[pyfunction]
#[pyo3(signature = (name, **kwargs))]
fn run_experiment<'py>(py: Python<'py>, name: &str, kwargs: Option<&Bound<'py, PyDict>>) -> PyResult<Bound<'py, PyDict>> {
    let config = config_from_kwargs(name, kwargs)?;
    let out = py.detach(|| experiment::run(&config)).map_err(py_err)?;

    let rows = PyList::empty(py);
    for r in &out.report.rows {
        let d = PyDict::new(py);
        d.set_item("label", &r.label)?;
        d.set_item("t", r.t)?;
        d.set_item("closed_form", r.closed_form)?;
        d.set_item("mc_mean", r.mc_mean)?;
        d.set_item("mc_stderr", r.mc_stderr)?;
        d.set_item("z", r.z)?;
        d.set_item("pass", r.pass)?;
        rows.append(d)?;
    }
    let series = PyDict::new(py);
    for s in &out.series {
        let d = PyDict::new(py);
        d.set_item("columns", &s.columns)?;
        d.set_item("rows", &s.rows)?;
        series.set_item(&s.name, d)?;
    }
    let result = PyDict::new(py);
    result.set_item("experiment", config.experiment.name())?;
    result.set_item("seed", config.seed)?;
    result.set_item("rows", rows)?;
    result.set_item("series", series)?;
    result.set_item("notes", &out.notes)?;
    result.set_item("aborted_samples", out.aborted_samples)?;
    result.set_item("all_pass", out.all_pass())?;
    result.set_item("report_csv", out.report.to_csv())?;
    Ok(result)
}

#[pymodule]
fn spde_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpectrum>()?;
    m.add_class::<PyWave>()?;
    m.add_class::<PyHeat>()?;
    m.add_class::<PyLyapunov>()?;
    m.add_class::<PyBurgers>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
