//! Python bindings. Matrices cross the boundary as nested lists, structured results as dicts.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use cvlab::channels::{self, BathPhysicalParams, ChannelSpec};
use cvlab::nonlocality::{self as nl, DpParameterization, GaussianMixture, PsState};
use cvlab::{protocols, separability as sep, states, Error, Mat, Vector};

create_exception!(pycvlab, UnphysicalError, PyValueError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Unphysical(_) | Error::NotPositiveDefinite | Error::UnpairedSpectrum(_) => {
            UnphysicalError::new_err(e.to_string())
        }
        Error::NoConvergence(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Round-trips a serializable value through JSON into Python objects.
fn to_object<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(json_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn mat_from(rows: Vec<Vec<f64>>) -> PyResult<Mat> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("covariance matrix must be square"));
    }
    Ok(Mat::from_fn(n, n, |i, j| rows[i][j]))
}

fn mat_to(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Gaussian state in units where the vacuum covariance is I/2, ordering (q1, p1, q2, p2, ...).
#[pyclass(name = "GaussianState", module = "pycvlab", frozen)]
struct PyGaussianState {
    inner: states::GaussianState,
}

#[pymethods]
impl PyGaussianState {
    #[new]
    fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = states::GaussianState::new(Vector::from_vec(mean), mat_from(cov)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Builds a family member from a dict such as {"kind": "twb", "r": 0.5}.
    #[staticmethod]
    fn family(py: Python<'_>, spec: Py<PyAny>) -> PyResult<Self> {
        let text: String = py.import("json")?.call_method1("dumps", (spec,))?.extract()?;
        let spec: states::StateFamilySpec = serde_json::from_str(&text).map_err(json_err)?;
        Ok(Self { inner: states::build(&spec).map_err(to_py)? })
    }

    #[staticmethod]
    fn vacuum(n: usize) -> Self {
        Self { inner: states::GaussianState::vacuum(n) }
    }

    #[staticmethod]
    fn twb(r: f64) -> PyResult<Self> {
        Ok(Self { inner: states::build(&states::StateFamilySpec::Twb { r }).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let j: states::StateJson = serde_json::from_str(text).map_err(json_err)?;
        Ok(Self { inner: states::GaussianState::from_json(&j).map_err(to_py)? })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.to_json()).map_err(json_err)
    }

    #[getter]
    fn n_modes(&self) -> usize {
        self.inner.n_modes
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean.iter().copied().collect()
    }

    #[getter]
    fn cov(&self) -> Vec<Vec<f64>> {
        mat_to(&self.inner.cov)
    }

    fn purity(&self) -> f64 {
        states::purity(&self.inner)
    }

    fn entropy(&self) -> PyResult<f64> {
        states::von_neumann_entropy(&self.inner).map_err(to_py)
    }

    fn mean_photon_number(&self) -> f64 {
        states::mean_photon_number(&self.inner)
    }

    fn symplectic_eigenvalues(&self) -> PyResult<Vec<f64>> {
        self.inner.symplectic_eigenvalues().map_err(to_py)
    }

    fn partial_trace(&self, keep: Vec<usize>) -> PyResult<Self> {
        Ok(Self { inner: states::partial_trace(&self.inner, &keep).map_err(to_py)? })
    }

    fn wigner(&self, x: Vec<f64>) -> PyResult<f64> {
        states::wigner_at(&self.inner, &Vector::from_vec(x)).map_err(to_py)
    }

    /// Evolution for time t with every mode coupled to the same squeezed-thermal bath.
    #[pyo3(signature = (t, gamma=1.0, n_th=0.0, n_s=0.0))]
    fn evolve(&self, t: f64, gamma: f64, n_th: f64, n_s: f64) -> PyResult<Self> {
        let spec = ChannelSpec::uniform(self.inner.n_modes, BathPhysicalParams { n_th, n_s }.channel(gamma));
        Ok(Self { inner: channels::evolve(&self.inner, &spec, t).map_err(to_py)? })
    }

    fn __repr__(&self) -> String {
        format!("GaussianState(n_modes={}, purity={:.6})", self.inner.n_modes, states::purity(&self.inner))
    }
}

/// Logarithmic negativity with the listed modes transposed (default: all but the first).
#[pyfunction]
#[pyo3(signature = (state, modes=None))]
fn log_negativity(state: &PyGaussianState, modes: Option<Vec<usize>>) -> PyResult<f64> {
    let modes = modes.unwrap_or_else(|| (1..state.inner.n_modes).collect());
    sep::log_negativity_of(&state.inner, &modes).map_err(to_py)
}

/// Every applicable separability criterion; the partition is "0|1,2" style, second party transposed.
#[pyfunction]
#[pyo3(signature = (state, partition=None, max_iter=200))]
fn separability(
    py: Python<'_>,
    state: &PyGaussianState,
    partition: Option<&str>,
    max_iter: usize,
) -> PyResult<Py<PyAny>> {
    let s = &state.inner;
    let p = match partition {
        Some(t) => cvlab::cli::parse_partition(t, s.n_modes).map_err(to_py)?,
        None => sep::Bipartition::first_vs_rest(s.n_modes),
    };
    let rep = cvlab::cli::separability_report(s, &p, max_iter).map_err(to_py)?;
    to_object(py, &rep)
}

#[pyfunction]
fn tripartite_class(py: Python<'_>, state: &PyGaussianState) -> PyResult<Py<PyAny>> {
    to_object(py, &sep::tripartite_classify(&state.inner).map_err(to_py)?)
}

/// Closed-form separation time of a twin beam in identical baths; None if it never separates.
#[pyfunction]
#[pyo3(signature = (r, gamma=1.0, n_th=0.0, n_s=0.0))]
fn twb_separability_time(r: f64, gamma: f64, n_th: f64, n_s: f64) -> PyResult<Option<f64>> {
    Ok(channels::twb_separability_time(r, gamma, n_th, n_s).map_err(to_py)?.time())
}

#[pyfunction]
fn teleport_fidelity(lam: f64) -> PyResult<f64> {
    protocols::teleport_fidelity_ideal(lam).map_err(to_py)
}

#[pyfunction]
fn ips_teleport_fidelity(lam: f64, tau_eff: f64) -> PyResult<f64> {
    protocols::ips_teleport_fidelity(lam, tau_eff).map_err(to_py)
}

#[pyfunction]
fn teleclone_fidelity(n: f64) -> PyResult<f64> {
    protocols::teleclone_symmetric_fidelity(n).map_err(to_py)
}

#[pyfunction]
fn teleclone_asymmetric(n2: f64, n3: f64) -> PyResult<(f64, f64)> {
    let rep = protocols::teleclone_asymmetric_fidelities(n2, n3).map_err(to_py)?;
    Ok((rep.fidelities[0], rep.fidelities[1]))
}

fn dp_param(name: &str) -> PyResult<DpParameterization> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown displacement family '{name}'")))
}

/// Displaced-parity correlation π^n W at the given complex displacements.
#[pyfunction]
fn dp_correlation(state: &PyGaussianState, alphas: Vec<Complex64>) -> PyResult<f64> {
    let m = GaussianMixture::try_from(&state.inner).map_err(to_py)?;
    nl::dp_correlation(&m, &alphas).map_err(to_py)
}

/// Displaced-parity Bell combination for a Gaussian state at a given J.
#[pyfunction]
#[pyo3(signature = (state, j, param="bw"))]
fn bell_dp(state: &PyGaussianState, j: f64, param: &str) -> PyResult<f64> {
    let p = dp_param(param)?;
    let m = GaussianMixture::try_from(&state.inner).map_err(to_py)?;
    let s = p.setting(j).map_err(to_py)?;
    if p.n_modes() == 2 { nl::bell2_dp(&m, &s) } else { nl::bell3_dp(&m, &s) }.map_err(to_py)
}

/// Displaced-parity Bell combination for the photon-subtracted twin beam.
#[pyfunction]
#[pyo3(signature = (lam, tau_eff, j, param="bw"))]
fn ips_bell_dp(lam: f64, tau_eff: f64, j: f64, param: &str) -> PyResult<f64> {
    let p = dp_param(param)?;
    let w = nl::IpsPrecise::new(lam, tau_eff).map_err(to_py)?;
    nl::bell2_dp(&w, &p.setting(j).map_err(to_py)?).map_err(to_py)
}

/// Largest two-mode pseudospin violation for {"kind": "twb" | "twb_prime" | "ips" | "twba" | "ecs", ...}.
#[pyfunction]
fn bell_ps(py: Python<'_>, spec: Py<PyAny>) -> PyResult<f64> {
    let text: String = py.import("json")?.call_method1("dumps", (spec,))?.extract()?;
    let s: PsState = serde_json::from_str(&text).map_err(json_err)?;
    Ok(nl::ps_correlation(&s).map_err(to_py)?.bell())
}

/// Binned-homodyne Bell combination for angles (θ₁, θ₂, φ₁, φ₂).
#[pyfunction]
#[pyo3(signature = (state, angles, eta=1.0))]
fn bell_homodyne(state: &PyGaussianState, angles: [f64; 4], eta: f64) -> PyResult<f64> {
    let m = GaussianMixture::try_from(&state.inner).map_err(to_py)?;
    nl::homodyne_bell2(&m, angles, eta).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (lam, tau_eff, angles, eta=1.0))]
fn ips_bell_homodyne(lam: f64, tau_eff: f64, angles: [f64; 4], eta: f64) -> PyResult<f64> {
    let m = nl::ips_wigner(lam, tau_eff).map_err(to_py)?;
    nl::homodyne_bell2(&m, angles, eta).map_err(to_py)
}

#[pymodule]
fn pycvlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("UnphysicalError", m.py().get_type::<UnphysicalError>())?;
    m.add_class::<PyGaussianState>()?;
    m.add_function(wrap_pyfunction!(log_negativity, m)?)?;
    m.add_function(wrap_pyfunction!(separability, m)?)?;
    m.add_function(wrap_pyfunction!(tripartite_class, m)?)?;
    m.add_function(wrap_pyfunction!(twb_separability_time, m)?)?;
    m.add_function(wrap_pyfunction!(teleport_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(ips_teleport_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(teleclone_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(teleclone_asymmetric, m)?)?;
    m.add_function(wrap_pyfunction!(dp_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(bell_dp, m)?)?;
    m.add_function(wrap_pyfunction!(ips_bell_dp, m)?)?;
    m.add_function(wrap_pyfunction!(bell_ps, m)?)?;
    m.add_function(wrap_pyfunction!(bell_homodyne, m)?)?;
    m.add_function(wrap_pyfunction!(ips_bell_homodyne, m)?)?;
    Ok(())
}
