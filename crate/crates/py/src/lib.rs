//! Python module `weakdelay`: records, simulation, estimators, waveplate
//! geometry and the analytic precision formulas.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use weakdelay_core::estimators::{self, ExactOptions, WeakValueModel};
use weakdelay_core::io::{read_record_file, write_record_file};
use weakdelay_core::polarization;
use weakdelay_core::simulator::{self, ExperimentConfig, SourceConfig};
use weakdelay_core::spectrum::{self, wavelength_to_angular_frequency};
use weakdelay_core::waveplate::{self as wp, IndexModel, PivotAxis, TiltAngles};
use weakdelay_core::{Error, MeasurementRecord, Method, PlateStack, QwpModel, Spectrum};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Format { .. } | Error::Config(_) | Error::Domain(_) | Error::InvalidSpectrum(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn qwp_model(name: &str, design_nm: f64) -> PyResult<QwpModel> {
    match name {
        "ideal" => Ok(QwpModel::Ideal),
        "absent" => Ok(QwpModel::Absent),
        "dispersive" => wavelength_to_angular_frequency(design_nm)
            .and_then(QwpModel::dispersive_at)
            .map_err(py_err),
        other => Err(PyValueError::new_err(format!(
            "qwp must be 'ideal', 'dispersive' or 'absent', got '{other}'"
        ))),
    }
}

fn pivot_axis(name: &str) -> PyResult<PivotAxis> {
    match name {
        "azimuth" => Ok(PivotAxis::Azimuth),
        "elevation" => Ok(PivotAxis::Elevation),
        other => Err(PyValueError::new_err(format!(
            "pivot must be 'azimuth' or 'elevation', got '{other}'"
        ))),
    }
}

fn quartz_stack(h1_mm: Option<f64>, h2_mm: f64, lambda_nm: f64) -> PyResult<PlateStack> {
    match h1_mm {
        Some(h1) => PlateStack::new(h1 * 1e-3, h2_mm * 1e-3, IndexModel::quartz()),
        None => PlateStack::zero_order_half_wave(h2_mm * 1e-3, lambda_nm * 1e-9, IndexModel::quartz()),
    }
    .map_err(py_err)
}

/// Two-port spectral record on a shared wavelength grid (nm).
#[pyclass(frozen, skip_from_py_object, module = "weakdelay")]
#[derive(Clone)]
pub struct Record {
    inner: MeasurementRecord,
}

#[pymethods]
impl Record {
    #[new]
    fn new(wavelength_nm: Vec<f64>, port1: Vec<f64>, port2: Vec<f64>) -> PyResult<Self> {
        let inner = MeasurementRecord::new(
            Spectrum::new(wavelength_nm.clone(), port1).map_err(py_err)?,
            Spectrum::new(wavelength_nm, port2).map_err(py_err)?,
        )
        .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: read_record_file(&path).map_err(py_err)? })
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        write_record_file(&self.inner, &path).map_err(py_err)
    }

    #[getter]
    fn wavelength_nm(&self) -> Vec<f64> {
        self.inner.grid_nm().to_vec()
    }

    #[getter]
    fn port1(&self) -> Vec<f64> {
        self.inner.port1().weights().to_vec()
    }

    #[getter]
    fn port2(&self) -> Vec<f64> {
        self.inner.port2().weights().to_vec()
    }

    #[getter]
    fn total(&self) -> f64 {
        self.inner.total()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Record(bins={}, total={})", self.inner.len(), self.inner.total())
    }
}

/// Simulates a record. `photons = 0` gives expected (noise-free) weights.
#[pyfunction]
#[pyo3(signature = (tau_s, phi, *, photons=0, seed=0, qwp="ideal", design_nm=780.0,
                    center_nm=780.0, fwhm_nm=17.6, min_nm=690.0, max_nm=900.0, step_nm=0.1))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    tau_s: f64,
    phi: f64,
    photons: u64,
    seed: u64,
    qwp: &str,
    design_nm: f64,
    center_nm: f64,
    fwhm_nm: f64,
    min_nm: f64,
    max_nm: f64,
    step_nm: f64,
) -> PyResult<Record> {
    let config = ExperimentConfig {
        source: SourceConfig { center_nm, fwhm_nm, min_nm, max_nm, step_nm, ..SourceConfig::default() },
        phi_actual: phi,
        phi_assumed: phi,
        qwp: qwp_model(qwp, design_nm)?,
        photons,
        seed,
        tau_true: tau_s,
        ..ExperimentConfig::default()
    };
    Ok(Record { inner: simulator::simulate(&config).map_err(py_err)? })
}

fn result_dict<'py>(py: Python<'py>, r: &estimators::EstimationResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("method", r.method.name())?;
    d.set_item("tau_s", r.tau_hat)?;
    d.set_item("tau_fs", r.tau_hat * 1e15)?;
    if let Some(res) = r.diagnostics.likelihood_residual {
        d.set_item("likelihood_residual", res)?;
    }
    if !r.diagnostics.candidate_roots.is_empty() {
        d.set_item("candidate_roots", r.diagnostics.candidate_roots.clone())?;
    }
    Ok(d)
}

/// Runs one estimator and returns a dict with `method`, `tau_s` and `tau_fs`.
#[pyfunction]
#[pyo3(signature = (record, method, phi, *, qwp="ideal", design_nm=780.0))]
fn estimate<'py>(
    py: Python<'py>,
    record: &Record,
    method: &str,
    phi: f64,
    qwp: &str,
    design_nm: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let m: Method = method.parse().map_err(py_err)?;
    let r = estimators::estimate(&record.inner, m, phi, qwp_model(qwp, design_nm)?).map_err(py_err)?;
    result_dict(py, &r)
}

/// Runs all seven estimators; failures appear as dicts with an `error` key.
#[pyfunction]
#[pyo3(signature = (record, phi, *, qwp="ideal", design_nm=780.0))]
fn estimate_all<'py>(
    py: Python<'py>,
    record: &Record,
    phi: f64,
    qwp: &str,
    design_nm: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let qwp = qwp_model(qwp, design_nm)?;
    estimators::estimate_all(&record.inner, phi, qwp)
        .into_iter()
        .map(|(m, r)| match r {
            Ok(r) => result_dict(py, &r),
            Err(e) => {
                let d = PyDict::new(py);
                d.set_item("method", m.name())?;
                d.set_item("error", e.to_string())?;
                Ok(d)
            }
        })
        .collect()
}

/// g-dependent log-likelihood Σ Q log ζ with ideal weak values.
#[pyfunction]
fn log_likelihood(record: &Record, g: f64, phi: f64) -> PyResult<f64> {
    let model = WeakValueModel::ideal(phi).map_err(py_err)?;
    estimators::log_likelihood(g, &record.inner, &model).map_err(py_err)
}

/// Maximum-likelihood delay with ideal weak values and default search settings.
#[pyfunction]
fn solve_exact(record: &Record, phi: f64) -> PyResult<f64> {
    let model = WeakValueModel::ideal(phi).map_err(py_err)?;
    Ok(estimators::solve_exact(&record.inner, &model, &ExactOptions::default())
        .map_err(py_err)?
        .tau_hat)
}

/// (A_w1, A_w2) = (i tan(φ/2), −i cot(φ/2)).
#[pyfunction]
fn ideal_weak_values(phi: f64) -> PyResult<(Complex64, Complex64)> {
    let w = polarization::ideal_weak_values(phi).map_err(py_err)?;
    Ok((w.aw1, w.aw2))
}

/// Spectral reshaping factor ζ(ω, g, A_w).
#[pyfunction]
fn zeta(omega: f64, g: f64, aw: Complex64) -> PyResult<f64> {
    spectrum::zeta(omega, g, aw).map_err(py_err)
}

/// Delay (s) from pivoting a quartz plate pair by `theta` (rad).
#[pyfunction]
#[pyo3(signature = (theta, *, lambda_nm=780.0, h1_mm=None, h2_mm=1.0, pivot="azimuth"))]
fn pivot_delay(theta: f64, lambda_nm: f64, h1_mm: Option<f64>, h2_mm: f64, pivot: &str) -> PyResult<f64> {
    let stack = quartz_stack(h1_mm, h2_mm, lambda_nm)?;
    wp::pivot_delay(theta, &stack, lambda_nm * 1e-9, pivot_axis(pivot)?).map_err(py_err)
}

/// Retardance (rad) of a quartz plate pair at internal angles ξ, ψ. Without
/// `h1_mm` the pair is a zero-order half-wave plate at 780 nm.
#[pyfunction]
#[pyo3(signature = (lambda_nm, xi, psi, *, h1_mm=None, h2_mm=1.0))]
fn compound_retardance(lambda_nm: f64, xi: f64, psi: f64, h1_mm: Option<f64>, h2_mm: f64) -> PyResult<f64> {
    let stack = quartz_stack(h1_mm, h2_mm, 780.0)?;
    let tilt = TiltAngles::new(xi, psi).map_err(py_err)?;
    wp::compound_retardance(lambda_nm * 1e-9, &stack, tilt).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (epsilon, lambda0_nm=780.0, delta_lambda_nm=17.6, resolution_nm=0.1))]
fn alpha_min(epsilon: f64, lambda0_nm: f64, delta_lambda_nm: f64, resolution_nm: f64) -> PyResult<f64> {
    simulator::alpha_min(epsilon, lambda0_nm, delta_lambda_nm, resolution_nm).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (alpha, beta, lambda0_nm=780.0, delta_lambda_nm=17.6, resolution_nm=0.1))]
fn wva_uncertainty(
    alpha: f64,
    beta: f64,
    lambda0_nm: f64,
    delta_lambda_nm: f64,
    resolution_nm: f64,
) -> PyResult<f64> {
    simulator::wva_uncertainty(alpha, beta, lambda0_nm, delta_lambda_nm, resolution_nm).map_err(py_err)
}

/// Monte Carlo SNR (dB) of the first-order estimator; one dict per (α, φ_assumed).
#[pyfunction]
#[pyo3(signature = (alphas, phi_actual, phi_assumed, *, trials=100, photons=simulator::DEFAULT_PHOTONS, seed=0))]
fn snr_sweep<'py>(
    py: Python<'py>,
    alphas: Vec<f64>,
    phi_actual: f64,
    phi_assumed: Vec<f64>,
    trials: usize,
    photons: u64,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let config = ExperimentConfig { photons, seed, ..ExperimentConfig::default() };
    let points = py
        .detach(|| simulator::snr_sweep(&alphas, phi_actual, &phi_assumed, trials, &config))
        .map_err(py_err)?;
    points
        .iter()
        .map(|p| {
            let d = PyDict::new(py);
            d.set_item("alpha", p.alpha)?;
            d.set_item("phi_assumed", p.phi_assumed)?;
            d.set_item("snr_db", p.snr_db)?;
            d.set_item("trials", p.trials)?;
            d.set_item("bias_s", p.bias_s)?;
            d.set_item("std_s", p.std_s)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
pub fn weakdelay(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Record>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_all, m)?)?;
    m.add_function(wrap_pyfunction!(log_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(solve_exact, m)?)?;
    m.add_function(wrap_pyfunction!(ideal_weak_values, m)?)?;
    m.add_function(wrap_pyfunction!(zeta, m)?)?;
    m.add_function(wrap_pyfunction!(pivot_delay, m)?)?;
    m.add_function(wrap_pyfunction!(compound_retardance, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_min, m)?)?;
    m.add_function(wrap_pyfunction!(wva_uncertainty, m)?)?;
    m.add_function(wrap_pyfunction!(snr_sweep, m)?)?;
    m.add("PHI_JWM", simulator::PHI_JWM)?;
    m.add("PHI_WVA", simulator::PHI_WVA)?;
    Ok(())
}
