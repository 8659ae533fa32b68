//! Python bindings: `import pybeamspace`.

use std::path::PathBuf;

use beamspace::io::load_pattern_file;
use beamspace::pipeline::Side;
use beamspace::{Error, PskConstellation, RunConfig, SphericalGrid};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Equiangular sphere sampling with quadrature weights.
#[pyclass(name = "Grid", frozen)]
struct PyGrid(SphericalGrid);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (n_theta=91, n_phi=180))]
    fn new(n_theta: usize, n_phi: usize) -> PyResult<Self> {
        SphericalGrid::new(n_theta, n_phi).map(Self).map_err(to_py)
    }

    #[getter]
    fn n_theta(&self) -> usize {
        self.0.n_theta()
    }

    #[getter]
    fn n_phi(&self) -> usize {
        self.0.n_phi()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Polar samples in radians.
    fn theta(&self) -> Vec<f64> {
        self.0.theta_samples().to_vec()
    }

    fn phi(&self) -> Vec<f64> {
        self.0.phi_samples().to_vec()
    }

    /// Solid-angle weight of every point, theta-major.
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    fn total_weight(&self) -> f64 {
        self.0.total_weight()
    }

    fn __repr__(&self) -> String {
        format!("Grid(n_theta={}, n_phi={})", self.0.n_theta(), self.0.n_phi())
    }
}

/// PSK points and the symbol ratio labels they induce.
#[pyfunction]
#[pyo3(signature = (order=4, offset_deg=45.0))]
fn constellation(order: usize, offset_deg: f64) -> PyResult<(Vec<Complex64>, Vec<String>)> {
    let c = PskConstellation::new(order, offset_deg.to_radians()).map_err(to_py)?;
    let ratios = c.ratio_set();
    Ok((
        c.points().to_vec(),
        (0..ratios.len()).map(|k| ratios.label(k)).collect(),
    ))
}

/// Returns `(n_theta, n_phi, e_theta, e_phi)` from a pattern CSV.
#[pyfunction]
fn load_pattern(path: PathBuf) -> PyResult<(usize, usize, Vec<Complex64>, Vec<Complex64>)> {
    let (h, p) = load_pattern_file(path).map_err(to_py)?;
    Ok((h.n_theta, h.n_phi, p.e_theta().to_vec(), p.e_phi().to_vec()))
}

/// Quick invariant checks as `(name, passed, detail)` rows.
#[pyfunction]
#[pyo3(signature = (seed=1))]
fn selftest(py: Python<'_>, seed: u64) -> Vec<(&'static str, bool, String)> {
    py.detach(|| beamspace::selftest::run_all(seed))
        .into_iter()
        .map(|r| (r.name, r.passed, r.detail))
        .collect()
}

/// Full evaluation for one configuration.
#[pyclass(name = "Pipeline", frozen)]
struct PyPipeline(beamspace::Pipeline);

#[pymethods]
impl PyPipeline {
    /// Built from a JSON string, a config file path, or the defaults.
    #[new]
    #[pyo3(signature = (config_json=None, config_path=None))]
    fn new(py: Python<'_>, config_json: Option<&str>, config_path: Option<PathBuf>) -> PyResult<Self> {
        let cfg = match (config_json, config_path) {
            (Some(_), Some(_)) => {
                return Err(PyValueError::new_err("pass either config_json or config_path"));
            }
            (Some(text), None) => RunConfig::from_json_str(text),
            (None, Some(path)) => RunConfig::load(path),
            (None, None) => Ok(RunConfig::default()),
        }
        .map_err(to_py)?;
        py.detach(|| beamspace::Pipeline::new(cfg)).map(Self).map_err(to_py)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid((*self.0.grid).clone())
    }

    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let m = py.detach(|| self.0.metrics()).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("correlation_db", m.correlation_db.0)?;
        d.set_item("imbalance_db", m.imbalance_db.0)?;
        d.set_item("free_space_correlation_db", m.free_space_correlation_db.0)?;
        d.set_item("free_space_imbalance_db", m.free_space_imbalance_db.0)?;
        d.set_item("average_evm_db", m.average_evm_db.0)?;
        d.set_item("mean_evm_db", m.mean_evm_db.0)?;
        d.set_item("mean_of_evm_db", m.mean_of_evm_db.0)?;
        d.set_item("max_evm_db", m.max_evm_db.0)?;
        d.set_item("masked_fraction", m.masked_fraction.0)?;
        let powers = PyDict::new(py);
        for s in &m.state_power {
            powers.set_item(&s.state, s.power_ratio.0)?;
        }
        d.set_item("state_power_ratio", powers)?;
        Ok(d)
    }

    /// Linear EVM per grid point (theta-major) and the masked flags.
    fn evm_map(&self, py: Python<'_>) -> PyResult<(Vec<f64>, Vec<bool>)> {
        let map = py.detach(|| self.0.evm_map()).map_err(to_py)?;
        Ok((map.evm.values().to_vec(), map.masked))
    }

    /// `(side, ratio, [x1, x2], [est1, est2])` rows; side is "tx" or "rx".
    #[allow(clippy::type_complexity)]
    fn constellation(&self) -> PyResult<Vec<(&'static str, String, [Complex64; 2], [Complex64; 2])>> {
        let ratios = self.0.constellation.ratio_set();
        let rows = self.0.constellation_rows().map_err(to_py)?;
        Ok(rows
            .into_iter()
            .map(|r| {
                let side = match r.side {
                    Side::Transmit => "tx",
                    Side::Receive => "rx",
                };
                (side, ratios.label(r.ratio_index), [r.x1, r.x2], r.actual)
            })
            .collect())
    }

    /// Sorted per-stream error magnitudes plus the scenario tally.
    #[pyo3(signature = (scenarios=None, seed=None, threads=None))]
    fn monte_carlo<'py>(
        &self,
        py: Python<'py>,
        scenarios: Option<usize>,
        seed: Option<u64>,
        threads: Option<usize>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mut cfg = self.0.config.clone();
        if let Some(n) = scenarios {
            cfg.monte_carlo.scenarios = n;
        }
        if let Some(s) = seed {
            cfg.monte_carlo.seed = s;
        }
        if threads.is_some() {
            cfg.monte_carlo.threads = threads;
        }
        let mc = cfg.monte_carlo_config().map_err(to_py)?;
        let p = &self.0;
        let r = py
            .detach(|| beamspace::run_monte_carlo(&p.perturbed, p.channel_basis(), &p.constellation, &mc))
            .map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("stream1", &r.errors[0])?;
        d.set_item("stream2", &r.errors[1])?;
        d.set_item("accepted", r.accepted)?;
        d.set_item("rejected", r.rejected)?;
        Ok(d)
    }
}

#[pymodule]
pub fn pybeamspace(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyPipeline>()?;
    m.add_function(wrap_pyfunction!(constellation, m)?)?;
    m.add_function(wrap_pyfunction!(load_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}
