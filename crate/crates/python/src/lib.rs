//! Python bindings for the `multicell3d` simulator.

use std::path::PathBuf;

use multicell3d::analytic::{self, AnalyticModel};
use multicell3d::config::RunConfig;
use multicell3d::experiments;
use multicell3d::geometry::Point2;
use multicell3d::precoding::{self, CMatrix};
use multicell3d::scheduler;
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: multicell3d::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Gamma distribution with shape and scale.
#[pyclass(name = "GammaDist", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyGammaDist(analytic::GammaDist);

#[pymethods]
impl PyGammaDist {
    #[new]
    fn new(shape: f64, scale: f64) -> PyResult<Self> {
        analytic::GammaDist::new(shape, scale).map(Self).map_err(py_err)
    }

    #[getter]
    fn shape(&self) -> f64 {
        self.0.shape()
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.0.scale()
    }

    fn mean(&self) -> f64 {
        self.0.mean()
    }

    fn variance(&self) -> f64 {
        self.0.variance()
    }

    /// Distribution of `factor * X`.
    fn scaled(&self, factor: f64) -> PyResult<Self> {
        analytic::gamma_scale(self.0, factor).map(Self).map_err(py_err)
    }

    /// `E[log2(1 + X)]`.
    fn expected_log2_1p(&self) -> PyResult<f64> {
        analytic::exp_log1p_gamma(self.0).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("GammaDist(shape={}, scale={})", self.0.shape(), self.0.scale())
    }
}

/// Gamma with the summed mean and variance of `terms`.
#[pyfunction]
fn moment_match(terms: Vec<PyGammaDist>) -> PyResult<PyGammaDist> {
    let gs: Vec<_> = terms.into_iter().map(|g| g.0).collect();
    analytic::moment_match(&gs).map(PyGammaDist).map_err(py_err)
}

/// Equivalent i.i.d. parameters `(shape, scale, eff_dof, kappa2, sigma2)`.
#[pyfunction]
fn eiid_params(path_gains: Vec<f64>, num_antennas: usize, power: f64) -> PyResult<(f64, f64, f64, f64, f64)> {
    let e = analytic::eiid_params(&path_gains, num_antennas, power).map_err(py_err)?;
    Ok((e.shape, e.scale, e.eff_dof, e.kappa2, e.sigma2))
}

#[pyfunction]
fn nmt_rate(path_gains: Vec<f64>, num_users: usize, num_antennas: usize, power: f64) -> PyResult<f64> {
    AnalyticModel::new(num_antennas, power).nmt_rate(&path_gains, num_users).map_err(py_err)
}

#[pyfunction]
fn cst_rate(path_gains: Vec<f64>, group_sizes: Vec<usize>, serving: usize, num_antennas: usize, power: f64) -> PyResult<f64> {
    AnalyticModel::new(num_antennas, power)
        .cst_rate(&path_gains, &group_sizes, serving)
        .map_err(py_err)
}

fn to_matrix(columns: &[Vec<Complex64>]) -> PyResult<CMatrix> {
    let rows = columns.first().map_or(0, Vec::len);
    if columns.iter().any(|c| c.len() != rows) {
        return Err(PyValueError::new_err("all channel columns must have the same length"));
    }
    Ok(CMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i]))
}

fn to_columns(m: &CMatrix) -> Vec<Vec<Complex64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

/// Unit-norm zero-forcing beamformers for channel vectors given as columns.
#[pyfunction]
fn zf_beamformers(channels: Vec<Vec<Complex64>>) -> PyResult<Vec<Vec<Complex64>>> {
    let h = to_matrix(&channels)?;
    precoding::zf_beamformers(&h).map(|w| to_columns(&w)).map_err(py_err)
}

/// Largest normalised cross-user leakage of `beams` on `channels`.
#[pyfunction]
fn zf_leakage(channels: Vec<Vec<Complex64>>, beams: Vec<Vec<Complex64>>) -> PyResult<f64> {
    Ok(precoding::zf_leakage(&to_matrix(&channels)?, &to_matrix(&beams)?))
}

/// Waterfilling powers and water level.
#[pyfunction]
fn waterfilling(gains: Vec<f64>, budget: f64) -> PyResult<(Vec<f64>, f64)> {
    let w = precoding::allocate_waterfilling(&gains, budget).map_err(py_err)?;
    Ok((w.powers, w.level))
}

/// Time shares of the interior and edge regions.
#[pyfunction]
fn activity_factors(num_interior: usize, num_edge: usize) -> PyResult<(f64, f64)> {
    scheduler::activity_factors(num_interior, num_edge).map_err(py_err)
}

/// Full run configuration; `text` uses the `key = value` file format.
#[pyclass(name = "RunConfig")]
struct PyRunConfig(RunConfig);

type Sweep = Vec<(f64, f64, f64, f64)>;
type ValidationRows = Vec<(f64, f64, f64, f64, f64)>;

#[pymethods]
impl PyRunConfig {
    #[new]
    #[pyo3(signature = (text = ""))]
    fn new(text: &str) -> PyResult<Self> {
        RunConfig::parse_str(text).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        RunConfig::from_file(&path).map(Self).map_err(py_err)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.0.seed = seed;
    }

    #[getter]
    fn num_antennas(&self) -> usize {
        self.0.num_antennas
    }

    /// Per-BS transmit power fixed by the edge SNR.
    fn power(&self) -> PyResult<f64> {
        self.0.power().map_err(py_err)
    }

    /// Path gains from every BS to a user at `(x, y)` with common `tilt`.
    fn path_gains(&self, x: f64, y: f64, tilt: f64) -> PyResult<Vec<f64>> {
        let prop = self.0.directional().map_err(py_err)?;
        let user = prop.layout.user_at(Point2::new(x, y)).map_err(py_err)?;
        let tilts = vec![tilt; prop.num_bs()];
        prop.path_gain_row(&user, &tilts).map_err(py_err)
    }

    /// `(cst, nmt)` lists of `(tilt, edge, average, peak)`.
    fn tilt_sweep(&self, py: Python<'_>) -> PyResult<(Sweep, Sweep)> {
        let r = py.detach(|| experiments::tilt_sweep(&self.0)).map_err(py_err)?;
        let rows = |s: &multicell3d::tilt::TiltSweep| s.points.iter().map(|p| (p.tilt, p.edge, p.average, p.peak)).collect();
        Ok((rows(&r.cst), rows(&r.nmt)))
    }

    /// Best `(d_int, beta_cst, beta_nmt, average)`.
    fn optimize_regions(&self, py: Python<'_>) -> PyResult<(f64, f64, f64, f64)> {
        let r = py.detach(|| experiments::optimize_regions(&self.0)).map_err(py_err)?;
        let p = r.best.params;
        Ok((p.d_int, p.beta_cst, p.beta_nmt, r.best.average))
    }

    /// Rows of `(distance, analytic_cst, mc_cst, analytic_nmt, mc_nmt)`.
    fn validate_rates(&self, py: Python<'_>) -> PyResult<ValidationRows> {
        let rows = py.detach(|| experiments::validate_rates(&self.0)).map_err(py_err)?;
        Ok(rows
            .iter()
            .map(|r| (r.distance, r.analytic_cst, r.mc_cst.mean, r.analytic_nmt, r.mc_nmt.mean))
            .collect())
    }

    /// Per variant `(name, sorted user throughputs)`.
    fn compare_systems(&self, py: Python<'_>) -> PyResult<Vec<(String, Vec<f64>)>> {
        let results = py.detach(|| experiments::compare_systems(&self.0)).map_err(py_err)?;
        results
            .iter()
            .map(|r| Ok((r.variant.name.clone(), r.cdf().map_err(py_err)?.samples().to_vec())))
            .collect()
    }
}

#[pymodule]
fn multicell3d_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGammaDist>()?;
    m.add_class::<PyRunConfig>()?;
    m.add_function(wrap_pyfunction!(moment_match, m)?)?;
    m.add_function(wrap_pyfunction!(eiid_params, m)?)?;
    m.add_function(wrap_pyfunction!(nmt_rate, m)?)?;
    m.add_function(wrap_pyfunction!(cst_rate, m)?)?;
    m.add_function(wrap_pyfunction!(zf_beamformers, m)?)?;
    m.add_function(wrap_pyfunction!(zf_leakage, m)?)?;
    m.add_function(wrap_pyfunction!(waterfilling, m)?)?;
    m.add_function(wrap_pyfunction!(activity_factors, m)?)?;
    Ok(())
}
