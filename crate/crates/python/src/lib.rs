//! Python bindings: coupling models, ladder ED, disorder scans, ramps and the runner.

use std::path::PathBuf;

use dipolar_core::circuit::CircuitParams;
use dipolar_core::coupling::{site_coupling, zero_coupling_distance, CouplingModel as CoreModel, PairOrientation};
use dipolar_core::disorder::{disorder_scan as core_scan, solve_realization, DisorderSpec, ScanAxis, ScanConfig};
use dipolar_core::geometry::QubitSite;
use dipolar_core::lindblad::{NoiseParams, RampConfig};
use dipolar_core::observables::BondReport;
use dipolar_core::runner::{self, ExperimentConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: dipolar_core::Error) -> PyErr {
    match e {
        dipolar_core::Error::Config { .. }
        | dipolar_core::Error::Geometry(_)
        | dipolar_core::Error::CoincidentSites(..)
        | dipolar_core::Error::InsideOffset { .. }
        | dipolar_core::Error::CouplingModel(_)
        | dipolar_core::Error::SpinSystem(_)
        | dipolar_core::Error::Schedule(_)
        | dipolar_core::Error::DimensionOverflow { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn site(x: f64, y: f64, angle_deg: f64) -> PyResult<QubitSite> {
    QubitSite::at(x, y, angle_deg.to_radians()).map_err(err)
}

/// Dipolar coupling model; energies in 2π·MHz, lengths in mm.
#[pyclass(from_py_object)]
#[derive(Clone)]
pub struct CouplingModel {
    inner: CoreModel,
}

#[pymethods]
impl CouplingModel {
    #[new]
    #[pyo3(signature = (j0=42.0, r_m=0.25, g_max=60.0, delta=1500.0, cavity=true))]
    fn new(j0: f64, r_m: f64, g_max: f64, delta: f64, cavity: bool) -> PyResult<Self> {
        let inner = CoreModel {
            j0,
            r_m,
            g_max,
            delta,
            cavity_enabled: cavity,
            ..CoreModel::reference()
        };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn j0(&self) -> f64 {
        self.inner.j0
    }

    #[getter]
    fn r_m(&self) -> f64 {
        self.inner.r_m
    }

    /// `J` between unit-length dipoles at `(x, y)` with in-plane angles in degrees.
    #[pyo3(signature = (a, b, angle_a_deg=90.0, angle_b_deg=90.0))]
    fn coupling(&self, a: (f64, f64), b: (f64, f64), angle_a_deg: f64, angle_b_deg: f64) -> PyResult<f64> {
        site_coupling(&site(a.0, a.1, angle_a_deg)?, &site(b.0, b.1, angle_b_deg)?, &self.inner).map_err(err)
    }

    /// Side-by-side distance where the direct and cavity terms cancel, or `None`.
    #[pyo3(signature = (r_max=10.0))]
    fn zero_distance(&self, r_max: f64) -> PyResult<Option<f64>> {
        zero_coupling_distance(&self.inner, &PairOrientation::side_by_side(), r_max).map_err(err)
    }

    fn __repr__(&self) -> String {
        let m = &self.inner;
        format!(
            "CouplingModel(j0={}, r_m={}, g_max={}, delta={}, cavity={})",
            m.j0, m.r_m, m.g_max, m.delta, m.cavity_enabled
        )
    }
}

/// Avoided-crossing coupling of two reference circuits, 2π·MHz.
#[pyfunction]
#[pyo3(signature = (a, b, angle_deg=90.0, cavity=true))]
fn circuit_coupling(a: (f64, f64), b: (f64, f64), angle_deg: f64, cavity: bool) -> PyResult<f64> {
    let mut p = CircuitParams::reference();
    if !cavity {
        p = p.without_cavity();
    }
    let e = p
        .coupling(&site(a.0, a.1, angle_deg)?, &site(b.0, b.1, angle_deg)?)
        .map_err(err)?;
    Ok(e.j)
}

fn report_dict<'py>(py: Python<'py>, r: &BondReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("J2_over_J1", r.j2_over_j1)?;
    d.set_item("L", r.l)?;
    d.set_item("Dz", r.dz)?;
    d.set_item("Dz_sum", r.dz_sum)?;
    d.set_item("Dx", r.dx)?;
    d.set_item("Bz", r.bz)?;
    d.set_item("Bx", r.bx)?;
    d.set_item("Bzz", r.bzz)?;
    d.set_item("chosen_bond_index", r.chosen_bond_index)?;
    Ok(d)
}

/// Ground-state bond observables of the open J1–J2 chain at half filling.
#[pyfunction]
#[pyo3(signature = (l, j1, j2_over_j1, fields=None))]
fn ladder_observables<'py>(
    py: Python<'py>,
    l: usize,
    j1: f64,
    j2_over_j1: f64,
    fields: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let h = fields.unwrap_or_else(|| vec![0.0; l]);
    let r = py.detach(|| solve_realization(l, j1, j2_over_j1, &h)).map_err(err)?;
    report_dict(py, &r)
}

/// Disorder-averaged observables over a spread grid: `{spread: {name: (mean, stderr)}}`.
#[pyfunction]
#[pyo3(signature = (l, j1, j2_over_j1, spreads, realizations, seed=0))]
fn disorder_scan<'py>(
    py: Python<'py>,
    l: usize,
    j1: f64,
    j2_over_j1: f64,
    spreads: Vec<f64>,
    realizations: usize,
    seed: u64,
) -> PyResult<Vec<(f64, Bound<'py, PyDict>)>> {
    let cfg = ScanConfig {
        l,
        j1,
        j2_over_j1,
        axis: ScanAxis::Spread(spreads),
        disorder: DisorderSpec {
            mean: 0.0,
            spread: 0.0,
            realizations,
            master_seed: seed,
        },
    };
    let res = py.detach(|| core_scan(&cfg)).map_err(err)?;
    res.points
        .iter()
        .map(|p| {
            let d = PyDict::new(py);
            for (name, s) in dipolar_core::disorder::SCAN_OBSERVABLES.iter().zip(&p.stats) {
                d.set_item(*name, (s.mean, s.stderr))?;
            }
            Ok((p.axis_value, d))
        })
        .collect()
}

/// One ramp realization; returns `{"t": [...], "Bz": [...], ...}` in internal time units.
#[pyfunction]
#[pyo3(signature = (l, j1, j2_over_j1, kappa_khz=0.0, gamma_khz=0.0, spread=0.0, seed=0, realization=0, samples=51))]
#[allow(clippy::too_many_arguments)]
fn ramp<'py>(
    py: Python<'py>,
    l: usize,
    j1: f64,
    j2_over_j1: f64,
    kappa_khz: f64,
    gamma_khz: f64,
    spread: f64,
    seed: u64,
    realization: u64,
    samples: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let noise = NoiseParams::from_khz(l, kappa_khz, gamma_khz);
    let noisy = !noise.is_zero();
    let mut cfg = RampConfig::new(l, j1, j2_over_j1 * j1, noise).map_err(err)?;
    cfg.disorder.spread = spread;
    cfg.disorder.master_seed = seed;
    cfg.samples = samples;
    cfg.validate().map_err(err)?;
    let tr = py.detach(|| cfg.run_realization(realization, noisy)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("t", tr.times)?;
    d.set_item("mean_Sz", tr.mean_sz)?;
    d.set_item("Bz", tr.bz)?;
    d.set_item("Bx", tr.bx)?;
    d.set_item("Bzz", tr.bzz)?;
    d.set_item("purity", tr.purity)?;
    Ok(d)
}

/// Loads, validates and runs a TOML experiment; returns the manifest as a JSON string.
#[pyfunction]
#[pyo3(signature = (path, output_dir=None))]
fn run_config(py: Python<'_>, path: PathBuf, output_dir: Option<PathBuf>) -> PyResult<String> {
    let mut cfg = ExperimentConfig::load(&path).map_err(err)?;
    if let Some(d) = output_dir {
        cfg.output_dir = d;
    }
    let report = py.detach(|| runner::run(&cfg)).map_err(err)?;
    serde_json::to_string(&report.manifest).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Raises `ValueError` naming the offending field when the config is invalid.
#[pyfunction]
fn validate_config(path: PathBuf) -> PyResult<String> {
    let cfg = ExperimentConfig::load(&path).map_err(err)?;
    Ok(cfg.kind.name().to_string())
}

#[pyfunction]
fn list_experiments() -> Vec<(&'static str, &'static str)> {
    runner::list_experiments()
}

#[pymodule]
pub fn dipolar(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<CouplingModel>()?;
    m.add_function(wrap_pyfunction!(circuit_coupling, m)?)?;
    m.add_function(wrap_pyfunction!(ladder_observables, m)?)?;
    m.add_function(wrap_pyfunction!(disorder_scan, m)?)?;
    m.add_function(wrap_pyfunction!(ramp, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(list_experiments, m)?)?;
    Ok(())
}
