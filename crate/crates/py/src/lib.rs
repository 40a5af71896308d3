//! Python bindings for the tip-over analysis and scenario runner.

use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tipover_core::contact;
use tipover_core::force_angle::{self, WrenchTrace};
use tipover_core::geometry::{LayoutMode, Vec3, WheelLayout};
use tipover_core::io;
use tipover_core::scenario::{self, RunResult, RunSummary, ScenarioConfig};
use tipover_core::Error;

fn py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Config(_) | Error::Contract(_) => PyValueError::new_err(msg),
        Error::Divergence { .. } => PyRuntimeError::new_err(msg),
        Error::Degenerate(_) => PyArithmeticError::new_err(msg),
        _ => PyOSError::new_err(msg),
    }
}

type Triple = (f64, f64, f64);

/// `(r_scale, h_scale, min_alpha, windows)`
type SweepRow = (f64, f64, Option<f64>, usize);

fn vec3(t: Triple) -> Vec3 {
    Vec3::new(t.0, t.1, t.2)
}

fn triple(v: &Vec3) -> Triple {
    (v.x, v.y, v.z)
}

/// Round-trips a serializable value through JSON into Python objects.
fn to_python<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Wheel layout of the end-effector in body coordinates.
#[pyclass(name = "Layout", module = "tipover", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLayout {
    inner: WheelLayout,
}

#[pymethods]
impl PyLayout {
    /// Two wheels at `x_B = ±half_spacing`.
    #[staticmethod]
    fn two_wheel(half_spacing: f64, tip_offset: f64) -> PyResult<Self> {
        Self::checked(WheelLayout::two_wheel(half_spacing, tip_offset))
    }

    /// Three wheels on a circle of radius `wheel_distance`.
    #[staticmethod]
    fn three_wheel(wheel_distance: f64, tip_offset: f64) -> PyResult<Self> {
        Self::checked(WheelLayout::three_wheel(wheel_distance, tip_offset))
    }

    #[staticmethod]
    fn reference_planar() -> Self {
        Self {
            inner: WheelLayout::reference_planar(),
        }
    }

    #[staticmethod]
    fn reference_three_wheel() -> Self {
        Self {
            inner: WheelLayout::reference_three_wheel(),
        }
    }

    fn scaled(&self, r_scale: f64, h_scale: f64) -> PyResult<Self> {
        Self::checked(self.inner.scaled(r_scale, h_scale))
    }

    #[getter]
    fn mode(&self) -> &'static str {
        match self.inner.mode {
            LayoutMode::TwoWheel => "two_wheel",
            LayoutMode::ThreeWheel => "three_wheel",
        }
    }

    #[getter]
    fn wheel_distance(&self) -> f64 {
        self.inner.wheel_distance
    }

    #[getter]
    fn tip_offset(&self) -> f64 {
        self.inner.tip_offset
    }

    #[getter]
    fn wheel_positions(&self) -> Vec<Triple> {
        self.inner.wheel_positions.iter().map(triple).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Layout({}, wheel_distance={}, tip_offset={})",
            self.mode(),
            self.inner.wheel_distance,
            self.inner.tip_offset
        )
    }
}

impl PyLayout {
    fn checked(inner: WheelLayout) -> PyResult<Self> {
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }
}

/// Force-angle measure of one wrench. `argmin_axis` is 1-based.
#[pyfunction]
#[pyo3(signature = (layout, force, torque, gravity = (0.0, 0.0, 0.0)))]
fn stability<'py>(
    py: Python<'py>,
    layout: &PyLayout,
    force: Triple,
    torque: Triple,
    gravity: Triple,
) -> PyResult<Bound<'py, PyDict>> {
    let axes = force_angle::support_pattern(&layout.inner).map_err(py_err)?;
    let w = force_angle::net_tipover_wrench(&vec3(force), &vec3(torque), &vec3(gravity));
    let r = force_angle::stability_measure(&w, &axes).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("alpha", r.alpha)?;
    d.set_item("argmin_axis", r.argmin_axis + 1)?;
    d.set_item("theta", r.per_axis.iter().map(|a| a.theta).collect::<Vec<_>>())?;
    d.set_item("sigma", r.per_axis.iter().map(|a| a.sigma).collect::<Vec<_>>())?;
    Ok(d)
}

fn trace_from(py: Python<'_>, path: PathBuf) -> PyResult<WrenchTrace> {
    py.detach(|| io::read_wrench_trace(&path)).map_err(py_err)
}

/// Per-sample alpha (None where indeterminate) and tip-over windows of a trace CSV.
#[pyfunction]
fn analyze_trace<'py>(py: Python<'py>, path: PathBuf, layout: &PyLayout) -> PyResult<Bound<'py, PyDict>> {
    let trace = trace_from(py, path)?;
    let a = py
        .detach(|| force_angle::analyze_trace(&trace, &layout.inner))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("t", &a.time)?;
    d.set_item("alpha", a.alpha_series())?;
    d.set_item(
        "windows",
        a.windows.iter().map(|w| (w.t_start, w.t_end)).collect::<Vec<_>>(),
    )?;
    d.set_item("min_alpha", a.min_alpha())?;
    Ok(d)
}

/// Minimum alpha of a trace CSV under scaled wheel distance and tip offset.
#[pyfunction]
#[pyo3(signature = (path, r_scales, h_scales, layout = None))]
fn sweep(
    py: Python<'_>,
    path: PathBuf,
    r_scales: Vec<f64>,
    h_scales: Vec<f64>,
    layout: Option<&PyLayout>,
) -> PyResult<Vec<SweepRow>> {
    let trace = trace_from(py, path)?;
    let layout = layout.map_or_else(WheelLayout::reference_three_wheel, |l| l.inner.clone());
    let rows = py
        .detach(|| force_angle::geometry_sweep(&trace, &layout, &r_scales, &h_scales))
        .map_err(py_err)?;
    Ok(rows
        .iter()
        .map(|r| (r.r_scale, r.h_scale, r.min_alpha(), r.analysis.windows.len()))
        .collect())
}

/// Contact code: -2 free flight, 0 full contact, ±1 planar tip-over, 10 + mask otherwise.
#[pyfunction]
fn classify_contact(normal_forces: Vec<f64>, delta_f: f64) -> PyResult<i32> {
    contact::classify_contact(&normal_forces, delta_f)
        .map(|c| c.code())
        .map_err(py_err)
}

/// Scenario configuration; `update` merges a TOML fragment.
#[pyclass(name = "Scenario", module = "tipover", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyScenario {
    #[new]
    fn new() -> Self {
        Self {
            inner: ScenarioConfig::default(),
        }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ScenarioConfig::load(&path).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ScenarioConfig::from_toml_str(text).map_err(py_err)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(py_err)
    }

    /// Returns a copy with the tables of `fragment` merged over this config.
    fn update(&self, fragment: &str) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_overrides(fragment).map_err(py_err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    fn run(&self, py: Python<'_>) -> PyResult<PyRun> {
        let cfg = self.inner.clone();
        let inner = py.detach(|| scenario::run_scenario(&cfg)).map_err(py_err)?;
        Ok(PyRun { inner })
    }

    fn __repr__(&self) -> String {
        format!("Scenario({:?})", self.inner.name)
    }
}

/// Result of one closed-loop run.
#[pyclass(name = "Run", module = "tipover", frozen)]
struct PyRun {
    inner: RunResult,
}

#[pymethods]
impl PyRun {
    #[getter]
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &self.inner.metrics)
    }

    #[getter]
    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &RunSummary::new(&self.inner))
    }

    /// Logged series keyed by name; `e_n` holds one list per plane.
    fn series<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let rows = &self.inner.rows;
        let col = |f: &dyn Fn(&scenario::LogRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
        let d = PyDict::new(py);
        d.set_item("t", col(&|r| r.t))?;
        d.set_item("x", col(&|r| r.position.x))?;
        d.set_item("z", col(&|r| r.position.z))?;
        d.set_item("beta", col(&|r| r.beta))?;
        d.set_item("code", rows.iter().map(|r| r.code).collect::<Vec<_>>())?;
        d.set_item(
            "normal_forces",
            rows.iter().map(|r| r.normal_forces.clone()).collect::<Vec<_>>(),
        )?;
        d.set_item("e_n", rows.iter().map(|r| r.e_n.to_vec()).collect::<Vec<_>>())?;
        d.set_item("alpha", rows.iter().map(|r| r.alpha).collect::<Vec<_>>())?;
        Ok(d)
    }

    /// Writes the run's CSV, summary and optional plots into `dir`.
    fn emit(&self, py: Python<'_>, dir: PathBuf) -> PyResult<()> {
        py.detach(|| scenario::emit_outputs(&self.inner, &dir)).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.rows.len()
    }
}

/// The 4×3 scenario grid as `(scenario, variant, Run)`; failed cells raise.
#[pyfunction]
#[pyo3(signature = (base = None))]
fn run_matrix(py: Python<'_>, base: Option<&PyScenario>) -> PyResult<Vec<(char, &'static str, PyRun)>> {
    let cfg = base.map_or_else(ScenarioConfig::default, |b| b.inner.clone());
    let cells = py.detach(|| scenario::run_matrix(&cfg)).map_err(py_err)?;
    cells
        .into_iter()
        .map(|c| {
            let run = c.result.map_err(PyRuntimeError::new_err)?;
            Ok((c.scenario, c.variant.name(), PyRun { inner: run }))
        })
        .collect()
}

#[pyfunction]
fn run_recovery(py: Python<'_>, base: &PyScenario, angles_deg: Vec<f64>) -> PyResult<Vec<(f64, PyRun)>> {
    let cfg = base.inner.clone();
    let runs = py
        .detach(|| scenario::run_recovery(&cfg, &angles_deg))
        .map_err(py_err)?;
    Ok(runs.into_iter().map(|(a, r)| (a, PyRun { inner: r })).collect())
}

#[pyfunction]
fn run_three_wheel(py: Python<'_>, base: &PyScenario, roll_deg: f64, pitch_deg: f64) -> PyResult<PyRun> {
    let cfg = base.inner.clone();
    let inner = py
        .detach(|| scenario::run_three_wheel(&cfg, roll_deg, pitch_deg))
        .map_err(py_err)?;
    Ok(PyRun { inner })
}

#[pymodule]
fn tipover(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLayout>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(stability, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_trace, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(classify_contact, m)?)?;
    m.add_function(wrap_pyfunction!(run_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(run_recovery, m)?)?;
    m.add_function(wrap_pyfunction!(run_three_wheel, m)?)?;
    Ok(())
}
