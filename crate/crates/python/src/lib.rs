//! Python bindings. Vectors go in and out as lists of floats, matrices as lists of rows.

use std::path::PathBuf;

use gsns::constraints::GeneralizedBounds;
use gsns::io::{load_scenario, write_trace, TraceLayout};
use gsns::kinematics::{self as kin, Axis, ControlPoint, JointConfig};
use gsns::sns::{self, SnsOptions, TaskSpec};
use gsns::simulation;
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>], what: &str) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(format!("{what}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn config(q: Vec<f64>) -> PyResult<JointConfig> {
    JointConfig::from_slice(&q).map_err(value_err)
}

fn parse_axes(axes: &str) -> PyResult<Vec<Axis>> {
    match axes {
        "x" => Ok(vec![Axis::X]),
        "y" => Ok(vec![Axis::Y]),
        "xy" => Ok(vec![Axis::X, Axis::Y]),
        other => Err(PyValueError::new_err(format!("axes must be \"x\", \"y\" or \"xy\", got {other:?}"))),
    }
}

/// Planar serial arm. Control points are `(frame, axes)` pairs with frame in 1..=n
/// and axes one of "x", "y", "xy".
#[pyclass(frozen, module = "pygsns")]
struct RobotModel {
    inner: kin::RobotModel,
}

#[pymethods]
impl RobotModel {
    #[new]
    #[pyo3(signature = (link_lengths, control_points = Vec::new()))]
    fn new(link_lengths: Vec<f64>, control_points: Vec<(usize, String)>) -> PyResult<Self> {
        let cps = control_points
            .into_iter()
            .map(|(frame, axes)| Ok(ControlPoint::new(frame, parse_axes(&axes)?)))
            .collect::<PyResult<Vec<_>>>()?;
        let inner = kin::RobotModel::new(link_lengths, cps).map_err(value_err)?;
        Ok(RobotModel { inner })
    }

    #[getter]
    fn dof(&self) -> usize {
        self.inner.dof()
    }

    #[getter]
    fn augmented_dim(&self) -> usize {
        self.inner.augmented_dim()
    }

    /// Frame origins from the base to the end effector, `n + 1` points.
    fn forward_kinematics(&self, q: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
        let points = kin::forward_kinematics(&self.inner, &config(q)?).map_err(value_err)?;
        Ok(points.iter().map(|p| (p.x, p.y)).collect())
    }

    fn end_effector(&self, q: Vec<f64>) -> PyResult<(f64, f64)> {
        let p = kin::end_effector(&self.inner, &config(q)?).map_err(value_err)?;
        Ok((p.x, p.y))
    }

    fn ee_jacobian(&self, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows_of(&kin::ee_jacobian(&self.inner, &config(q)?).map_err(value_err)?))
    }

    fn control_point_jacobian(&self, q: Vec<f64>, index: usize) -> PyResult<Vec<Vec<f64>>> {
        let j = kin::control_point_jacobian(&self.inner, &config(q)?, index).map_err(value_err)?;
        Ok(rows_of(&j))
    }

    fn control_point_positions(&self, q: Vec<f64>) -> PyResult<Vec<f64>> {
        let p = kin::control_point_positions(&self.inner, &config(q)?).map_err(value_err)?;
        Ok(p.iter().copied().collect())
    }

    /// Identity stacked over the control-point Jacobians.
    fn augmented_matrix(&self, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let a = kin::augmented_matrix(&self.inner, &config(q)?).map_err(value_err)?;
        Ok(rows_of(&a.matrix))
    }

    fn __repr__(&self) -> String {
        format!("RobotModel(dof={}, augmented_dim={})", self.inner.dof(), self.inner.augmented_dim())
    }
}

#[pyclass(frozen, get_all, module = "pygsns")]
struct SnsResult {
    qdot: Vec<f64>,
    scale: f64,
    scaled: bool,
    iterations: usize,
    /// `(row, side, value)` with side "min" or "max", in saturation order.
    saturated: Vec<(usize, String, f64)>,
}

#[pymethods]
impl SnsResult {
    fn __repr__(&self) -> String {
        format!(
            "SnsResult(scale={}, scaled={}, iterations={}, saturated={})",
            self.scale,
            self.scaled,
            self.iterations,
            self.saturated.len()
        )
    }
}

/// Solve for joint velocities tracking `task_velocity` through `jacobian` while keeping
/// `matrix @ qdot` within `[lower, upper]`. `matrix` defaults to the identity.
#[pyfunction]
#[pyo3(signature = (jacobian, task_velocity, lower, upper, matrix = None))]
fn sns_velocity(
    jacobian: Vec<Vec<f64>>,
    task_velocity: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    matrix: Option<Vec<Vec<f64>>>,
) -> PyResult<SnsResult> {
    let j = self::matrix(&jacobian, "jacobian")?;
    let a = match matrix {
        Some(rows) => self::matrix(&rows, "matrix")?,
        None => DMatrix::identity(j.ncols(), j.ncols()),
    };
    let task = TaskSpec::new(DVector::from_vec(task_velocity), j).map_err(value_err)?;
    let bounds = GeneralizedBounds::new(DVector::from_vec(lower), DVector::from_vec(upper)).map_err(value_err)?;
    let res = sns::sns_velocity(&task, &a, &bounds, &SnsOptions::default()).map_err(value_err)?;
    Ok(SnsResult {
        qdot: res.qdot.iter().copied().collect(),
        scale: res.scale,
        scaled: res.scaled,
        iterations: res.iterations,
        saturated: res.saturated.iter().map(|s| (s.row, s.side.name().to_string(), s.value)).collect(),
    })
}

/// Per-row task scales for row velocities `alpha * s + beta`. Returns the factors,
/// their minimum and the critical row (or None).
#[pyfunction]
fn task_scaling_factor(
    alpha: Vec<f64>,
    beta: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
) -> PyResult<(Vec<f64>, f64, Option<usize>)> {
    let bounds = GeneralizedBounds::new(DVector::from_vec(lower), DVector::from_vec(upper)).map_err(value_err)?;
    let out = sns::get_task_scaling_factor(&DVector::from_vec(alpha), &DVector::from_vec(beta), &bounds)
        .map_err(value_err)?;
    Ok((out.factors, out.task_scale, out.critical_row))
}

/// Closed-loop rollout of a scenario file. Writes the CSV trace when `out` is given
/// and returns the run summary as a dict.
#[pyfunction]
#[pyo3(signature = (scenario, out = None))]
fn run_scenario(py: Python<'_>, scenario: PathBuf, out: Option<PathBuf>) -> PyResult<Py<PyAny>> {
    let scenario = load_scenario(&scenario).map_err(value_err)?;
    let rollout = simulation::run(&scenario).map_err(value_err)?;
    if let Some(path) = out {
        write_trace(&path, &TraceLayout::for_model(&scenario.model), &rollout.rows)
            .map_err(|e| PyIOError::new_err(e.to_string()))?;
    }
    let s = &rollout.summary;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("steps", s.steps)?;
    d.set_item("max_joint_position_violation", s.max_joint_position_violation)?;
    d.set_item("max_joint_velocity_violation", s.max_joint_velocity_violation)?;
    d.set_item("max_cp_position_violation", s.max_cp_position_violation)?;
    d.set_item("max_cp_velocity_violation", s.max_cp_velocity_violation)?;
    d.set_item("max_iterations", s.max_iterations)?;
    d.set_item("max_error", s.max_error)?;
    d.set_item("max_error_after_transient", s.max_error_after_transient)?;
    d.set_item("final_error", s.final_error)?;
    d.set_item("scaled_steps", s.scaled_steps)?;
    d.set_item("last_scaled_time", s.last_scaled_time)?;
    d.set_item("final_q", rollout.final_q.as_vector().iter().copied().collect::<Vec<f64>>())?;
    Ok(d.into_any().unbind())
}

#[pymodule]
fn pygsns(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<RobotModel>()?;
    m.add_class::<SnsResult>()?;
    m.add_function(wrap_pyfunction!(sns_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(task_scaling_factor, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
