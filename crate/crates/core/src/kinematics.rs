//! Planar nR arm kinematics.
//!
//! Joint `j` rotates link `j` relative to link `j - 1`; absolute link angles are the
//! cumulative sums of the joint angles. Frame `k` sits at the distal end of link `k`,
//! frame `0` is the base at the origin and frame `n` is the end effector.
//!
//! Control points are attached to frames `1..=n` and constrain a subset of the
//! planar coordinates of that frame.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Task dimension of the end-effector position task.
pub const TASK_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
        }
    }
}

/// A Cartesian point on the arm whose selected coordinates are box constrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlPoint {
    /// Frame index in `1..=n`: the point sits at the distal end of link `frame`.
    pub frame: usize,
    /// Constrained coordinates, in the order they appear in the augmented vector.
    pub axes: Vec<Axis>,
}

impl ControlPoint {
    pub fn new(frame: usize, axes: Vec<Axis>) -> Self {
        Self { frame, axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }
}

/// Where a row of the augmented matrix comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSource {
    /// Joint velocity row, 0-based joint index.
    Joint(usize),
    /// Control point velocity row, 0-based control point index and axis.
    ControlPoint { index: usize, axis: Axis },
    /// Row of a raw problem without kinematic meaning.
    Generic(usize),
}

impl RowSource {
    pub fn label(&self) -> String {
        match *self {
            RowSource::Joint(j) => format!("joint {}", j + 1),
            RowSource::ControlPoint { index, axis } => {
                format!("cp {} {}", index + 1, axis.name())
            }
            RowSource::Generic(h) => format!("row {}", h + 1),
        }
    }
}

/// Geometry of a planar revolute chain plus its control points.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    link_lengths: Vec<f64>,
    control_points: Vec<ControlPoint>,
}

impl RobotModel {
    pub fn new(link_lengths: Vec<f64>, control_points: Vec<ControlPoint>) -> Result<Self> {
        if link_lengths.is_empty() {
            return Err(Error::InvalidModel("at least one link is required".into()));
        }
        for (i, &l) in link_lengths.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "link {} has non-positive length {l}",
                    i + 1
                )));
            }
        }
        let n = link_lengths.len();
        for (i, cp) in control_points.iter().enumerate() {
            if cp.frame == 0 || cp.frame > n {
                return Err(Error::InvalidModel(format!(
                    "control point {} is attached to frame {}, expected 1..={n}",
                    i + 1,
                    cp.frame
                )));
            }
            if cp.axes.is_empty() || cp.axes.len() > 2 {
                return Err(Error::InvalidModel(format!(
                    "control point {} constrains {} coordinates, expected 1 or 2",
                    i + 1,
                    cp.axes.len()
                )));
            }
            if cp.axes.len() == 2 && cp.axes[0] == cp.axes[1] {
                return Err(Error::InvalidModel(format!(
                    "control point {} lists axis {} twice",
                    i + 1,
                    cp.axes[0].name()
                )));
            }
        }
        Ok(Self {
            link_lengths,
            control_points,
        })
    }

    /// Arm with unit-free link lengths and no control points.
    pub fn serial(link_lengths: Vec<f64>) -> Result<Self> {
        Self::new(link_lengths, Vec::new())
    }

    pub fn link_lengths(&self) -> &[f64] {
        &self.link_lengths
    }

    pub fn control_points(&self) -> &[ControlPoint] {
        &self.control_points
    }

    /// Number of joints.
    pub fn dof(&self) -> usize {
        self.link_lengths.len()
    }

    /// Number of control points.
    pub fn control_point_count(&self) -> usize {
        self.control_points.len()
    }

    /// Total number of constrained Cartesian coordinates.
    pub fn cartesian_dim(&self) -> usize {
        self.control_points.iter().map(ControlPoint::dim).sum()
    }

    /// Row count of the augmented matrix.
    pub fn augmented_dim(&self) -> usize {
        self.dof() + self.cartesian_dim()
    }

    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn row_map(&self) -> Vec<RowSource> {
        let mut rows: Vec<RowSource> = (0..self.dof()).map(RowSource::Joint).collect();
        for (index, cp) in self.control_points.iter().enumerate() {
            rows.extend(
                cp.axes
                    .iter()
                    .map(|&axis| RowSource::ControlPoint { index, axis }),
            );
        }
        rows
    }

    fn check_config(&self, q: &JointConfig) -> Result<()> {
        check_dim("joint configuration", self.dof(), q.len())
    }
}

/// Joint angles in radians. Angles are not wrapped.
#[derive(Debug, Clone, PartialEq)]
pub struct JointConfig(DVector<f64>);

impl JointConfig {
    pub fn new(q: DVector<f64>) -> Result<Self> {
        if q.iter().all(|v| v.is_finite()) {
            Ok(Self(q))
        } else {
            Err(Error::NonFinite("joint configuration"))
        }
    }

    pub fn from_slice(q: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(q))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for JointConfig {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Identity stacked over the control-point Jacobians, with the source of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedJacobian {
    pub matrix: DMatrix<f64>,
    pub row_map: Vec<RowSource>,
}

impl AugmentedJacobian {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }
}

fn absolute_angles(q: &JointConfig) -> Vec<f64> {
    q.as_vector()
        .iter()
        .scan(0.0, |theta, &qj| {
            *theta += qj;
            Some(*theta)
        })
        .collect()
}

/// Positions of frames `0..=n`: the base followed by the end of every link.
pub fn forward_kinematics(model: &RobotModel, q: &JointConfig) -> Result<Vec<Vector2<f64>>> {
    model.check_config(q)?;
    let mut points = Vec::with_capacity(model.dof() + 1);
    let mut p = Vector2::zeros();
    points.push(p);
    for (theta, &l) in absolute_angles(q).iter().zip(&model.link_lengths) {
        p += Vector2::new(l * theta.cos(), l * theta.sin());
        points.push(p);
    }
    Ok(points)
}

pub fn end_effector(model: &RobotModel, q: &JointConfig) -> Result<Vector2<f64>> {
    let points = forward_kinematics(model, q)?;
    Ok(points[model.dof()])
}

/// Positional Jacobian (2 x n) of frame `frame`. Columns of joints beyond `frame` are zero.
fn frame_jacobian(points: &[Vector2<f64>], frame: usize, n: usize) -> DMatrix<f64> {
    let target = points[frame];
    let mut jac = DMatrix::zeros(TASK_DIM, n);
    for j in 0..frame {
        // Joint j + 1 sits at frame j.
        let r = target - points[j];
        jac[(0, j)] = -r.y;
        jac[(1, j)] = r.x;
    }
    jac
}

/// End-effector positional Jacobian (2 x n).
pub fn ee_jacobian(model: &RobotModel, q: &JointConfig) -> Result<DMatrix<f64>> {
    let points = forward_kinematics(model, q)?;
    Ok(frame_jacobian(&points, model.dof(), model.dof()))
}

/// Constrained coordinates of every control point, in model order.
pub fn control_point_positions(model: &RobotModel, q: &JointConfig) -> Result<DVector<f64>> {
    let points = forward_kinematics(model, q)?;
    let values: Vec<f64> = model
        .control_points
        .iter()
        .flat_map(|cp| {
            let p = points[cp.frame];
            cp.axes.iter().map(move |axis| p[axis.index()])
        })
        .collect();
    Ok(DVector::from_vec(values))
}

/// Jacobian (d_i x n) of the selected coordinates of control point `index` (0-based).
pub fn control_point_jacobian(
    model: &RobotModel,
    q: &JointConfig,
    index: usize,
) -> Result<DMatrix<f64>> {
    let cp = model
        .control_points
        .get(index)
        .ok_or(Error::InvalidControlPoint {
            index,
            count: model.control_point_count(),
        })?;
    let points = forward_kinematics(model, q)?;
    let full = frame_jacobian(&points, cp.frame, model.dof());
    Ok(select_axes(&full, &cp.axes))
}

fn select_axes(full: &DMatrix<f64>, axes: &[Axis]) -> DMatrix<f64> {
    DMatrix::from_fn(axes.len(), full.ncols(), |r, c| full[(axes[r].index(), c)])
}

/// The augmented matrix: identity over the stacked control-point Jacobians.
pub fn augmented_matrix(model: &RobotModel, q: &JointConfig) -> Result<AugmentedJacobian> {
    let points = forward_kinematics(model, q)?;
    let n = model.dof();
    let mut matrix = DMatrix::zeros(model.augmented_dim(), n);
    matrix.view_mut((0, 0), (n, n)).fill_with_identity();
    let mut row = n;
    for cp in &model.control_points {
        let jac = select_axes(&frame_jacobian(&points, cp.frame, n), &cp.axes);
        matrix.view_mut((row, 0), (cp.dim(), n)).copy_from(&jac);
        row += cp.dim();
    }
    Ok(AugmentedJacobian {
        matrix,
        row_map: model.row_map(),
    })
}
