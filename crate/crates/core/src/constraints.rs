//! Joint and Cartesian limits and their shaping into a per-step velocity box.
//!
//! Each constrained quantity `x` with position range `[x_min, x_max]` and velocity
//! range `[v_min, v_max]` gets the velocity box
//!
//! ```text
//! lower = max((x_min - x) / T, v_min)
//! upper = min((x_max - x) / T, v_max)
//! ```
//!
//! so that one explicit Euler step of length `T` cannot leave the position range.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kinematics::{JointConfig, RobotModel, RowSource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointLimits {
    pub q_min: f64,
    pub q_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl JointLimits {
    pub fn symmetric(position: f64, velocity: f64) -> Self {
        Self {
            q_min: -position,
            q_max: position,
            v_min: -velocity,
            v_max: velocity,
        }
    }
}

/// Limits on the constrained coordinates of one control point (one entry per axis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartesianLimits {
    pub p_min: Vec<f64>,
    pub p_max: Vec<f64>,
    pub v_min: Vec<f64>,
    pub v_max: Vec<f64>,
}

impl CartesianLimits {
    pub fn dim(&self) -> usize {
        self.p_min.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitSet {
    pub joints: Vec<JointLimits>,
    pub control_points: Vec<CartesianLimits>,
}

fn check_range(what: &str, pos_min: f64, pos_max: f64, vel_min: f64, vel_max: f64) -> Result<()> {
    let all_finite = [pos_min, pos_max, vel_min, vel_max]
        .iter()
        .all(|v| v.is_finite());
    if !all_finite {
        return Err(Error::InvalidLimits(format!("{what}: non-finite limit")));
    }
    if pos_min >= pos_max {
        return Err(Error::InvalidLimits(format!(
            "{what}: position minimum {pos_min} is not below maximum {pos_max}"
        )));
    }
    if !(vel_min < 0.0 && vel_max > 0.0) {
        return Err(Error::InvalidLimits(format!(
            "{what}: velocity range [{vel_min}, {vel_max}] must contain zero strictly"
        )));
    }
    Ok(())
}

impl LimitSet {
    /// Validates the ordering invariants and that the layout matches `model`.
    pub fn validate(&self, model: &RobotModel) -> Result<()> {
        check_dim("joint limits", model.dof(), self.joints.len())?;
        check_dim(
            "control point limits",
            model.control_point_count(),
            self.control_points.len(),
        )?;
        for (j, lim) in self.joints.iter().enumerate() {
            check_range(
                &format!("joint {}", j + 1),
                lim.q_min,
                lim.q_max,
                lim.v_min,
                lim.v_max,
            )?;
        }
        for (i, (lim, cp)) in self.control_points.iter().zip(model.control_points()).enumerate() {
            let d = cp.dim();
            for (name, v) in [
                ("p_min", &lim.p_min),
                ("p_max", &lim.p_max),
                ("v_min", &lim.v_min),
                ("v_max", &lim.v_max),
            ] {
                if v.len() != d {
                    return Err(Error::InvalidLimits(format!(
                        "control point {}: {name} has {} entries, expected {d}",
                        i + 1,
                        v.len()
                    )));
                }
            }
            for a in 0..d {
                check_range(
                    &format!("control point {} axis {}", i + 1, cp.axes[a].name()),
                    lim.p_min[a],
                    lim.p_max[a],
                    lim.v_min[a],
                    lim.v_max[a],
                )?;
            }
        }
        Ok(())
    }

    pub fn cartesian_dim(&self) -> usize {
        self.control_points.iter().map(CartesianLimits::dim).sum()
    }
}

/// A closed velocity interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityBox {
    pub min: f64,
    pub max: f64,
}

/// Shapes one coordinate. A crossed box (only possible once the position limit is
/// already breached by more than one step of maximum velocity) collapses onto the
/// velocity limit that points back into the admissible range.
fn shape(x: f64, pos_min: f64, pos_max: f64, vel_min: f64, vel_max: f64, period: f64) -> VelocityBox {
    let min = ((pos_min - x) / period).max(vel_min);
    let max = ((pos_max - x) / period).min(vel_max);
    if min <= max {
        VelocityBox { min, max }
    } else if x > pos_max {
        VelocityBox { min, max: min }
    } else {
        VelocityBox { min: max, max }
    }
}

fn check_period(period: f64) -> Result<()> {
    if period.is_finite() && period > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidLimits(format!(
            "sampling time must be positive, got {period}"
        )))
    }
}

pub fn joint_velocity_box(limits: &LimitSet, q: &JointConfig, period: f64) -> Result<Vec<VelocityBox>> {
    check_period(period)?;
    check_dim("joint configuration", limits.joints.len(), q.len())?;
    Ok(limits
        .joints
        .iter()
        .zip(q.as_vector().iter())
        .map(|(lim, &qj)| shape(qj, lim.q_min, lim.q_max, lim.v_min, lim.v_max, period))
        .collect())
}

/// `p_cp` holds the constrained coordinates of all control points, in model order.
pub fn cartesian_velocity_box(
    limits: &LimitSet,
    p_cp: &DVector<f64>,
    period: f64,
) -> Result<Vec<VelocityBox>> {
    check_period(period)?;
    check_dim("control point coordinates", limits.cartesian_dim(), p_cp.len())?;
    let mut out = Vec::with_capacity(p_cp.len());
    let mut h = 0;
    for lim in &limits.control_points {
        for a in 0..lim.dim() {
            out.push(shape(
                p_cp[h],
                lim.p_min[a],
                lim.p_max[a],
                lim.v_min[a],
                lim.v_max[a],
                period,
            ));
            h += 1;
        }
    }
    Ok(out)
}

/// Lower and upper velocity bounds for every row of the augmented matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedBounds {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub row_map: Vec<RowSource>,
}

impl GeneralizedBounds {
    /// Bounds for a raw problem; rows are labelled generically.
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        check_dim("bounds", lower.len(), upper.len())?;
        if lower.iter().chain(upper.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("bounds"));
        }
        let row_map = (0..lower.len()).map(RowSource::Generic).collect();
        Ok(Self {
            lower,
            upper,
            row_map,
        })
    }

    pub fn from_boxes(boxes: &[VelocityBox], row_map: Vec<RowSource>) -> Self {
        Self {
            lower: DVector::from_iterator(boxes.len(), boxes.iter().map(|b| b.min)),
            upper: DVector::from_iterator(boxes.len(), boxes.iter().map(|b| b.max)),
            row_map,
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }
}

/// Joint boxes followed by control-point boxes, aligned with the augmented matrix rows.
pub fn generalized_bounds(
    model: &RobotModel,
    limits: &LimitSet,
    q: &JointConfig,
    p_cp: &DVector<f64>,
    period: f64,
) -> Result<GeneralizedBounds> {
    check_dim("joint limits", model.dof(), limits.joints.len())?;
    check_dim("control point limits", model.cartesian_dim(), limits.cartesian_dim())?;
    let mut boxes = joint_velocity_box(limits, q, period)?;
    boxes.extend(cartesian_velocity_box(limits, p_cp, period)?);
    Ok(GeneralizedBounds::from_boxes(&boxes, model.row_map()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{Axis, ControlPoint};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6};

    const T: f64 = 0.001;

    fn paper_model() -> RobotModel {
        let cps = (1..=5).map(|f| ControlPoint::new(f, vec![Axis::Y])).collect();
        RobotModel::new(vec![1.0; 6], cps).unwrap()
    }

    fn paper_limits() -> LimitSet {
        LimitSet {
            joints: vec![JointLimits::symmetric(FRAC_PI_2, 1.0); 6],
            control_points: vec![
                CartesianLimits {
                    p_min: vec![-1.1],
                    p_max: vec![1.0],
                    v_min: vec![-0.8],
                    v_max: vec![0.8],
                };
                5
            ],
        }
    }

    fn joint_box(q: f64) -> VelocityBox {
        let limits = paper_limits();
        let mut cfg = vec![0.0; 6];
        cfg[0] = q;
        joint_velocity_box(&limits, &JointConfig::from_slice(&cfg).unwrap(), T).unwrap()[0]
    }

    #[test]
    fn interior_joint_uses_velocity_limits() {
        assert_eq!(joint_box(0.0), VelocityBox { min: -1.0, max: 1.0 });
    }

    #[test]
    fn joint_at_upper_limit() {
        assert_eq!(joint_box(FRAC_PI_2).max, 0.0);
    }

    #[test]
    fn joint_near_upper_limit() {
        let b = joint_box(FRAC_PI_2 - 0.0005);
        assert!((b.max - 0.5).abs() < 1e-9);
        assert_eq!(b.min, -1.0);
    }

    #[test]
    fn crossed_box_collapses_onto_return_velocity() {
        // 0.01 rad beyond the limit: one step at -1 rad/s is not enough to recover.
        let b = joint_box(FRAC_PI_2 + 0.01);
        assert_eq!(b, VelocityBox { min: -1.0, max: -1.0 });
        let b = joint_box(-FRAC_PI_2 - 0.01);
        assert_eq!(b, VelocityBox { min: 1.0, max: 1.0 });
        // Slightly beyond: the box is still ordered and only admits motion back inside.
        let b = joint_box(FRAC_PI_2 + 0.0002);
        assert!(b.min == -1.0 && b.max < 0.0);
    }

    #[test]
    fn cartesian_boxes() {
        let limits = paper_limits();
        let boxes = cartesian_velocity_box(&limits, &DVector::zeros(5), T).unwrap();
        assert!(boxes.iter().all(|b| *b == VelocityBox { min: -0.8, max: 0.8 }));

        let mut p = DVector::zeros(5);
        p[1] = 1.0;
        p[2] = 1.0 - 0.0004;
        let boxes = cartesian_velocity_box(&limits, &p, T).unwrap();
        assert_eq!(boxes[1].max, 0.0);
        assert!((boxes[2].max - 0.4).abs() < 1e-9);
    }

    #[test]
    fn generalized_bounds_at_initial_configuration() {
        let model = paper_model();
        let q0 = JointConfig::from_slice(&[
            FRAC_PI_6, -FRAC_PI_6, -FRAC_PI_6, FRAC_PI_3, -FRAC_PI_6, -FRAC_PI_6,
        ])
        .unwrap();
        let p = crate::kinematics::control_point_positions(&model, &q0).unwrap();
        let b = generalized_bounds(&model, &paper_limits(), &q0, &p, T).unwrap();
        assert_eq!(b.len(), 11);
        for j in 0..6 {
            assert_eq!((b.lower[j], b.upper[j]), (-1.0, 1.0));
            assert_eq!(b.row_map[j], RowSource::Joint(j));
        }
        for h in 6..11 {
            assert_eq!((b.lower[h], b.upper[h]), (-0.8, 0.8));
            assert!(matches!(b.row_map[h], RowSource::ControlPoint { axis: Axis::Y, .. }));
        }
    }

    #[test]
    fn joint_only_bounds_match_joint_boxes() {
        let model = RobotModel::serial(vec![1.0; 3]).unwrap();
        let limits = LimitSet {
            joints: vec![JointLimits::symmetric(1.0, 2.0); 3],
            control_points: vec![],
        };
        let q = JointConfig::from_slice(&[0.999, -0.5, 0.0]).unwrap();
        let b = generalized_bounds(&model, &limits, &q, &DVector::zeros(0), T).unwrap();
        let boxes = joint_velocity_box(&limits, &q, T).unwrap();
        assert_eq!(b, GeneralizedBounds::from_boxes(&boxes, model.row_map()));
    }

    #[test]
    fn validation() {
        let model = paper_model();
        assert!(paper_limits().validate(&model).is_ok());
        let mut bad = paper_limits();
        bad.joints[2].v_min = 0.5;
        assert!(bad.validate(&model).is_err());
        let mut bad = paper_limits();
        bad.control_points[0].p_max = vec![-2.0];
        assert!(bad.validate(&model).is_err());
        let mut bad = paper_limits();
        bad.control_points.pop();
        assert!(bad.validate(&model).is_err());
        assert!(joint_velocity_box(&paper_limits(), &JointConfig::zeros(6), 0.0).is_err());
    }
}
