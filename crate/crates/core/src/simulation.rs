//! Closed-loop end-effector path tracking.
//!
//! Every control period the commanded task velocity is
//! `xdot = xdot_d + Kp (x_d - x_ee)`, the SNS solver turns it into joint velocities
//! that respect the shaped joint and control-point boxes, and the joints are advanced
//! by one explicit Euler step.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::constraints::{generalized_bounds, GeneralizedBounds, LimitSet};
use crate::error::Result;
use crate::kinematics::{
    augmented_matrix, control_point_positions, ee_jacobian, end_effector, JointConfig, RobotModel,
};
use crate::sns::{check_feasibility, sns_velocity, SnsOptions, TaskSpec};

/// Time parametrisation of the straight path from start to end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimingLaw {
    /// Constant speed.
    Linear,
    /// Rest-to-rest fifth-order polynomial (zero velocity and acceleration at both ends).
    Quintic,
}

/// Straight segment traced from `start` to `end` in `duration` seconds; the end point
/// is held afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub start: Vector2<f64>,
    pub end: Vector2<f64>,
    pub duration: f64,
    pub timing: TimingLaw,
}

impl PathSpec {
    /// Desired position and velocity at time `t`.
    pub fn sample(&self, t: f64) -> (Vector2<f64>, Vector2<f64>) {
        let tau = (t / self.duration).clamp(0.0, 1.0);
        let moving = t >= 0.0 && t < self.duration;
        let (sigma, sigma_dot) = match self.timing {
            TimingLaw::Linear => (tau, if moving { 1.0 / self.duration } else { 0.0 }),
            TimingLaw::Quintic => {
                let tau2 = tau * tau;
                let tau3 = tau2 * tau;
                let sigma = tau3 * (10.0 - 15.0 * tau + 6.0 * tau2);
                let rate = 30.0 * tau2 * (1.0 - tau) * (1.0 - tau) / self.duration;
                (sigma, if moving { rate } else { 0.0 })
            }
        };
        let delta = self.end - self.start;
        (self.start + delta * sigma, delta * sigma_dot)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: RobotModel,
    pub limits: LimitSet,
    pub q0: JointConfig,
    pub path: PathSpec,
    /// Diagonal of the proportional gain on the end-effector position error.
    pub gain: Vector2<f64>,
    /// Control period T [s].
    pub period: f64,
    /// Simulated time [s].
    pub horizon: f64,
}

/// A scenario field that breaks one of the scenario invariants.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct InvariantViolation {
    pub field: String,
    pub message: String,
}

fn violation(field: impl Into<String>, message: impl Into<String>) -> InvariantViolation {
    InvariantViolation {
        field: field.into(),
        message: message.into(),
    }
}

impl Scenario {
    pub fn validate(&self) -> std::result::Result<(), InvariantViolation> {
        let n = self.model.dof();
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(violation("sampling_time", format!("must be positive, got {}", self.period)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(violation("horizon", format!("must be positive, got {}", self.horizon)));
        }
        for k in 0..2 {
            if !(self.gain[k].is_finite() && self.gain[k] > 0.0) {
                return Err(violation(
                    format!("gain[{k}]"),
                    format!("must be positive, got {}", self.gain[k]),
                ));
            }
        }
        if !(self.path.duration.is_finite() && self.path.duration > 0.0) {
            return Err(violation(
                "path.duration",
                format!("must be positive, got {}", self.path.duration),
            ));
        }
        let reach = self.model.reach();
        for (name, p) in [("path.start", self.path.start), ("path.end", self.path.end)] {
            if !(p.x.is_finite() && p.y.is_finite()) || p.norm() > reach {
                return Err(violation(
                    name,
                    format!("point ({}, {}) is outside the reach {reach}", p.x, p.y),
                ));
            }
        }
        self.limits
            .validate(&self.model)
            .map_err(|e| violation("limits", e.to_string()))?;
        if self.q0.len() != n {
            return Err(violation(
                "q0",
                format!("has {} entries, model has {n} joints", self.q0.len()),
            ));
        }
        for (j, lim) in self.limits.joints.iter().enumerate() {
            let q = self.q0[j];
            if q < lim.q_min || q > lim.q_max {
                return Err(violation(
                    format!("q0[{j}]"),
                    format!("{q} is outside [{}, {}]", lim.q_min, lim.q_max),
                ));
            }
        }
        Ok(())
    }

    /// Number of control steps in the horizon.
    pub fn steps(&self) -> usize {
        (self.horizon / self.period).round() as usize
    }
}

/// One control step of the rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub x_ee: [f64; 2],
    /// Desired minus actual end-effector position.
    pub error: [f64; 2],
    pub scale: f64,
    /// Constrained control-point coordinates.
    pub cp: Vec<f64>,
    pub cp_dot: Vec<f64>,
    /// 0-based augmented rows saturated in the returned solution.
    pub saturated: Vec<usize>,
}

impl TraceRow {
    pub fn error_norm(&self) -> f64 {
        self.error[0].hypot(self.error[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub step: usize,
    pub q: JointConfig,
}

impl SimState {
    pub fn initial(scenario: &Scenario) -> Self {
        Self {
            step: 0,
            q: scenario.q0.clone(),
        }
    }
}

/// Diagnostics of one step beyond what the trace row records.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub iterations: usize,
    /// Largest excess of `A qdot` over the shaped box used at this step.
    pub bound_excess: f64,
    pub scaled: bool,
}

/// `xdot_d + Kp (x_d - x_ee)` with diagonal `Kp`.
pub fn task_velocity(
    x_d: &Vector2<f64>,
    xdot_d: &Vector2<f64>,
    x_ee: &Vector2<f64>,
    gain: &Vector2<f64>,
) -> Vector2<f64> {
    xdot_d + gain.component_mul(&(x_d - x_ee))
}

/// The SNS problem posed at one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepProblem {
    pub task: TaskSpec,
    pub matrix: DMatrix<f64>,
    pub bounds: GeneralizedBounds,
    pub x_ee: Vector2<f64>,
    pub x_d: Vector2<f64>,
    pub p_cp: DVector<f64>,
}

/// Builds the task, augmented matrix and shaped bounds at configuration `q`, time `t`.
pub fn step_problem(scenario: &Scenario, q: &JointConfig, t: f64) -> Result<StepProblem> {
    let model = &scenario.model;
    let x_ee = end_effector(model, q)?;
    let (x_d, xdot_d) = scenario.path.sample(t);
    let xdot = task_velocity(&x_d, &xdot_d, &x_ee, &scenario.gain);
    let task = TaskSpec::new(
        DVector::from_column_slice(xdot.as_slice()),
        ee_jacobian(model, q)?,
    )?;
    let matrix = augmented_matrix(model, q)?.matrix;
    let p_cp = control_point_positions(model, q)?;
    let bounds = generalized_bounds(model, &scenario.limits, q, &p_cp, scenario.period)?;
    Ok(StepProblem {
        task,
        matrix,
        bounds,
        x_ee,
        x_d,
        p_cp,
    })
}

/// Runs one control period from `state`.
pub fn step(scenario: &Scenario, state: &SimState) -> Result<(SimState, TraceRow, StepInfo)> {
    let model = &scenario.model;
    let q = &state.q;
    let t = state.step as f64 * scenario.period;

    let StepProblem {
        task,
        matrix,
        bounds,
        x_ee,
        x_d,
        p_cp,
    } = step_problem(scenario, q, t)?;
    let solution = sns_velocity(&task, &matrix, &bounds, &SnsOptions::default())?;

    let adot = &matrix * &solution.qdot;
    let bound_excess = check_feasibility(&solution.qdot, &matrix, &bounds, 0.0)?
        .iter()
        .map(|v| v.margin.abs())
        .fold(0.0, f64::max);

    let n = model.dof();
    let error = x_d - x_ee;
    let row = TraceRow {
        t,
        q: q.as_vector().iter().copied().collect(),
        qdot: solution.qdot.iter().copied().collect(),
        x_ee: [x_ee.x, x_ee.y],
        error: [error.x, error.y],
        scale: solution.scale,
        cp: p_cp.iter().copied().collect(),
        cp_dot: adot.rows(n, adot.len() - n).iter().copied().collect(),
        saturated: solution.saturated.iter().map(|s| s.row).collect(),
    };
    let next = SimState {
        step: state.step + 1,
        q: JointConfig::new(q.as_vector() + &solution.qdot * scenario.period)?,
    };
    let info = StepInfo {
        iterations: solution.iterations,
        bound_excess,
        scaled: solution.scaled,
    };
    Ok((next, row, info))
}

/// Largest violations and tracking figures of a rollout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub steps: usize,
    pub max_joint_position_violation: f64,
    pub max_joint_velocity_violation: f64,
    pub max_cp_position_violation: f64,
    pub max_cp_velocity_violation: f64,
    /// Largest excess over the shaped box of the same step.
    pub max_bound_excess: f64,
    pub max_iterations: usize,
    pub max_error: f64,
    /// Largest error norm at or after 100 ms.
    pub max_error_after_transient: f64,
    pub final_error: f64,
    pub scaled_steps: usize,
    /// Time of the last step with scale below one, if any.
    pub last_scaled_time: Option<f64>,
}

impl RunSummary {
    pub fn scaled_fraction(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.scaled_steps as f64 / self.steps as f64
        }
    }
}

/// End of the transient window excluded from `max_error_after_transient`.
pub const TRANSIENT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub rows: Vec<TraceRow>,
    pub info: Vec<StepInfo>,
    pub final_q: JointConfig,
    pub summary: RunSummary,
}

fn excess(value: f64, min: f64, max: f64) -> f64 {
    (value - max).max(min - value).max(0.0)
}

fn joint_excess(limits: &LimitSet, q: &[f64]) -> f64 {
    limits
        .joints
        .iter()
        .zip(q)
        .map(|(l, &v)| excess(v, l.q_min, l.q_max))
        .fold(0.0, f64::max)
}

fn cp_excess(limits: &LimitSet, values: &[f64], velocity: bool) -> f64 {
    let mut h = 0;
    let mut worst = 0.0_f64;
    for lim in &limits.control_points {
        for a in 0..lim.dim() {
            let (lo, hi) = if velocity {
                (lim.v_min[a], lim.v_max[a])
            } else {
                (lim.p_min[a], lim.p_max[a])
            };
            worst = worst.max(excess(values[h], lo, hi));
            h += 1;
        }
    }
    worst
}

/// Full-horizon rollout. Deterministic for a given scenario.
pub fn run(scenario: &Scenario) -> Result<Rollout> {
    let steps = scenario.steps();
    let limits = &scenario.limits;
    let mut state = SimState::initial(scenario);
    let mut rows = Vec::with_capacity(steps);
    let mut info = Vec::with_capacity(steps);
    let mut summary = RunSummary {
        steps,
        ..RunSummary::default()
    };

    for _ in 0..steps {
        let (next, row, step_info) = step(scenario, &state)?;
        summary.max_joint_position_violation =
            summary.max_joint_position_violation.max(joint_excess(limits, &row.q));
        let vel = limits
            .joints
            .iter()
            .zip(&row.qdot)
            .map(|(l, &v)| excess(v, l.v_min, l.v_max))
            .fold(0.0, f64::max);
        summary.max_joint_velocity_violation = summary.max_joint_velocity_violation.max(vel);
        summary.max_cp_position_violation =
            summary.max_cp_position_violation.max(cp_excess(limits, &row.cp, false));
        summary.max_cp_velocity_violation =
            summary.max_cp_velocity_violation.max(cp_excess(limits, &row.cp_dot, true));
        summary.max_bound_excess = summary.max_bound_excess.max(step_info.bound_excess);
        summary.max_iterations = summary.max_iterations.max(step_info.iterations);

        let err = row.error_norm();
        summary.max_error = summary.max_error.max(err);
        if row.t >= TRANSIENT - 1e-12 {
            summary.max_error_after_transient = summary.max_error_after_transient.max(err);
        }
        summary.final_error = err;
        if row.scale < 1.0 {
            summary.scaled_steps += 1;
            summary.last_scaled_time = Some(row.t);
        }

        rows.push(row);
        info.push(step_info);
        state = next;
    }

    // The state reached after the last step must also respect the position limits.
    let final_q: Vec<f64> = state.q.as_vector().iter().copied().collect();
    summary.max_joint_position_violation =
        summary.max_joint_position_violation.max(joint_excess(limits, &final_q));
    let final_cp = control_point_positions(&scenario.model, &state.q)?;
    summary.max_cp_position_violation = summary
        .max_cp_position_violation
        .max(cp_excess(limits, final_cp.as_slice(), false));

    Ok(Rollout {
        rows,
        info,
        final_q: state.q,
        summary,
    })
}
