//! Post-hoc checks of a rollout: hard limits, solver bookkeeping and oracle
//! cross-checks of sampled steps.

use crate::error::Result;
use crate::kinematics::JointConfig;
use crate::oracle::{max_scaling_oracle, qp_min_norm, ORACLE_ROW_CAP};
use crate::simulation::{step_problem, Rollout, Scenario};
use crate::sns::VIOLATION_EPS;

pub const POSITION_TOL: f64 = 1e-6;
pub const VELOCITY_TOL: f64 = 1e-9;
/// Allowed excess of the SNS scale over the oracle maximum.
pub const SCALE_TOL: f64 = 1e-6;
/// Residual allowed on `J qdot = s xdot`, relative to `max(1, |xdot|)`.
pub const TASK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    /// Steps that went through the oracle.
    pub oracle_steps: usize,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Every `stride`-th step is cross-checked against the oracle, plus every scaled step.
    pub stride: usize,
    pub bisection_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            stride: 100,
            bisection_tol: 1e-7,
        }
    }
}

fn limit_check(report: &mut VerifyReport, name: &str, value: f64, tol: f64) {
    report.push(name, value <= tol, format!("max {value:.3e} (tolerance {tol:.0e})"));
}

pub fn verify_rollout(scenario: &Scenario, rollout: &Rollout, opts: &VerifyOptions) -> Result<VerifyReport> {
    let s = &rollout.summary;
    let mut report = VerifyReport::default();
    limit_check(&mut report, "joint position limits", s.max_joint_position_violation, POSITION_TOL);
    limit_check(&mut report, "joint velocity limits", s.max_joint_velocity_violation, VELOCITY_TOL);
    limit_check(&mut report, "control point position limits", s.max_cp_position_violation, POSITION_TOL);
    limit_check(&mut report, "control point velocity limits", s.max_cp_velocity_violation, VELOCITY_TOL);
    // The solver accepts rows within its violation tolerance, so that is the bar here.
    limit_check(&mut report, "shaped velocity box", s.max_bound_excess, VIOLATION_EPS);

    let rows = scenario.model.augmented_dim();
    report.push(
        "iterations within row count",
        s.max_iterations <= rows.max(1),
        format!("max {} for {rows} rows", s.max_iterations),
    );

    if rows > ORACLE_ROW_CAP {
        report.push(
            "oracle cross-check",
            true,
            format!("skipped: {rows} rows exceed the oracle cap {ORACLE_ROW_CAP}"),
        );
        return Ok(report);
    }

    let stride = opts.stride.max(1);
    let mut worst_residual = 0.0_f64;
    let mut worst_gap = f64::INFINITY;
    let mut failures = Vec::new();
    for (k, row) in rollout.rows.iter().enumerate() {
        let scaled = row.scale < 1.0;
        if k % stride != 0 && !scaled {
            continue;
        }
        report.oracle_steps += 1;
        let q = JointConfig::from_slice(&row.q)?;
        let problem = step_problem(scenario, &q, row.t)?;
        let task = &problem.task;
        let qdot = nalgebra::DVector::from_column_slice(&row.qdot);

        let residual = (&task.jacobian * &qdot - &task.velocity * row.scale).amax()
            / task.velocity.amax().max(1.0);
        worst_residual = worst_residual.max(residual);
        if residual > TASK_TOL {
            failures.push(format!("t={:.3}: task residual {residual:.3e}", row.t));
        }

        if scaled {
            let s_max = max_scaling_oracle(task, &problem.matrix, &problem.bounds, opts.bisection_tol)?;
            worst_gap = worst_gap.min(s_max - row.scale);
            if row.scale > s_max + SCALE_TOL {
                failures.push(format!("t={:.3}: s = {} above oracle {s_max}", row.t, row.scale));
            }
        } else if !qp_min_norm(task, &problem.matrix, &problem.bounds)?.is_feasible() {
            failures.push(format!("t={:.3}: unscaled but the oracle finds the task infeasible", row.t));
        }
    }
    let gap = if worst_gap.is_finite() {
        format!(", min oracle gap {worst_gap:.3e}")
    } else {
        String::new()
    };
    let mut detail = format!(
        "{} steps, max task residual {worst_residual:.3e}{gap}",
        report.oracle_steps
    );
    if let Some(first) = failures.first() {
        detail.push_str(&format!("; {} failures, first: {first}", failures.len()));
    }
    report.push("oracle cross-check", failures.is_empty(), detail);
    Ok(report)
}
