//! Brute-force reference solvers used to cross-check the SNS solver.
//!
//! `qp_min_norm` finds the global minimiser of `|qdot|^2` subject to `J qdot = xdot`
//! and `lower <= A qdot <= upper` by enumerating every assignment of rows to
//! {inactive, at_min, at_max}. Assignments with more active rows than the task
//! leaves free (`n - rank J`) are skipped: their equality system is over-determined,
//! and any consistent point they produce is also produced by an independent subset.
//!
//! `joint_only_sns` is the classic SNS restricted to joint velocity bounds, written
//! against a diagonal selection matrix instead of the augmented formulation.

use nalgebra::{DMatrix, DVector};

use crate::constraints::GeneralizedBounds;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{
    numerical_rank, numerical_rank_with_cutoff, pseudoinverse, pseudoinverse_with_cutoff, DEFAULT_RANK_TOL,
};
use crate::sns::{
    scaling_factors, task_cutoff, BoundSide, Saturation, SnsOptions, SnsResult, TaskSpec,
};

/// Largest number of constrained rows the enumeration accepts (3^12 assignments).
pub const ORACLE_ROW_CAP: usize = 12;

/// Tolerance for equality residuals, bound checks and multiplier signs.
const CHECK_TOL: f64 = 1e-9;
const KKT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowStatus {
    Inactive,
    AtMin,
    AtMax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    /// `None` when no point satisfies all constraints.
    pub qdot: Option<DVector<f64>>,
    /// Squared norm of `qdot`, infinite when infeasible.
    pub objective: f64,
    pub active_set: Vec<RowStatus>,
}

impl OracleSolution {
    pub fn is_feasible(&self) -> bool {
        self.qdot.is_some()
    }
}

fn check_problem(task: &TaskSpec, a: &DMatrix<f64>, bounds: &GeneralizedBounds) -> Result<()> {
    check_dim("augmented matrix columns", task.dof(), a.ncols())?;
    check_dim("bounds", a.nrows(), bounds.len())?;
    if a.nrows() > ORACLE_ROW_CAP {
        return Err(Error::SizeCap {
            rows: a.nrows(),
            cap: ORACLE_ROW_CAP,
        });
    }
    Ok(())
}

/// Enumerates assignments in lexicographic order (inactive < at_min < at_max),
/// restricted to at most `max_active` active rows.
struct Assignments {
    current: Vec<RowStatus>,
    max_active: usize,
    done: bool,
}

impl Assignments {
    fn new(rows: usize, max_active: usize) -> Self {
        Self {
            current: vec![RowStatus::Inactive; rows],
            max_active,
            done: false,
        }
    }

    fn advance(&mut self) -> bool {
        // Increment the base-3 counter, last row least significant.
        for status in self.current.iter_mut().rev() {
            match status {
                RowStatus::Inactive => {
                    *status = RowStatus::AtMin;
                    return true;
                }
                RowStatus::AtMin => {
                    *status = RowStatus::AtMax;
                    return true;
                }
                RowStatus::AtMax => *status = RowStatus::Inactive,
            }
        }
        false
    }
}

impl Iterator for Assignments {
    type Item = Vec<RowStatus>;

    fn next(&mut self) -> Option<Vec<RowStatus>> {
        while !self.done {
            let active = self.current.iter().filter(|s| **s != RowStatus::Inactive).count();
            let item = (active <= self.max_active).then(|| self.current.clone());
            self.done = !self.advance();
            if item.is_some() {
                return item;
            }
        }
        None
    }
}

struct Candidate {
    qdot: DVector<f64>,
    /// Stacked constraint matrix `[J; A_active]` and its right-hand side.
    system: DMatrix<f64>,
    active_rows: Vec<(usize, RowStatus)>,
}

/// Minimum-norm point of the equality system for one assignment, if consistent and
/// inside every box.
fn candidate(
    task: &TaskSpec,
    a: &DMatrix<f64>,
    bounds: &GeneralizedBounds,
    assignment: &[RowStatus],
) -> Option<Candidate> {
    let m = task.task_dim();
    let n = task.dof();
    let active_rows: Vec<(usize, RowStatus)> = assignment
        .iter()
        .enumerate()
        .filter(|(_, s)| **s != RowStatus::Inactive)
        .map(|(h, s)| (h, *s))
        .collect();
    let total = m + active_rows.len();
    let mut system = DMatrix::zeros(total, n);
    let mut rhs = DVector::zeros(total);
    system.view_mut((0, 0), (m, n)).copy_from(&task.jacobian);
    rhs.rows_mut(0, m).copy_from(&task.velocity);
    for (i, &(h, status)) in active_rows.iter().enumerate() {
        system.row_mut(m + i).copy_from(&a.row(h));
        rhs[m + i] = match status {
            RowStatus::AtMin => bounds.lower[h],
            _ => bounds.upper[h],
        };
    }
    let qdot = pseudoinverse(&system, DEFAULT_RANK_TOL) * &rhs;

    let scale = 1.0 + rhs.amax();
    if (&system * &qdot - &rhs).amax() > CHECK_TOL * scale {
        return None;
    }
    let adot = a * &qdot;
    let inside = (0..a.nrows())
        .all(|h| adot[h] >= bounds.lower[h] - CHECK_TOL && adot[h] <= bounds.upper[h] + CHECK_TOL);
    if !inside {
        return None;
    }
    Some(Candidate {
        qdot,
        system,
        active_rows,
    })
}

/// Checks stationarity `qdot = J^T nu + sum lambda_h A_h^T` with `lambda_h <= 0` on
/// rows at their maximum and `lambda_h >= 0` on rows at their minimum.
fn kkt_signs_hold(cand: &Candidate, m: usize) -> bool {
    let st = cand.system.transpose();
    let multipliers = pseudoinverse(&st, DEFAULT_RANK_TOL) * &cand.qdot;
    let scale = 1.0 + cand.qdot.amax();
    if (&st * &multipliers - &cand.qdot).amax() > KKT_TOL * scale {
        return false;
    }
    cand.active_rows.iter().enumerate().all(|(i, &(_, status))| {
        let lambda = multipliers[m + i];
        match status {
            RowStatus::AtMax => lambda <= KKT_TOL * scale,
            RowStatus::AtMin => lambda >= -KKT_TOL * scale,
            RowStatus::Inactive => true,
        }
    })
}

fn max_active(task: &TaskSpec, rows: usize) -> usize {
    let free = task.dof() - numerical_rank(&task.jacobian, DEFAULT_RANK_TOL).min(task.dof());
    free.min(rows)
}

/// Global minimum-norm solution of the box-constrained task by exhaustive enumeration.
pub fn qp_min_norm(task: &TaskSpec, a: &DMatrix<f64>, bounds: &GeneralizedBounds) -> Result<OracleSolution> {
    check_problem(task, a, bounds)?;
    let rows = a.nrows();
    let mut best: Option<(f64, DVector<f64>, Vec<RowStatus>)> = None;
    for assignment in Assignments::new(rows, max_active(task, rows)) {
        let Some(cand) = candidate(task, a, bounds, &assignment) else {
            continue;
        };
        if !kkt_signs_hold(&cand, task.task_dim()) {
            continue;
        }
        let objective = cand.qdot.norm_squared();
        let better = match &best {
            None => true,
            Some((obj, _, _)) => objective < obj - 1e-12 * (1.0 + obj),
        };
        if better {
            best = Some((objective, cand.qdot, assignment));
        }
    }
    Ok(match best {
        Some((objective, qdot, active_set)) => OracleSolution {
            qdot: Some(qdot),
            objective,
            active_set,
        },
        None => OracleSolution {
            qdot: None,
            objective: f64::INFINITY,
            active_set: vec![RowStatus::Inactive; rows],
        },
    })
}

/// Whether any joint velocity achieves the task inside the box. Stops at the first
/// consistent candidate; assignments with fewer active rows come first.
pub fn is_feasible(task: &TaskSpec, a: &DMatrix<f64>, bounds: &GeneralizedBounds) -> Result<bool> {
    check_problem(task, a, bounds)?;
    let rows = a.nrows();
    let limit = max_active(task, rows);
    for active in 0..=limit {
        let found = Assignments::new(rows, active)
            .filter(|asg| asg.iter().filter(|s| **s != RowStatus::Inactive).count() == active)
            .any(|asg| candidate(task, a, bounds, &asg).is_some());
        if found {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Largest `s` in `[0, 1]` for which the task `s * xdot` is feasible, by bisection
/// to absolute tolerance `tol`.
pub fn max_scaling_oracle(
    task: &TaskSpec,
    a: &DMatrix<f64>,
    bounds: &GeneralizedBounds,
    tol: f64,
) -> Result<f64> {
    check_problem(task, a, bounds)?;
    if is_feasible(task, a, bounds)? {
        return Ok(1.0);
    }
    if !is_feasible(&task.scaled(0.0), a, bounds)? {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if is_feasible(&task.scaled(mid), a, bounds)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Convexity: feasibility at lo must carry over to every smaller scale.
    debug_assert!(is_feasible(&task.scaled(0.5 * lo), a, bounds)?);
    Ok(lo)
}

/// Classic SNS with joint velocity bounds only: saturated joints are removed through
/// a diagonal weight and pinned to their bound.
pub fn joint_only_sns(task: &TaskSpec, lower: &DVector<f64>, upper: &DVector<f64>, opts: &SnsOptions) -> Result<SnsResult> {
    let n = task.dof();
    let m = task.task_dim();
    check_dim("joint lower bounds", n, lower.len())?;
    check_dim("joint upper bounds", n, upper.len())?;
    let j = &task.jacobian;
    let xdot = &task.velocity;
    let cutoff = task_cutoff(task, opts);

    let mut weight = DMatrix::<f64>::identity(n, n);
    let mut qdot_null = DVector::<f64>::zeros(n);
    let mut saturated: Vec<Saturation> = Vec::new();
    let mut held = vec![false; n];
    let mut best_scale = 0.0;
    let mut best_qdot = DVector::<f64>::zeros(n);
    let mut best_count = 0;

    for iteration in 1..=n {
        let jw_pinv = pseudoinverse_with_cutoff(&(j * &weight), cutoff);
        let qdot = &qdot_null + &jw_pinv * (xdot - j * &qdot_null);

        let exceeding: Vec<(usize, BoundSide)> = (0..n)
            .filter_map(|i| {
                if qdot[i] > upper[i] + opts.violation_eps {
                    Some((i, BoundSide::Max))
                } else if qdot[i] < lower[i] - opts.violation_eps {
                    Some((i, BoundSide::Min))
                } else {
                    None
                }
            })
            .collect();
        if exceeding.is_empty() {
            return Ok(SnsResult {
                qdot,
                scale: 1.0,
                scaled: false,
                saturated,
                iterations: iteration,
            });
        }

        let a_part = &jw_pinv * xdot;
        let b_part = &qdot - &a_part;
        let outcome = scaling_factors(&a_part, &b_part, lower, upper, opts.violation_eps);
        if outcome.admissible && outcome.task_scale > best_scale {
            let s = outcome.task_scale;
            let candidate = &qdot_null + &jw_pinv * (xdot * s - j * &qdot_null);
            let inside = (0..n).all(|i| {
                candidate[i] <= upper[i] + opts.violation_eps && candidate[i] >= lower[i] - opts.violation_eps
            });
            if inside {
                best_scale = s;
                best_qdot = candidate;
                best_count = saturated.len();
            }
        }

        let mut critical: Option<(usize, BoundSide)> = None;
        for &(i, side) in &exceeding {
            if held[i] {
                continue;
            }
            match critical {
                Some((c, _)) if outcome.factors[c] <= outcome.factors[i] => {}
                _ => critical = Some((i, side)),
            }
        }
        let scaled_result = |saturated: &[Saturation]| SnsResult {
            qdot: best_qdot.clone(),
            scale: best_scale,
            scaled: true,
            saturated: saturated[..best_count].to_vec(),
            iterations: iteration,
        };
        let Some((i, side)) = critical else {
            return Ok(scaled_result(&saturated));
        };
        let value = match side {
            BoundSide::Max => upper[i],
            BoundSide::Min => lower[i],
        };
        saturated.push(Saturation { row: i, side, value });
        held[i] = true;
        weight[(i, i)] = 0.0;
        qdot_null[i] = value;

        if numerical_rank_with_cutoff(&(j * &weight), cutoff) < m {
            return Ok(scaled_result(&saturated));
        }
    }
    Err(Error::IterationLimit { limit: n })
}
