//! Saturation in the null space with generalised box constraints.
//!
//! The solver looks for joint velocities `qdot` achieving the task `J qdot = xdot`
//! while every row of the augmented map `A qdot` stays inside `[lower, upper]`.
//! Violating rows are saturated one at a time (most critical first) and the task is
//! re-solved in the null space of the saturated rows. When the saturated set leaves
//! too little freedom for the task, the best scaled solution seen so far is
//! returned: the task velocity keeps its direction and is shrunk by `scale`.

use nalgebra::{DMatrix, DVector};

use crate::constraints::GeneralizedBounds;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{
    numerical_rank, numerical_rank_with_cutoff, pseudoinverse, pseudoinverse_with_cutoff, spectral_norm,
    Cutoff, DEFAULT_RANK_TOL,
};

/// Tolerance of the box violation test.
pub const VIOLATION_EPS: f64 = 1e-9;

/// Desired task velocity and its Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub velocity: DVector<f64>,
    pub jacobian: DMatrix<f64>,
}

impl TaskSpec {
    pub fn new(velocity: DVector<f64>, jacobian: DMatrix<f64>) -> Result<Self> {
        check_dim("task velocity", jacobian.nrows(), velocity.len())?;
        if velocity.iter().chain(jacobian.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("task"));
        }
        let (m, n) = jacobian.shape();
        if m >= n {
            return Err(Error::NotRedundant { m, n });
        }
        Ok(Self { velocity, jacobian })
    }

    pub fn task_dim(&self) -> usize {
        self.jacobian.nrows()
    }

    pub fn dof(&self) -> usize {
        self.jacobian.ncols()
    }

    /// Same Jacobian, task velocity multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            velocity: &self.velocity * s,
            jacobian: self.jacobian.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundSide {
    Min,
    Max,
}

impl BoundSide {
    pub fn name(self) -> &'static str {
        match self {
            BoundSide::Min => "min",
            BoundSide::Max => "max",
        }
    }
}

/// A row held at one of its bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saturation {
    pub row: usize,
    pub side: BoundSide,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnsResult {
    pub qdot: DVector<f64>,
    /// Scale applied to the task velocity; 1 unless `scaled`.
    pub scale: f64,
    /// True when the task had to be shrunk to respect the bounds.
    pub scaled: bool,
    /// Saturated rows defining the returned solution, in saturation order.
    pub saturated: Vec<Saturation>,
    /// Outer iterations performed.
    pub iterations: usize,
}

/// Per-row admissible task scales and their minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingOutcome {
    pub factors: Vec<f64>,
    pub task_scale: f64,
    /// Row with the smallest factor, lowest index on ties. `None` for zero rows.
    pub critical_row: Option<usize>,
    /// Every row lies in its box at `task_scale`. False when some row starts outside
    /// (`beta` out of the box) and needs a larger scale than `task_scale` to get back in.
    pub admissible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub row: usize,
    pub side: BoundSide,
    /// Signed excess: `value - upper` (positive) or `value - lower` (negative).
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnsOptions {
    pub rank_tol: f64,
    pub violation_eps: f64,
}

impl Default for SnsOptions {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            violation_eps: VIOLATION_EPS,
        }
    }
}

/// Largest admissible scale for one row, given its task part `alpha` and the
/// remaining part `beta` of the row velocity `alpha * s + beta`.
///
/// With `lo = lower - beta` and `hi = upper - beta`: a row whose velocity is inside
/// the box (within `eps`) at `s = 1` is unrestricted; otherwise the factor is the
/// fraction of `alpha` that fits before the crossed bound, and 0 when no positive
/// scale reaches that bound from the right side.
///
/// This is only the upper end of the admissible range of `s`. A row whose `beta` is
/// outside the box also needs a minimum scale; see [`ScalingOutcome::admissible`].
pub(crate) fn row_scale(alpha: f64, beta: f64, lower: f64, upper: f64, eps: f64) -> f64 {
    let lo = lower - beta;
    let hi = upper - beta;
    if alpha >= lo - eps && alpha <= hi + eps {
        return 1.0;
    }
    if alpha < 0.0 && lo < 0.0 {
        if alpha < lo {
            lo / alpha
        } else {
            1.0
        }
    } else if alpha > 0.0 && hi > 0.0 {
        if alpha > hi {
            hi / alpha
        } else {
            1.0
        }
    } else {
        0.0
    }
}

pub(crate) fn scaling_factors(
    alpha: &DVector<f64>,
    beta: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    eps: f64,
) -> ScalingOutcome {
    let factors: Vec<f64> = (0..alpha.len())
        .map(|h| row_scale(alpha[h], beta[h], lower[h], upper[h], eps))
        .collect();
    let mut critical_row = None;
    let mut task_scale = 1.0;
    for (h, &s) in factors.iter().enumerate() {
        if critical_row.is_none() || s < task_scale {
            task_scale = s;
            critical_row = Some(h);
        }
    }
    let admissible = (0..alpha.len()).all(|h| {
        let v = alpha[h] * task_scale + beta[h];
        v >= lower[h] - eps && v <= upper[h] + eps
    });
    ScalingOutcome {
        factors,
        task_scale,
        critical_row,
        admissible,
    }
}

/// Per-row optimal task scaling factors for the row velocities `alpha * s + beta`.
pub fn get_task_scaling_factor(
    alpha: &DVector<f64>,
    beta: &DVector<f64>,
    bounds: &GeneralizedBounds,
) -> Result<ScalingOutcome> {
    check_dim("alpha", bounds.len(), alpha.len())?;
    check_dim("beta", bounds.len(), beta.len())?;
    Ok(scaling_factors(
        alpha,
        beta,
        &bounds.lower,
        &bounds.upper,
        VIOLATION_EPS,
    ))
}

fn violations(values: &DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>, eps: f64) -> Vec<Violation> {
    values
        .iter()
        .enumerate()
        .filter_map(|(h, &v)| {
            if v > upper[h] + eps {
                Some(Violation {
                    row: h,
                    side: BoundSide::Max,
                    margin: v - upper[h],
                })
            } else if v < lower[h] - eps {
                Some(Violation {
                    row: h,
                    side: BoundSide::Min,
                    margin: v - lower[h],
                })
            } else {
                None
            }
        })
        .collect()
}

/// Rows of `A qdot` outside `[lower - eps, upper + eps]`.
pub fn check_feasibility(
    qdot: &DVector<f64>,
    a: &DMatrix<f64>,
    bounds: &GeneralizedBounds,
    eps: f64,
) -> Result<Vec<Violation>> {
    check_dim("augmented matrix columns", a.ncols(), qdot.len())?;
    check_dim("augmented matrix rows", bounds.len(), a.nrows())?;
    Ok(violations(&(a * qdot), &bounds.lower, &bounds.upper, eps))
}

/// Singular value cutoff for matrices of the form `J P`.
pub(crate) fn task_cutoff(task: &TaskSpec, opts: &SnsOptions) -> Cutoff {
    Cutoff::Absolute(opts.rank_tol * spectral_norm(&task.jacobian))
}

/// Best scaled solution seen so far.
struct ScaledState {
    scale: f64,
    qdot: DVector<f64>,
    saturations: usize,
}

/// Solves the constrained velocity problem. Runs at most `A.nrows()` outer
/// iterations; each one either terminates or saturates one further independent row.
pub fn sns_velocity(
    task: &TaskSpec,
    a: &DMatrix<f64>,
    bounds: &GeneralizedBounds,
    opts: &SnsOptions,
) -> Result<SnsResult> {
    let n = task.dof();
    let m = task.task_dim();
    let rows = a.nrows();
    check_dim("augmented matrix columns", n, a.ncols())?;
    check_dim("bounds", rows, bounds.len())?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("augmented matrix"));
    }
    if bounds.lower.iter().chain(bounds.upper.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("bounds"));
    }
    let j = &task.jacobian;
    let xdot = &task.velocity;
    // Singular values of J P are judged against the scale of J itself, so that a
    // projector reduced to round-off yields rank 0 instead of amplified noise.
    let jp_cutoff = task_cutoff(task, opts);

    let mut qdot_null = DVector::zeros(n);
    let mut projector = DMatrix::identity(n, n);
    let mut saturated: Vec<Saturation> = Vec::new();
    let mut held = vec![false; rows];
    // s = 0 with no saturation: zero motion, inside every box shaped from a valid state.
    let mut best = ScaledState {
        scale: 0.0,
        qdot: DVector::zeros(n),
        saturations: 0,
    };

    let fallback = |best: ScaledState, saturated: &[Saturation], iterations: usize| SnsResult {
        qdot: best.qdot,
        scale: best.scale,
        scaled: true,
        saturated: saturated[..best.saturations].to_vec(),
        iterations,
    };

    for iteration in 1..=rows.max(1) {
        let jp_pinv = pseudoinverse_with_cutoff(&(j * &projector), jp_cutoff);
        let qdot = &qdot_null + &jp_pinv * (xdot - j * &qdot_null);
        let adot = a * &qdot;

        let violated = violations(&adot, &bounds.lower, &bounds.upper, opts.violation_eps);
        if violated.is_empty() {
            return Ok(SnsResult {
                qdot,
                scale: 1.0,
                scaled: false,
                saturated,
                iterations: iteration,
            });
        }

        let alpha = a * (&jp_pinv * xdot);
        let beta = &adot - &alpha;
        let outcome = scaling_factors(
            &alpha,
            &beta,
            &bounds.lower,
            &bounds.upper,
            opts.violation_eps,
        );
        if outcome.admissible && outcome.task_scale > best.scale {
            // The stored solution is the one returned on fallback; it is checked
            // directly because an ill-conditioned J P can make it differ from
            // alpha * s + beta by more than eps.
            let s = outcome.task_scale;
            let candidate = &qdot_null + &jp_pinv * (xdot * s - j * &qdot_null);
            let rows_at_s = a * &candidate;
            if violations(&rows_at_s, &bounds.lower, &bounds.upper, opts.violation_eps).is_empty() {
                best = ScaledState {
                    scale: s,
                    qdot: candidate,
                    saturations: saturated.len(),
                };
            }
        }

        // Most critical violated row; lowest index wins ties.
        let critical = violated
            .iter()
            .filter(|v| !held[v.row])
            .fold(None::<&Violation>, |acc, v| match acc {
                Some(c) if outcome.factors[c.row] <= outcome.factors[v.row] => Some(c),
                _ => Some(v),
            });
        let Some(critical) = critical else {
            // Only already-saturated rows report violations: round-off on a held row.
            return Ok(fallback(best, &saturated, iteration));
        };
        let k = critical.row;
        let value = match critical.side {
            BoundSide::Max => bounds.upper[k],
            BoundSide::Min => bounds.lower[k],
        };
        saturated.push(Saturation {
            row: k,
            side: critical.side,
            value,
        });
        held[k] = true;

        let a_lim = DMatrix::from_fn(saturated.len(), n, |i, c| a[(saturated[i].row, c)]);
        if numerical_rank(&a_lim, opts.rank_tol) < saturated.len() {
            // The critical row depends on rows already saturated: no further freedom.
            return Ok(fallback(best, &saturated, iteration));
        }
        let a_lim_pinv = pseudoinverse(&a_lim, opts.rank_tol);
        projector = DMatrix::identity(n, n) - &a_lim_pinv * &a_lim;

        if numerical_rank_with_cutoff(&(j * &projector), jp_cutoff) < m {
            return Ok(fallback(best, &saturated, iteration));
        }

        let a_null = DVector::from_iterator(saturated.len(), saturated.iter().map(|s| s.value));
        qdot_null = a_lim_pinv * a_null;
    }
    Err(Error::IterationLimit { limit: rows.max(1) })
}
