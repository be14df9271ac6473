#![allow(dead_code)]

use std::path::PathBuf;

use gsns::constraints::{generalized_bounds, CartesianLimits, GeneralizedBounds, JointLimits, LimitSet};
use gsns::kinematics::{augmented_matrix, control_point_positions, ee_jacobian, Axis, ControlPoint, JointConfig, RobotModel};
use gsns::sns::TaskSpec;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn bundled_scenario() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/paper_6r.json")
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub task: TaskSpec,
    pub matrix: DMatrix<f64>,
    pub bounds: GeneralizedBounds,
}

impl Instance {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }
}

fn interval<R: Rng>(rng: &mut R) -> (f64, f64) {
    // Mostly strictly interior, sometimes sitting on one bound.
    let lo = match rng.gen_range(0..10) {
        0 => 0.0,
        _ => -rng.gen_range(0.1..1.5),
    };
    let hi = match rng.gen_range(0..10) {
        0 if lo < 0.0 => 0.0,
        _ => rng.gen_range(0.1..1.5),
    };
    (lo, hi)
}

fn random_task<R: Rng>(rng: &mut R, m: usize, n: usize) -> TaskSpec {
    let j = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    let dir = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
    let magnitude = rng.gen_range(0.05..3.0);
    let xdot = if dir.norm() > 1e-6 { dir.normalize() * magnitude } else { dir };
    TaskSpec::new(xdot, j).expect("m < n and finite")
}

/// Generic instance: random `J`, `A = [I; C]` with `r` extra rows.
pub fn generic_instance<R: Rng>(rng: &mut R, n: usize, m: usize, r: usize) -> Instance {
    let task = random_task(rng, m, n);
    let mut matrix = DMatrix::zeros(n + r, n);
    for i in 0..n {
        matrix[(i, i)] = 1.0;
    }
    for i in n..n + r {
        for c in 0..n {
            matrix[(i, c)] = rng.gen_range(-1.0..1.0);
        }
    }
    let (lower, upper): (Vec<f64>, Vec<f64>) = (0..n + r).map(|_| interval(rng)).unzip();
    let bounds = GeneralizedBounds::new(DVector::from_vec(lower), DVector::from_vec(upper)).unwrap();
    Instance { task, matrix, bounds }
}

/// Random planar arm with y-constrained control points at a random valid state.
pub fn arm_instance<R: Rng>(rng: &mut R, n: usize, cps: usize) -> Instance {
    let lengths: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..1.2)).collect();
    let mut frames: Vec<usize> = (1..n).collect();
    let mut control_points = Vec::new();
    for _ in 0..cps.min(frames.len()) {
        let f = frames.remove(rng.gen_range(0..frames.len()));
        control_points.push(ControlPoint::new(f, vec![Axis::Y]));
    }
    let model = RobotModel::new(lengths, control_points).unwrap();
    let q = JointConfig::from_slice(&(0..n).map(|_| rng.gen_range(-1.4..1.4)).collect::<Vec<_>>()).unwrap();
    let p = control_point_positions(&model, &q).unwrap();
    let limits = LimitSet {
        joints: (0..n)
            .map(|_| JointLimits {
                q_min: -1.5,
                q_max: 1.5,
                v_min: -rng.gen_range(0.3..1.2),
                v_max: rng.gen_range(0.3..1.2),
            })
            .collect(),
        control_points: p
            .iter()
            .map(|&y| CartesianLimits {
                p_min: vec![y - rng.gen_range(0.0..0.5)],
                p_max: vec![y + rng.gen_range(0.0005..0.5)],
                v_min: vec![-rng.gen_range(0.2..1.0)],
                v_max: vec![rng.gen_range(0.2..1.0)],
            })
            .collect(),
    };
    let period = 0.001;
    let bounds = generalized_bounds(&model, &limits, &q, &p, period).unwrap();
    let j = ee_jacobian(&model, &q).unwrap();
    let dir = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
    let xdot = dir.normalize() * rng.gen_range(0.05..3.0);
    Instance {
        task: TaskSpec::new(xdot, j).unwrap(),
        matrix: augmented_matrix(&model, &q).unwrap().matrix,
        bounds,
    }
}

/// The suite used by the oracle cross-check: half generic, half arm-derived, all
/// within the oracle row cap.
pub fn oracle_suite(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = rng(seed);
    (0..count)
        .map(|k| {
            let n = rng.gen_range(3..=6);
            if k % 2 == 0 {
                let m = rng.gen_range(1..=2);
                let r = rng.gen_range(0..=(12 - n).min(4));
                generic_instance(&mut rng, n, m, r)
            } else {
                let cps = rng.gen_range(0..n);
                arm_instance(&mut rng, n, cps)
            }
        })
        .collect()
}

/// Joint-only instances (`A = I`).
pub fn joint_suite(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = rng(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(3..=6);
            let m = rng.gen_range(1..=2);
            generic_instance(&mut rng, n, m, 0)
        })
        .collect()
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Central differences (step 1e-7) of `f` around `q`, one column per joint.
pub fn numeric_jacobian(q: &[f64], rows: usize, f: impl Fn(&JointConfig) -> DVector<f64>) -> DMatrix<f64> {
    const H: f64 = 1e-7;
    let mut out = DMatrix::zeros(rows, q.len());
    for j in 0..q.len() {
        let mut plus = q.to_vec();
        let mut minus = q.to_vec();
        plus[j] += H;
        minus[j] -= H;
        let d = (f(&JointConfig::from_slice(&plus).unwrap()) - f(&JointConfig::from_slice(&minus).unwrap()))
            / (2.0 * H);
        out.set_column(j, &d);
    }
    out
}

/// Largest entry error relative to the largest analytic entry (floored at 1, so
/// entries that are exactly zero analytically do not blow up the ratio).
pub fn relative_error(analytic: &DMatrix<f64>, numeric: &DMatrix<f64>) -> f64 {
    (analytic - numeric).amax() / analytic.amax().max(1.0)
}
