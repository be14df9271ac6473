mod common;

use common::{numeric_jacobian, relative_error};
use gsns::kinematics::{
    augmented_matrix, control_point_jacobian, control_point_positions, ee_jacobian, end_effector,
    forward_kinematics, Axis, ControlPoint, JointConfig, RobotModel,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn arm() -> impl Strategy<Value = (RobotModel, Vec<f64>)> {
    (2usize..=7).prop_flat_map(|n| {
        (
            prop::collection::vec(0.2f64..1.5, n),
            prop::collection::vec(-std::f64::consts::PI..std::f64::consts::PI, n),
            prop::collection::vec((1usize..=n, 0usize..3), 0..=n),
        )
            .prop_map(|(lengths, q, cps)| {
                let cps = cps
                    .into_iter()
                    .map(|(frame, axes)| {
                        let axes = match axes {
                            0 => vec![Axis::X],
                            1 => vec![Axis::Y],
                            _ => vec![Axis::X, Axis::Y],
                        };
                        ControlPoint::new(frame, axes)
                    })
                    .collect();
                (RobotModel::new(lengths, cps).unwrap(), q)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ee_jacobian_matches_finite_differences((model, q) in arm()) {
        let config = JointConfig::from_slice(&q).unwrap();
        let analytic = ee_jacobian(&model, &config).unwrap();
        let numeric = numeric_jacobian(&q, 2, |c| {
            let p = end_effector(&model, c).unwrap();
            DVector::from_column_slice(p.as_slice())
        });
        prop_assert!(relative_error(&analytic, &numeric) <= 1e-6);
    }

    #[test]
    fn control_point_jacobians_match_finite_differences((model, q) in arm()) {
        let config = JointConfig::from_slice(&q).unwrap();
        for (i, cp) in model.control_points().iter().enumerate() {
            let analytic = control_point_jacobian(&model, &config, i).unwrap();
            let frame = cp.frame;
            let axes = cp.axes.clone();
            let numeric = numeric_jacobian(&q, axes.len(), |c| {
                let p = forward_kinematics(&model, c).unwrap()[frame];
                DVector::from_iterator(axes.len(), axes.iter().map(|a| p[a.index()]))
            });
            prop_assert!(relative_error(&analytic, &numeric) <= 1e-6, "control point {}", i);
        }
    }

    #[test]
    fn augmented_matrix_stacks_identity_and_control_points((model, q) in arm()) {
        let config = JointConfig::from_slice(&q).unwrap();
        let aug = augmented_matrix(&model, &config).unwrap();
        let n = model.dof();
        prop_assert_eq!(aug.matrix.nrows(), n + model.cartesian_dim());
        prop_assert_eq!(aug.matrix.rows(0, n).into_owned(), DMatrix::identity(n, n));
        prop_assert_eq!(aug.row_map.len(), aug.matrix.nrows());
        let mut row = n;
        for i in 0..model.control_point_count() {
            let block = control_point_jacobian(&model, &config, i).unwrap();
            prop_assert_eq!(aug.matrix.rows(row, block.nrows()).into_owned(), block.clone());
            row += block.nrows();
        }
        // Stacked positions follow the same row order.
        let p = control_point_positions(&model, &config).unwrap();
        prop_assert_eq!(p.len(), model.cartesian_dim());
    }

    #[test]
    fn end_effector_stays_within_reach((model, q) in arm()) {
        let config = JointConfig::from_slice(&q).unwrap();
        let points = forward_kinematics(&model, &config).unwrap();
        prop_assert_eq!(points.len(), model.dof() + 1);
        prop_assert_eq!(points[0].norm(), 0.0);
        prop_assert!(points[model.dof()].norm() <= model.reach() + 1e-12);
        for (k, w) in points.windows(2).enumerate() {
            prop_assert!(((w[1] - w[0]).norm() - model.link_lengths()[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn jacobian_rank_drops_when_stretched() {
    let model = RobotModel::serial(vec![1.0; 4]).unwrap();
    let j = ee_jacobian(&model, &JointConfig::zeros(4)).unwrap();
    assert_eq!(gsns::linalg::numerical_rank(&j, gsns::linalg::DEFAULT_RANK_TOL), 1);
}
