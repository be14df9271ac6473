//! Velocity-level redundancy resolution for planar arms under hard joint and
//! Cartesian box constraints, using saturation in the null space (SNS).
//!
//! The crate is organised bottom-up:
//!
//! - [`kinematics`]: planar nR forward kinematics, Jacobians and the augmented matrix.
//! - [`constraints`]: limit sets and their shaping into a per-step velocity box.
//! - [`sns`]: the SNS solver and its optimal task scaling factor.
//! - [`oracle`]: brute-force reference solvers for verification.
//! - [`simulation`]: closed-loop end-effector path tracking with Euler integration.
//! - [`verify`]: limit and oracle checks of a finished rollout.
//! - [`io`]: scenario files, solver instances and CSV traces.

pub mod constraints;
pub mod error;
pub mod io;
pub mod kinematics;
pub mod linalg;
pub mod oracle;
pub mod simulation;
pub mod sns;
pub mod verify;

pub use error::{Error, Result};
