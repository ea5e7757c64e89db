//! Quadrotor wall-perching core: rigid-body dynamics, a V-trace actor-critic
//! learner, flat-output trajectory extraction and a geometric controller with
//! an attitude-only final stage.
//!
//! Conventions: inertial z points up, gravity is `[0, 0, −g]`, the body z axis
//! is the thrust axis. The wall is the plane `x = 0` and vehicles approach it
//! from positive x.

#![no_std]
// `!(x > 0.0)` is how validation rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dynamics;
pub mod exec;
pub mod nn;
pub mod rl;
pub mod so3;
pub mod controller;
pub mod trajgen;
pub mod mission;
