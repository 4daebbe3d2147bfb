// `!(x > 0.0)` is used deliberately so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod benchmarks;
pub mod control;
pub mod error;
pub mod kinematics;
pub mod linalg;
pub mod manipulability;
pub mod mocap;
pub mod profile;
pub mod spd;

pub use error::{Error, Result};
