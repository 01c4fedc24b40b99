//! Nonlocal thermistor problem with an Atangana-Baleanu-Caputo time derivative
//! and optimal Robin heat-transfer control.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adjoint;
pub mod error;
pub mod fracops;
pub mod linalg;
pub mod mesh;
pub mod mlf;
pub mod optimize;
pub mod state;
pub mod verify;

pub use error::{Error, Result};
