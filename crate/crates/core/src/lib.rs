//! Leading-order weakly nonlinear geometric optics for hyperbolic boundary
//! problems with hyperbolic and elliptic boundary phases.

#![allow(clippy::needless_range_loop, clippy::too_many_arguments, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod corrector;
pub mod elliptic;
pub mod error;
pub mod forcing;
pub mod linalg;
pub mod modes;
pub mod numerics;
pub mod profile;
pub mod resonance;
pub mod singular;
pub mod system;
pub mod trig;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
