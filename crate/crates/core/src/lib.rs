//! Numerical tools for the Fueter operator of a divergence-free frame on
//! `T^3`, `S^3` and `S^1 x S^2`.

pub mod ample;
pub mod error;
pub mod field;
pub mod floer;
pub mod flow;
pub mod frame;
pub mod linalg;
pub mod quadrature;
pub mod quat;
pub mod spectral;
pub mod variational;
pub mod sphere_harmonics;
pub mod su2;

pub use error::{FueterError, Result};
pub use frame::{FrameSpec, Manifold, ManifoldPoint};
pub use quat::{Axis, Quaternion};
