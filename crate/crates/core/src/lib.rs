//! Analysis of economic linear-quadratic optimal control problems whose
//! rotated costs may be only positive semi-definite.
//!
//! The crate is `no_std` (it needs `alloc`). Matrices are `nalgebra`
//! dynamic matrices of `f64`.

#![no_std]

extern crate alloc;
#[cfg(test)]
#[macro_use]
extern crate std;

mod error;
pub mod matkit;
pub mod system;
pub mod riccati;
pub mod dissipativity;
pub mod mpc;

pub use error::Error;
pub use matkit::{Definiteness, Matrix, Tolerances, Vector};
pub use system::{LtiSystem, StageCost};

pub type Result<T> = core::result::Result<T, Error>;
