pub mod error;
pub mod kernels;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
pub use kernels::{KernelClass, KernelSpec};
pub mod laplace;
pub mod series;
pub mod heat;
pub mod subordination;
pub mod montecarlo;
pub mod asymptotics;
pub mod experiment;
mod spectral;
pub mod selftest;
