//! Divergences of finite-dimensional quantum states on block matrix algebras.

pub mod aep;
pub mod algebra;
pub mod channel_divergences;
pub mod channels;
pub mod divergences;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod random;
pub mod smoothing;
pub mod splitting;
pub mod symmetric;

pub use algebra::{BlockAlgebra, BlockOperator, Factor, PositiveFunctional, Projection};
pub use error::{Error, Result};
