//! Two-species Ricker competition integrodifference model.
//!
//! The crate covers the space-free maps and their equilibria ([`model`]),
//! dispersal kernels ([`kernels`]), the discretized evolution operator
//! ([`operator`]), monostable spreading speeds ([`speeds`]) and the bistable
//! traveling wave solver ([`waves`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kernels;
pub mod model;
pub mod operator;
pub mod report;
pub mod speeds;
pub mod waves;

pub use error::{Error, Result};
pub use kernels::{discretize, DiscreteKernel, Kernel, KernelSpec};
pub use model::{Frame, ModelParams, Pair};
pub use operator::{Grid, Operator, SpatialState};
pub use report::CheckReport;
