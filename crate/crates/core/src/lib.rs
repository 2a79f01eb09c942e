//! Diagnostics for exact penalty functions `F_λ = f + λφ`.
//!
//! The crate estimates least exact penalty parameters (locally and on bounded regions),
//! checks error bounds and calmness, inspects the path of global minimisers of `F_λ`
//! as `λ` grows, filters infeasible stationary points and runs an adaptive exact
//! penalty method. All sampling is deterministic given a seed.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod corpus;
pub mod divergence;
pub mod error;
pub mod exactness;
pub mod export;
pub mod global;
pub mod inner;
pub mod local;
pub mod modulus;
pub mod par;
pub mod perturbation;
pub mod problem;
pub mod sampling;
pub mod solver;
pub mod stationarity;
pub mod witness;

pub use error::{Error, Result};
pub use problem::{ConstrainedProblem, ExtReal, PenaltyFunction, Point, Region};
pub use sampling::SamplingSchedule;
