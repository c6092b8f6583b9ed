//! Nonlinear g-expectations of one-dimensional diffusion functionals and
//! sampled certification of sufficient conditions for g-stochastic ordering.
//!
//! The crate is `no_std` with `alloc`. File formats, the command line and
//! parallel drivers live in the `gorder` companion crate.
#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod conditions;
pub mod expr;
pub mod linalg;
pub mod mc;
pub mod model;
pub mod ordering;
pub mod pde;
pub mod sampling;
pub mod scenarios;

use alloc::string::String;

pub use conditions::{ConditionId, ConditionReport, Status, Witness};
pub use expr::{Expr, Var};
pub use model::{DiffusionSpec, GeneratorSpec, PayoffSpec, ProblemSpec, StateDomain};
pub use sampling::{Point, Range, SampleBox};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parse error at {0}")]
    Parse(#[from] expr::ParseError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] expr::EvalError),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("scale factor must be nonzero")]
    ZeroScale,
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("non-finite value at step {step}, node {node}")]
    NonFinite { step: usize, node: usize },
    #[error("non-finite path value at step {step}, path {path}")]
    NonFinitePath { step: usize, path: usize },
    #[error("x0 = {0} lies outside the grid")]
    OutOfGrid(f64),
    #[error("parameter violation: {0}")]
    ParameterViolation(String),
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
}
