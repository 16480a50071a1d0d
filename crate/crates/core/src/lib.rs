// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::result_large_err)]

pub mod cli;
pub mod config;
pub mod export;
pub mod gridsim;
pub mod objective;
pub mod orchestrator;
pub mod zo;
