//! Gradient-descent iterations, their continuous-time ODE/SDE models and
//! fluctuation limits, reference solutions, and Monte-Carlo checks that tie
//! them together.

// NaN must fail positivity checks; indexed loops read better in the numeric kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod algorithms;
pub mod analysis;
pub mod data;
pub mod error;
pub mod experiments;
pub mod models;
pub mod oracles;
pub mod seeding;
pub mod solvers;
pub mod table;

pub use error::{Error, Result};
