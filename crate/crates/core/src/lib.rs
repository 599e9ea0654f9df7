#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Numerical laboratory for the cone classification of the Alt-Phillips
//! free boundary problem.

pub mod cone;
pub mod error;
pub mod experiment;
pub mod inequality;
pub mod quadrature;
pub mod report;
pub mod selftest;
pub mod solver;

pub use error::{Error, Result};
