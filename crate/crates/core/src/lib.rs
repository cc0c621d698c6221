//! Twice-penalized P-splines for a small cohort that observes two covariates
//! (`x`, `z`) alongside a large cohort that observes only `x`.
//!
//! A tensor-product or additive cubic B-spline surface is fitted to the small
//! cohort with a second-difference roughness penalty, plus a second penalty that
//! pulls the kernel-smoothed marginal of the fit in `x` towards a marginal
//! estimated from the large cohort.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod application;
pub mod basis;
pub mod cli;
pub mod design;
pub mod error;
pub mod fit_linear;
pub mod fit_logistic;
pub mod io;
pub mod linalg;
pub mod marginal;
pub mod reduce;
pub mod simulate;
pub mod tune;

pub use error::{Error, Result};
