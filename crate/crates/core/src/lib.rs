//! Zero statistics of random entire functions.
//!
//! The crate samples random functions G_n built from a fixed entire basis
//! f_1, ..., f_l (iid standard complex Gaussian coefficients on all products
//! of up to n basis factors), locates their zeros in a disk, forms the
//! log-weighted normalized counting measure of the zero set, and compares
//! Monte Carlo aggregates of that measure against the predicted large-n
//! limit: an absolutely continuous part supported where sum |f_j|^2 > 1 plus
//! a singular part carried by the level curve sum |f_j|^2 = 1.
//!
//! Modules follow the pipeline: [`basis`] (symbolic basis functions),
//! [`ensemble`] (samplers and covariance kernel), [`zeros`] (root isolation),
//! [`measures`] (empirical measures and Monte Carlo aggregation), [`limit`]
//! (the predicted limit measure), [`probes`] (closed-form convergence
//! probes).

pub mod basis;
pub mod ensemble;
pub mod error;
pub mod limit;
pub mod measures;
pub mod probes;
pub mod quad;
pub mod svg;
pub mod zeros;

pub use error::{Error, Result};
