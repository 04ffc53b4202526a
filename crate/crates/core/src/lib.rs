//! Reconstruction of the stochastic evolution of non-stationary distributions.
//!
//! The crate is `no_std` (it needs `alloc`) and covers the numerical pipeline:
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`dist`] | Gamma, inverse-Gamma, log-normal and Weibull densities, CDFs, moments |
//! | [`special`] | log-gamma, regularized incomplete gamma, erf, digamma, trigamma |
//! | [`ingest`] | trading calendar and cross-sectional snapshot assembly |
//! | [`ecdf`] | empirical CDFs and least-squares CDF fitting |
//! | [`divergence`] | weighted `|log-ratio|` divergences and model rankings |
//! | [`detrend`] | daily pattern / fluctuation decomposition |
//! | [`markov`] | conditional densities and Wilcoxon-based Markov length scans |
//! | [`km`] | Kramers-Moyal drift/diffusion estimates and Ornstein-Uhlenbeck extraction |
//! | [`sde`] | Euler-Maruyama simulation, analytic OU moments, moment evolution, synthetic data |
//!
//! File formats, CSV parsing and the command-line front end live in the `parevo` crate.
#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod detrend;
pub mod dist;
pub mod divergence;
pub mod ecdf;
mod error;
pub mod ingest;
pub mod km;
pub mod linalg;
pub mod markov;
pub mod numeric;
pub mod optim;
pub mod quadrature;
pub mod sde;
pub mod series;
pub mod special;

pub use dist::{ModelFamily, ModelParams, Moment};
pub use error::{Error, Result};
