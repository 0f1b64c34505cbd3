//! Portfolio allocation engine for non-Gaussian return models.
//!
//! The crate provides, as a library plus a batch CLI:
//!
//! * ingestion of price panels from CSV and aggregation to daily, weekly and
//!   monthly simple returns ([`returns_io`]);
//! * the asymmetric Laplace return model: density, moments, sampling,
//!   maximum-likelihood and Metropolis fitting, and the empirical
//!   scaling-law / skewness regressions ([`ald`]);
//! * single-asset allocation rules for Gaussian and asymmetric-Laplace
//!   returns, with and without marginalization over an uncertain expected
//!   return ([`alloc_uni`]);
//! * the multivariate counterparts, including the polynomial stationarity
//!   systems solved by damped Newton iteration ([`alloc_multi`]);
//! * worst-case (minimax) allocation on the simplex with KKT certificates
//!   and the entropy-based trade-off heuristic ([`worstcase`]);
//! * adjacency-constrained precision-matrix estimation with covariance
//!   shrinkage ([`precision`]);
//! * long-horizon CRRA utilities under log-normal terminal returns
//!   ([`longterm`]).
//!
//! All solvers are deterministic given their inputs and explicit seeds.

pub mod ald;
pub mod alloc_multi;
pub mod alloc_uni;
pub mod cli;
pub mod longterm;
pub mod numerics;
pub mod precision;
pub mod returns_io;
pub mod worstcase;

pub use ald::AldParams;
pub use alloc_uni::RiskAversion;
