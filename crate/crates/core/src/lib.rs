//! Gaussian process interpolation with maximum likelihood scale estimation
//! and Bayesian cubature on [0,1]^d.

pub mod cubature;
pub mod experiments;
pub mod gp;
pub mod kernels;
pub mod linalg;
pub mod pointsets;
pub mod quadrature;
pub mod specfun;
