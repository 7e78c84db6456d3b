//! Numerical laboratory for Bernstein–von Mises limits in semiparametric
//! models.

pub mod rng;
pub mod stats;
pub mod posterior;
pub mod lan;
pub mod quadrature;
pub mod models;
pub mod experiments;
