//! Estimation and inference for hybrid control studies: an RCT whose control
//! arm is augmented with an external control arm.
//!
//! The crate provides six estimators of the control mean `mu0` (RCT-only,
//! unadjusted downweighting, propensity-odds weighting, augmentation,
//! G-computation, weighted regression), two estimators of the treated mean
//! `mu1`, treatment effects on difference / log-ratio / log-odds-ratio
//! scales, analytic standard errors via stacked M-estimation sandwiches,
//! stratified bootstrap standard errors, and a reproducible Monte Carlo
//! engine for bias / standard deviation / coverage studies.

pub mod design;
pub mod error;
pub mod estimators;
pub mod glm;
pub mod inference;
pub mod linalg;
pub mod model;
pub mod propensity;
pub mod rng;
pub mod simulation;

pub mod cli;

pub use error::{Error, Result};
