//! Gradient-free methods for nonsmooth nonconvex optimization: two-point
//! estimators on uniform smoothing, GFM/SGFM and their two-phase variants,
//! a problem library with exact references, and statistical checks.


pub mod cli;
pub mod error;
pub mod optim;

pub mod problem;
pub mod problems;
pub mod quadrature;
pub mod rng;
pub mod sampling;
pub mod vector;
pub mod verify;


pub use error::{Error, Result};
pub use problem::{
    lipschitz_spot_check, Objective, ProblemMeta, ProblemSpec, SampleSpace, SampleToken, SpotCheck,
    StochasticObjective, StochasticProblemSpec,
};
pub use rng::{derive_stream, RngStream};
pub use sampling::{
    sample_unit_ball, sample_unit_sphere, smoothed_gradient, smoothed_gradient_stochastic, smoothed_value,
    two_point_estimate, two_point_estimate_stochastic, BatchGradient, GradientEstimate, McEstimate,
    SmoothingParams,
};
pub use vector::Vector;
