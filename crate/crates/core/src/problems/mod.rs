//! Test problem library.

pub mod finite_sum;
pub mod geometric;
pub mod pwl;
pub mod registry;
pub mod relu;

pub use finite_sum::{make_finite_sum_linear, make_finite_sum_pwl, FiniteSumProblem};
pub use geometric::{
    make_abs_1d, make_additive_noise, make_constant, make_halfspace_distance, make_linear, make_norm,
    make_shifted_norm, make_tight_mixture, Noise,
};
pub use pwl::{make_pwl_1d, smoothed_reference_1d, GoldsteinInterval, PiecewiseLinear1D};
pub use registry::{build_problem, AnyProblem};
pub use relu::{make_relu_net, ReluNet};
