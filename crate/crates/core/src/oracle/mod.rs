//! Independent reference computations used to certify the closed-form
//! solvers on small instances.

pub mod constrained;
pub mod discrete;
pub mod ode;
pub mod series;

pub use constrained::{constrained_sum_bruteforce, constrained_sum_residue, ConstrainedSumQuery};
pub use discrete::discrete_time_propagate;
pub use ode::{integrate_from, integrate_rate_equations, OdeTolerances};
pub use series::{evaluate_series, series_coefficients, SeriesCoefficients, SeriesValue};
