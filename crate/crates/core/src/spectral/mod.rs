//! Matrix-exponential and resolvent solutions of the rate equations.

pub mod jordan;
pub mod resolvent;

pub use jordan::{
    eigenvector, generalized_eigenvector, jordan_decompose, jordan_distribution, jordan_table_from, propagate,
    JordanBlock, JordanDecomposition,
};
pub use resolvent::{invert_laplace, laplace_distribution, resolvent_element, ResolventElement};
